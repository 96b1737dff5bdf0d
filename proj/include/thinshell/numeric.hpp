#pragma once

// Numerical plumbing shared by every module: error types, adaptive
// quadrature, monotone root bracketing and a small parallel loop.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace thinshell {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// Raised when an iterative numerical procedure fails to meet its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when inputs violate an operation's precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct QuadratureOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  unsigned max_depth = 15;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
};

inline bool meets_tolerance(const QuadratureResult& r, const QuadratureOptions& opts) {
  return r.error <= std::max(opts.abs_tol, opts.rel_tol * r.l1);
}

namespace detail {

[[noreturn]] inline void quadrature_failure(double a, double b, const QuadratureResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "adaptive quadrature did not converge on [%.9g, %.9g]: value %.6g, error %.3g", a,
                b, r.value, r.error);
  throw ConvergenceError(buf);
}

struct Panel {
  double a = 0.0;
  double b = 0.0;
  unsigned depth = 0;
  QuadratureResult r;
  bool operator<(const Panel& o) const { return r.error < o.r.error; }
};

/// One G15/K31 pair on [a, b]; the error is |K - G| in the interval's units.
template <class F>
QuadratureResult gk31(F& f, double a, double b) {
  using rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  using gauss = boost::math::quadrature::gauss<double, 15>;
  const auto& x = rule::abscissa();
  const auto& wk = rule::weights();
  const auto& wg = gauss::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const double f0 = f(mid);
  double k = f0 * wk[0], g = f0 * wg[0], l1 = std::abs(f0) * wk[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(mid + half * x[i]), fm = f(mid - half * x[i]);
    k += (fp + fm) * wk[i];
    l1 += (std::abs(fp) + std::abs(fm)) * wk[i];
    if (i % 2 == 0) g += (fp + fm) * wg[i / 2];
  }
  QuadratureResult r;
  r.value = k * half;
  r.l1 = l1 * std::abs(half);
  r.error = std::max(std::abs((k - g) * half), 2.0 * std::numeric_limits<double>::epsilon() * r.l1);
  return r;
}

/// Boost's tanh-sinh on [a, b] with its error converted to the interval's
/// units (the library reports it on the reference interval).
template <class F>
QuadratureResult tanh_sinh_raw(F&& f, double a, double b, const QuadratureOptions& opts) {
  QuadratureResult r;
  if (a == b) return r;
  static thread_local boost::math::quadrature::tanh_sinh<double> rule(15);
  // The two-argument form avoids a rounding assertion in the one-argument
  // path; abscissae that still round onto an endpoint are nudged inward.
  auto inner = [&](double x, double) {
    if (x <= a) x = std::nextafter(a, b);
    if (x >= b) x = std::nextafter(b, a);
    return f(x);
  };
  std::size_t levels = 0;
  r.value = rule.integrate(inner, a, b, opts.rel_tol, &r.error, &r.l1, &levels);
  r.error *= 0.5 * (b - a);
  return r;
}

/// Global adaptive bisection: the panel with the largest error is split
/// until the summed error meets the tolerance. Panels at max_depth are
/// frozen. `fixed` carries pieces integrated by other rules.
template <class F>
QuadratureResult refine(F& f, std::vector<Panel> panels, QuadratureResult fixed,
                        const QuadratureOptions& opts, Panel* worst) {
  std::vector<Panel> heap;
  QuadratureResult frozen = fixed;
  double err = fixed.error, l1 = fixed.l1;
  for (auto& p : panels) {
    err += p.r.error;
    l1 += p.r.l1;
    heap.push_back(p);
  }
  std::make_heap(heap.begin(), heap.end());
  Panel hardest;
  // Enough for every panel to reach a moderate depth; beyond this the
  // integrand is not resolvable at the requested accuracy.
  const std::size_t cap = heap.size() * 64 + (std::size_t{1} << 16);
  while (!heap.empty() && err > std::max(opts.abs_tol, opts.rel_tol * l1) && heap.size() < cap) {
    std::pop_heap(heap.begin(), heap.end());
    const Panel p = heap.back();
    heap.pop_back();
    if (p.depth >= opts.max_depth || !(p.b - p.a > 4.0 * std::numeric_limits<double>::epsilon() * std::abs(p.a))) {
      frozen.value += p.r.value;
      frozen.error += p.r.error;
      frozen.l1 += p.r.l1;
      if (p.r.error > hardest.r.error) hardest = p;
      continue;
    }
    const double m = 0.5 * (p.a + p.b);
    Panel left{p.a, m, p.depth + 1, gk31(f, p.a, m)};
    Panel right{m, p.b, p.depth + 1, gk31(f, m, p.b)};
    err += left.r.error + right.r.error - p.r.error;
    l1 += left.r.l1 + right.r.l1 - p.r.l1;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end());
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end());
  }
  QuadratureResult out = frozen;
  for (const auto& p : heap) {
    out.value += p.r.value;
    out.error += p.r.error;
    out.l1 += p.r.l1;
    if (p.r.error > hardest.r.error) hardest = p;
  }
  if (worst) *worst = hardest;
  return out;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (G15/K31) on a finite interval. Throws
/// ConvergenceError when the error estimate misses both tolerances.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  if (a == b) return {};
  detail::Panel seed{a, b, 0, detail::gk31(f, a, b)};
  detail::Panel worst;
  const auto r = detail::refine(f, {seed}, {}, opts, &worst);
  if (!std::isfinite(r.value) || !meets_tolerance(r, opts)) detail::quadrature_failure(worst.a, worst.b, r);
  return r;
}

/// Double-exponential rule for integrands with integrable endpoint
/// singularities. `f` receives the abscissa only.
template <class F>
QuadratureResult integrate_endpoint_singular(F&& f, double a, double b,
                                             const QuadratureOptions& opts = {}) {
  const auto r = detail::tanh_sinh_raw(f, a, b, opts);
  if (!std::isfinite(r.value) || !meets_tolerance(r, opts)) {
    // tanh-sinh is sometimes pessimistic on peaked integrands; fall back to
    // Gauss-Kronrod before giving up.
    return integrate(f, a, b, opts);
  }
  return r;
}

/// Integrates over consecutive breakpoints. The outer two pieces try the
/// endpoint-singular rule first; everything else is refined jointly, so the
/// tolerance applies to the summed error against the summed L1 norm.
template <class F>
double integrate_piecewise(F&& f, std::vector<double> breaks, const QuadratureOptions& opts = {}) {
  std::sort(breaks.begin(), breaks.end());
  // Pieces narrower than a few ulps of the span only feed roundoff to the
  // adaptive rule.
  const double span = breaks.empty() ? 0.0 : std::abs(breaks.back() - breaks.front());
  const double merge = 1e-12 * span;
  std::vector<double> kept;
  for (double b : breaks) {
    if (kept.empty() || b - kept.back() > merge) kept.push_back(b);
  }
  if (kept.size() >= 2 && breaks.back() != kept.back()) kept.back() = breaks.back();
  breaks = std::move(kept);
  if (breaks.size() < 2) return 0.0;
  // Boost's rules assert rather than report on non-finite samples.
  auto guarded = [&f](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "integrand is not finite at x = %.17g", x);
      throw ConvergenceError(buf);
    }
    return v;
  };
  const std::size_t pieces = breaks.size() - 1;
  std::vector<detail::Panel> panels;
  panels.reserve(pieces);
  std::vector<std::size_t> outer;
  for (std::size_t i = 0; i < pieces; ++i) {
    detail::Panel p{breaks[i], breaks[i + 1], 0, detail::gk31(guarded, breaks[i], breaks[i + 1])};
    if (i == 0 || i + 1 == pieces) outer.push_back(panels.size());
    panels.push_back(p);
  }
  double scale = 0.0;
  for (const auto& p : panels) scale += p.r.l1;
  const double budget = std::max(opts.abs_tol, opts.rel_tol * scale) / static_cast<double>(pieces);
  QuadratureResult fixed;
  std::vector<bool> replaced(panels.size(), false);
  for (std::size_t i : outer) {
    if (panels[i].r.error <= budget) continue;
    auto local = opts;
    local.rel_tol = panels[i].r.l1 > 0.0 ? std::clamp(budget / panels[i].r.l1, opts.rel_tol, 1e-3)
                                         : opts.rel_tol;
    const auto t = detail::tanh_sinh_raw(guarded, panels[i].a, panels[i].b, local);
    if (std::isfinite(t.value) && t.error < panels[i].r.error) {
      fixed.value += t.value;
      fixed.error += t.error;
      fixed.l1 += t.l1;
      replaced[i] = true;
    }
  }
  std::vector<detail::Panel> rest;
  rest.reserve(panels.size());
  for (std::size_t i = 0; i < panels.size(); ++i) {
    if (!replaced[i]) rest.push_back(panels[i]);
  }
  detail::Panel worst{breaks.front(), breaks.back(), 0, {}};
  const auto total = detail::refine(guarded, std::move(rest), fixed, opts, &worst);
  if (!std::isfinite(total.value) || !meets_tolerance(total, opts)) {
    detail::quadrature_failure(worst.a, worst.b, total);
  }
  return total.value;
}

/// Solves g(x) = target for increasing g on [lo, hi] by bisection. The
/// midpoint is geometric while the bracket spans more than a factor of four,
/// so tiny roots converge in relative terms as well.
template <class G>
double bisect_increasing(G&& g, double target, double lo, double hi, double rel_tol = 1e-13,
                         int max_iter = 200) {
  for (int it = 0; it < max_iter; ++it) {
    if (hi - lo <= rel_tol * std::abs(hi)) return 0.5 * (lo + hi);
    double mid;
    if (lo <= 0.0) {
      mid = (lo == 0.0 && hi > 0.0) ? hi * 1e-3 : 0.5 * (lo + hi);
      if (mid <= lo) mid = 0.5 * (lo + hi);
    } else if (hi > 4.0 * lo) {
      mid = std::sqrt(lo * hi);
    } else {
      mid = 0.5 * (lo + hi);
    }
    const double v = g(mid);
    if (v == target) return mid;
    if (v < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw ConvergenceError("bisection did not converge within " + std::to_string(max_iter) +
                         " steps");
}

/// Worker cap from THINSHELL_THREADS, else the hardware concurrency.
inline unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("THINSHELL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(std::min<long>(v, 1024));
  }
  return hw;
}

/// Runs fn(i) for i in [0, count). Results must be written to
/// index-addressed storage; execution order is unspecified.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_cap(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::vector<double> log_space(double lo, double hi, std::size_t points) {
  std::vector<double> out(points);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline double standard_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

}  // namespace thinshell
