#pragma once

// Density w_n of R_n = Y_1 + ... + Y_n under the Gibbs product measure:
// Gamma closed forms where they exist, characteristic-function FFT
// otherwise, and the local-CLT diagnostics built on top of it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "thinshell/density_grid.hpp"
#include "thinshell/fft.hpp"
#include "thinshell/gibbs.hpp"
#include "thinshell/numeric.hpp"

namespace thinshell {

struct SumGridParams {
  std::size_t min_points = std::size_t{1} << 14;  // FFT length floor (power of two)
  std::size_t min_points_edge = std::size_t{1} << 18;  // floor when w_n is not C^1 at s = 0
  double extent = 12.0;             // window half-width in standard deviations of R_n
  double y_points = 65536.0;        // target y-resolution is y_max / y_points
  double max_clip = 1e-3;           // allowed L1 mass removed by clipping negative ripple
};

/// Gamma(shape, rate) parameters of w_n for the closed-form specs.
inline GammaComponent gamma_law(const GibbsModel& m, int n) {
  if (!m.spec.has_closed_wn()) {
    throw PreconditionError("no closed form for w_n with " + m.spec.name());
  }
  const double per = m.spec.kind() == HamiltonianKind::quadratic ? 0.5 : 1.0;
  return GammaComponent{1.0, per * n, m.c};
}

/// log w_n(s) from the Gamma closed form; finite far into the tails.
inline double log_w_exact(const GibbsModel& m, int n, double s) {
  return gamma_law(m, n).log_pdf(s);
}

struct SumWindow {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t points = 0;
};

/// [max(0, n mu - E sd), max(n mu + E sd, Chernoff)] where the Chernoff point
/// bounds the upper tail by 1e-13 using the exponential moment at c/2.
inline SumWindow sum_window(const GibbsModel& m, int n, const SumGridParams& p = {}) {
  const double mean = n * m.mu;
  const double sd = std::sqrt(n * m.sigma2);
  SumWindow w;
  w.lo = std::max(0.0, mean - p.extent * sd);
  const double log_mgf = std::log(partition_function(m.spec, 0.5 * m.c) / m.Z);
  const double chernoff = (2.0 / m.c) * (n * log_mgf + std::log(1e13));
  w.hi = std::max(mean + p.extent * sd, chernoff);
  std::size_t N = 1;
  while (N < p.min_points) N <<= 1;
  // Below total shape 2 the part left after the singular subtraction still
  // has a cusp or kink at s = 0, and its ripple decays slowly in N.
  if (w.lo == 0.0 && n * (m.singular.beta + 1.0) < 2.0) N = std::max(N, p.min_points_edge);
  while ((w.hi - w.lo) / static_cast<double>(N) > sd / 16.0) N <<= 1;
  w.points = N;
  return w;
}

/// Closed-form w_n sampled at the cell midpoints of the FFT window.
inline DensityGrid w_exact(const GibbsModel& m, int n, const SumGridParams& p = {}) {
  if (n < 1) throw PreconditionError("n must be at least 1");
  const auto law = gamma_law(m, n);
  const auto win = sum_window(m, n, p);
  const double dx = (win.hi - win.lo) / static_cast<double>(win.points);
  std::vector<double> v(win.points);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = law.pdf(win.lo + (k + 0.5) * dx);
  return DensityGrid(win.lo, dx, std::move(v), GridLayout::cells);
}

/// w_n by inverting phi^n. When the window starts at 0 the singular model,
/// moved to rate 2c, is subtracted in frequency space and added back as an
/// exact Gamma term, which removes the Gibbs ripple at the left edge.
/// `defect` on the result is the L1 mass removed by clipping.
inline DensityGrid w_fft(const GibbsModel& m, int n, const SumGridParams& p = {}) {
  if (n < 1) throw PreconditionError("n must be at least 1");
  const auto win = sum_window(m, n, p);
  const std::size_t N = win.points;
  const double L = win.hi - win.lo;
  const double dx = L / static_cast<double>(N);
  const double h_target = m.y_max() / p.y_points;
  const auto r = static_cast<std::size_t>(std::max(1.0, std::ceil(dx / h_target)));
  const double h = dx / static_cast<double>(r);
  const auto phi = characteristic_lattice(m, h, r * N, N / 2);

  const auto& s = m.singular;
  const bool subtract = win.lo == 0.0;
  const double c2 = 2.0 * m.c;
  const double A2 = s.K * std::tgamma(s.beta + 1.0) / std::pow(c2, s.beta + 1.0);
  const double shape2 = n * (s.beta + 1.0);

  std::vector<std::complex<double>> X(N / 2 + 1);
  double phase = 0.0, prev_arg = 0.0;
  const double shift = win.lo + 0.5 * dx;
  for (std::size_t j = 0; j < N / 2; ++j) {
    const double u = 2.0 * kPi * static_cast<double>(j) / L;
    const double a = std::arg(phi[j]);
    if (j > 0) {
      double d = a - prev_arg;
      d -= 2.0 * kPi * std::round(d / (2.0 * kPi));
      phase += d;
    } else {
      phase = a;
    }
    prev_arg = a;
    const double logmod = n * std::log(std::abs(phi[j]));
    std::complex<double> val = std::polar(std::exp(logmod), n * phase);
    if (subtract) {
      const double mod2 = n * (std::log(A2) - 0.5 * (s.beta + 1.0) * std::log1p((u / c2) * (u / c2)));
      val -= std::polar(std::exp(mod2), shape2 * std::atan(u / c2));
    }
    X[j] = std::conj(val * std::polar(1.0, -u * shift));
  }
  X[N / 2] = 0.0;
  auto reg = fft::hermitian_to_real(X, N);

  std::optional<GammaComponent> analytic;
  if (subtract) analytic = GammaComponent{std::pow(A2, n), shape2, c2};
  double clipped = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    reg[k] /= L;
    const double floor = analytic ? -analytic->pdf(win.lo + (k + 0.5) * dx) : 0.0;
    if (reg[k] < floor) {
      clipped += (floor - reg[k]) * dx;
      reg[k] = floor;
    }
  }
  if (clipped > p.max_clip) {
    throw ConvergenceError("w_fft: clipping removed L1 mass " + std::to_string(clipped) +
                           "; raise min_points or y_points");
  }
  DensityGrid g = DensityGrid(win.lo, dx, std::move(reg), GridLayout::cells, analytic).normalized();
  g.defect = clipped;
  return g;
}

enum class DensitySource { automatic, exact, fft };

/// w_n behind one interface: an exact Gamma law or an FFT grid.
class SumDensity {
 public:
  static SumDensity make(const GibbsModel& m, int n, DensitySource src = DensitySource::automatic,
                         const SumGridParams& p = {}) {
    SumDensity d;
    d.n_ = n;
    d.mean_ = n * m.mu;
    d.sd_ = std::sqrt(n * m.sigma2);
    const bool exact = src == DensitySource::exact ||
                       (src == DensitySource::automatic && m.spec.has_closed_wn());
    if (exact) {
      d.law_ = gamma_law(m, n);
    } else {
      d.grid_ = w_fft(m, n, p);
    }
    return d;
  }

  int n() const { return n_; }
  bool is_exact() const { return law_.has_value(); }
  const std::optional<GammaComponent>& law() const { return law_; }
  const std::optional<DensityGrid>& grid() const { return grid_; }
  double mean() const { return mean_; }
  double sd() const { return sd_; }
  double support_lo() const { return law_ ? 0.0 : grid_->lo(); }
  double support_hi() const { return law_ ? kInfinity : grid_->hi(); }

  double log_pdf(double s) const {
    if (law_) return law_->log_pdf(s);
    return grid_->log_evaluate(s);
  }
  double pdf(double s) const { return law_ ? law_->pdf(s) : grid_->evaluate(s); }
  /// P(R_n <= s)
  double cdf(double s) const { return law_ ? law_->cdf(s) : grid_->cdf(s); }

  /// sup_s log w_n(s)
  double log_max() const {
    if (law_) {
      if (law_->shape < 1.0) return kInfinity;
      return law_->log_pdf((law_->shape - 1.0) / law_->rate);
    }
    double best = -kInfinity;
    for (std::size_t i = 0; i < grid_->size(); ++i) {
      best = std::max(best, grid_->log_evaluate(grid_->position(i)));
    }
    return best;
  }

 private:
  int n_ = 0;
  double mean_ = 0.0;
  double sd_ = 0.0;
  std::optional<GammaComponent> law_;
  std::optional<DensityGrid> grid_;
};

/// sup_x |f_n(x) - phi(x)| over the given abscissae, where f_n is a
/// standardized density supplied by the caller.
inline double sup_deviation_from_normal(const std::function<double(double)>& standardized,
                                        const std::vector<double>& xs) {
  double sup = 0.0;
  for (double x : xs) sup = std::max(sup, std::abs(standardized(x) - standard_normal_pdf(x)));
  return sup;
}

struct LocalCltReport {
  std::vector<int> n_list;
  std::vector<double> sup_dev;
  std::vector<double> scaled_dev;  // sqrt(2 pi n) * sup_dev
  double C_hat = 0.0;
  double nu = 0.0;
  double I = 0.0;
  int r = 0;
};

/// Standardizes w_fft for each n and records the sup deviation from the
/// normal density, over the grid nodes and the left support edge (the
/// standardized density vanishes to the left of -n mu / sd).
inline LocalCltReport local_clt_scan(const GibbsModel& m, const std::vector<int>& n_list,
                                     const SumGridParams& p = {}) {
  const auto pre = clt_prerequisites(m, {1, 2, 3, 4, 5, 6});
  for (int n : n_list) {
    if (n < pre.r_used) {
      throw PreconditionError("local_clt_scan: n = " + std::to_string(n) + " is below r = " +
                              std::to_string(pre.r_used));
    }
  }
  LocalCltReport rep;
  rep.n_list = n_list;
  rep.nu = pre.nu;
  rep.I = pre.I;
  rep.r = pre.r_used;
  rep.sup_dev.resize(n_list.size());
  rep.scaled_dev.resize(n_list.size());
  parallel_for(n_list.size(), [&](std::size_t i) {
    const int n = n_list[i];
    const auto w = w_fft(m, n, p);
    const double mean = n * m.mu, sd = std::sqrt(n * m.sigma2);
    std::vector<double> xs(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) xs[k] = (w.position(k) - mean) / sd;
    double sup = sup_deviation_from_normal([&](double x) { return sd * w.evaluate(mean + x * sd); }, xs);
    if (w.lo() == 0.0) sup = std::max(sup, standard_normal_pdf(-mean / sd));
    rep.sup_dev[i] = sup;
    rep.scaled_dev[i] = std::sqrt(2.0 * kPi * n) * sup;
  });
  for (double v : rep.scaled_dev) rep.C_hat = std::max(rep.C_hat, v);
  return rep;
}

struct RatioBoundReport {
  int n = 0;
  int k = 0;
  double C = 0.0;
  double lhs = 0.0;  // sup_z log w_{n-k}(z) - log w_n(n mu)
  double rhs = 0.0;  // log(n/(n-k)) + 2/(sqrt(n)/C - 1)
  bool applicable = false;  // sqrt(n)/C > 1
  bool pass = false;
};

inline RatioBoundReport log_ratio_bound_check(const GibbsModel& m, int n, int k, double C,
                                              DensitySource src = DensitySource::automatic,
                                              const SumGridParams& p = {}) {
  if (!(k >= 0 && k < n)) throw PreconditionError("log_ratio_bound_check needs 0 <= k < n");
  RatioBoundReport r;
  r.n = n;
  r.k = k;
  r.C = C;
  const auto wn = SumDensity::make(m, n, src, p);
  const auto wnk = k == 0 ? wn : SumDensity::make(m, n - k, src, p);
  r.lhs = wnk.log_max() - wn.log_pdf(n * m.mu);
  r.applicable = std::sqrt(static_cast<double>(n)) / C > 1.0;
  if (!r.applicable) {
    r.rhs = kInfinity;
    return r;
  }
  r.rhs = std::log(static_cast<double>(n) / (n - k)) + 2.0 / (std::sqrt(static_cast<double>(n)) / C - 1.0);
  r.pass = r.lhs <= r.rhs;
  return r;
}

/// P(|R_n / n - t| <= delta) under the Gibbs product measure.
inline double shell_probability(const GibbsModel& m, int n, double t, double delta,
                                DensitySource src = DensitySource::automatic,
                                const SumGridParams& p = {}) {
  const auto w = SumDensity::make(m, n, src, p);
  return w.cdf(n * (t + delta)) - w.cdf(std::max(0.0, n * (t - delta)));
}

/// max |a - b| / max |b| over the nodes of b lying in [lo, hi].
inline double relative_sup_error(const std::function<double(double)>& a, const DensityGrid& b,
                                 double lo, double hi) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double x = b.position(i);
    if (x < lo || x > hi) continue;
    const double bv = b.evaluate(x);
    num = std::max(num, std::abs(a(x) - bv));
    den = std::max(den, std::abs(bv));
  }
  if (den == 0.0) throw PreconditionError("relative_sup_error: reference vanishes on the window");
  return num / den;
}

}  // namespace thinshell
