#pragma once

// One-site Gibbs model g_{1,c} = exp(-c f) / Z_c: partition function and
// moments of Y = f(X), the energy-matching solve for c, the density and
// characteristic function of Y, and entropy bookkeeping.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <boost/math/special_functions/zeta.hpp>
#include <boost/math/tools/roots.hpp>

#include "thinshell/density_grid.hpp"
#include "thinshell/fft.hpp"
#include "thinshell/hamiltonian.hpp"
#include "thinshell/numeric.hpp"

namespace thinshell {

struct QuadratureRecord {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  double x_max = 0.0;       // integrals over F are cut at |x| = x_max
  double tail_bound = 0.0;  // analytic bound on the discarded mass, relative to Z
};

/// Local model g_Y(y) ~ K y^beta exp(-c y) near y = 0, with
/// beta = 1/p0 - 1 for f ~ a x^p0 at the origin. A is its total mass.
struct SingularModel {
  double p0 = 1.0;
  double beta = 0.0;
  double K = 0.0;
  double A = 0.0;
  // leading term K2 y^gamma of the bounded remainder; K2 = 0 when absent
  double gamma = 0.0;
  double K2 = 0.0;
};

struct Moments {
  double mu = 0.0;
  double sigma2 = 0.0;
  double m3 = 0.0;
};

struct GibbsModel {
  HamiltonianSpec spec = HamiltonianSpec::quadratic();
  double c = 1.0;
  double Z = 1.0;
  double mu = 0.0;
  double sigma2 = 0.0;
  double m3 = 0.0;
  QuadratureRecord quad;
  SingularModel singular;

  double multiplicity() const { return spec.support() == Support::symmetric ? 2.0 : 1.0; }
  double y_max() const { return spec.evaluate(quad.x_max); }
  /// g_{1,c}(x)
  double density(double x) const {
    const double f = spec.evaluate(x);
    return std::isinf(f) ? 0.0 : std::exp(-c * f) / Z;
  }
};

namespace detail {

inline QuadratureRecord truncation(const HamiltonianSpec& spec, double c) {
  const auto tail = spec.tail_witness();
  if (!tail) throw PreconditionError("no tail-slope witness: f is outside the admissible class");
  const double x_s = spec.inverse(1.0 / c);
  const double z_lower = x_s * std::exp(-1.0);
  QuadratureRecord q;
  double level = 40.0 / c;
  for (int it = 0; it < 200; ++it) {
    const double x = std::max(spec.inverse(level), tail->a2);
    const double bound = std::exp(-c * spec.evaluate(x)) / (c * tail->a1);
    if (bound < 1e-14 * z_lower) {
      q.x_max = x;
      q.tail_bound = bound / z_lower;
      return q;
    }
    level *= 1.5;
  }
  throw ConvergenceError("could not place the truncation point for Z");
}

/// Breakpoints on [0, x_max] at a few energy levels so each piece is tame.
inline std::vector<double> x_breaks(const HamiltonianSpec& spec, double c, double x_max,
                                    std::initializer_list<double> extra_levels = {}) {
  std::vector<double> b = {0.0, x_max};
  for (double lv : {0.25, 1.0, 4.0, 10.0, 20.0}) {
    const double x = spec.inverse(lv / c);
    if (x < x_max) b.push_back(x);
  }
  for (double lv : extra_levels) {
    if (lv > 0.0) {
      const double x = spec.inverse(lv);
      if (x > 0.0 && x < x_max) b.push_back(x);
    }
  }
  return b;
}

/// mult * integral_0^{x_max} h(f(x)) exp(-c f(x)) dx
template <class H>
double energy_integral(const HamiltonianSpec& spec, double c, double x_max, H&& h,
                       std::initializer_list<double> extra_levels = {}) {
  const double mult = spec.support() == Support::symmetric ? 2.0 : 1.0;
  auto integrand = [&](double x) {
    const double f = spec.evaluate(x);
    return h(f) * std::exp(-c * f);
  };
  return mult * integrate_piecewise(integrand, x_breaks(spec, c, x_max, extra_levels));
}

inline double closed_Z(const HamiltonianSpec& spec, double c) {
  if (spec.kind() == HamiltonianKind::quadratic) return std::sqrt(kPi / c);
  return 1.0 / c;
}

}  // namespace detail

/// Z_c by quadrature, even when a closed form exists.
inline double partition_function_quadrature(const HamiltonianSpec& spec, double c) {
  if (!(c > 0.0)) throw PreconditionError("c must be positive");
  const auto q = detail::truncation(spec, c);
  return detail::energy_integral(spec, c, q.x_max, [](double) { return 1.0; });
}

inline double partition_function(const HamiltonianSpec& spec, double c) {
  if (!(c > 0.0)) throw PreconditionError("c must be positive");
  if (spec.has_closed_Z()) return detail::closed_Z(spec, c);
  return partition_function_quadrature(spec, c);
}

/// E f(X) under g_{1,c}; the cheap path used by the energy solver.
inline double mean_energy(const HamiltonianSpec& spec, double c) {
  if (spec.kind() == HamiltonianKind::quadratic) return 0.5 / c;
  if (spec.kind() == HamiltonianKind::linear_half) return 1.0 / c;
  const auto q = detail::truncation(spec, c);
  const double z = detail::energy_integral(spec, c, q.x_max, [](double) { return 1.0; });
  return detail::energy_integral(spec, c, q.x_max, [](double f) { return f; }) / z;
}

inline Moments moments(const HamiltonianSpec& spec, double c) {
  if (!(c > 0.0)) throw PreconditionError("c must be positive");
  const auto q = detail::truncation(spec, c);
  const double z = partition_function(spec, c);
  Moments m;
  m.mu = detail::energy_integral(spec, c, q.x_max, [](double f) { return f; }) / z;
  const double mu = m.mu;
  m.sigma2 = detail::energy_integral(
                 spec, c, q.x_max, [mu](double f) { return (f - mu) * (f - mu); }, {mu}) /
             z;
  m.m3 = detail::energy_integral(
             spec, c, q.x_max, [mu](double f) { return std::pow(std::abs(f - mu), 3.0); }, {mu}) /
         z;
  if (spec.kind() == HamiltonianKind::quadratic) {
    m.mu = 0.5 / c;
    m.sigma2 = 0.5 / (c * c);
  } else if (spec.kind() == HamiltonianKind::linear_half) {
    m.mu = 1.0 / c;
    m.sigma2 = 1.0 / (c * c);
  }
  return m;
}

double y_density_at(const GibbsModel& m, double y);
double y_remainder_at(const GibbsModel& m, double y);

inline GibbsModel make_model(const HamiltonianSpec& spec, double c) {
  if (!(c > 0.0)) throw PreconditionError("c must be positive");
  GibbsModel m;
  m.spec = spec;
  m.c = c;
  m.quad = detail::truncation(spec, c);
  m.Z = partition_function(spec, c);
  const auto mom = moments(spec, c);
  m.mu = mom.mu;
  m.sigma2 = mom.sigma2;
  m.m3 = mom.m3;
  if (!(m.Z > 0.0) || !(m.sigma2 > 0.0) || !std::isfinite(m.m3)) {
    throw ConvergenceError("Gibbs model has non-finite moments");
  }

  // K is the y -> 0 limit of g_Y(y) / (y^beta e^{-cy}), read off at a tiny x.
  auto& s = m.singular;
  s.p0 = origin_power(spec);
  s.beta = 1.0 / s.p0 - 1.0;
  const double x_s = 1e-6;
  const double y_s = spec.evaluate(x_s);
  s.K = m.multiplicity() / (m.Z * spec.derivative(x_s) * std::pow(y_s, s.beta));
  s.A = s.K * std::tgamma(s.beta + 1.0) / std::pow(c, s.beta + 1.0);

  // Fit r(y) ~ K2 y^gamma on three tiny y; kept only when the two local
  // exponents agree, so pure power laws and odd customs get no correction.
  double r[3], ys[3];
  for (int i = 0; i < 3; ++i) {
    ys[i] = 1e-6 * std::pow(4.0, i);
    r[i] = y_remainder_at(m, ys[i]);
  }
  if (r[0] != 0.0 && r[0] * r[1] > 0.0 && r[1] * r[2] > 0.0) {
    const double g1 = std::log(r[1] / r[0]) / std::log(4.0);
    const double g2 = std::log(r[2] / r[1]) / std::log(4.0);
    if (g1 > 0.0 && std::abs(g1 - g2) < 1e-3) {
      s.gamma = std::round(g2 * 1e3) / 1e3;
      s.K2 = r[2] / std::pow(ys[2], s.gamma);
    }
  }
  return m;
}

/// The unique c with E_{g_{1,c}} f = t.
inline GibbsModel solve_energy(const HamiltonianSpec& spec, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw PreconditionError("t must be positive");
  auto g = [&](double logc) { return mean_energy(spec, std::exp(logc)) - t; };
  double lo = 0.0, hi = 0.0;
  const double g0 = g(0.0);
  if (g0 == 0.0) return make_model(spec, 1.0);
  const double step = g0 > 0.0 ? std::log(2.0) : -std::log(2.0);
  double prev = 0.0;
  bool found = false;
  for (int i = 1; i <= 100; ++i) {
    const double next = step * i;
    if ((g(next) > 0.0) != (g0 > 0.0)) {
      lo = std::min(prev, next);
      hi = std::max(prev, next);
      found = true;
      break;
    }
    prev = next;
  }
  if (!found) {
    throw ConvergenceError("energy bracket expansion failed: t is not attainable for this f");
  }
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(
      g, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  auto model = make_model(spec, std::exp(0.5 * (root.first + root.second)));
  if (std::abs(model.mu - t) > 1e-10 * t) {
    throw ConvergenceError("energy solve missed the relative tolerance 1e-10");
  }
  return model;
}

/// Density of Y = f(X) at y > 0.
inline double y_density_at(const GibbsModel& m, double y) {
  if (!(y > 0.0)) return y == 0.0 && m.singular.beta == 0.0 ? m.singular.K : 0.0;
  const double x = m.spec.inverse(y);
  return m.multiplicity() * std::exp(-m.c * y) / (m.Z * m.spec.derivative(x));
}

/// g_Y minus its singular local model; bounded, and zero at y = 0.
inline double y_remainder_at(const GibbsModel& m, double y) {
  if (!(y > 0.0)) return 0.0;
  const auto& s = m.singular;
  return y_density_at(m, y) - s.K * std::pow(y, s.beta) * std::exp(-m.c * y);
}

inline GammaComponent singular_component(const GibbsModel& m) {
  return GammaComponent{m.singular.A, m.singular.beta + 1.0, m.c};
}

struct YGridParams {
  std::size_t intervals = std::size_t{1} << 20;
};

/// g_Y on [0, y_max]: the singular model is kept analytic and the bounded
/// remainder is tabulated on nodes.
inline DensityGrid y_density(const GibbsModel& m, const YGridParams& grid = {}) {
  if (grid.intervals < 16) throw PreconditionError("y grid needs at least 16 intervals");
  const double y_max = m.y_max();
  const double h = y_max / static_cast<double>(grid.intervals);
  std::vector<double> rem(grid.intervals + 1);
  parallel_for(rem.size(), [&](std::size_t i) { rem[i] = y_remainder_at(m, h * i); });
  DensityGrid g(0.0, h, std::move(rem), GridLayout::nodes, singular_component(m));
  g.defect = g.mass() - 1.0;
  return g;
}

namespace detail {

/// Filon weights for a piecewise-linear integrand: W for interior nodes and
/// the half-hat integral E for the left end (its conjugate for the right).
inline double filon_interior(double theta) {
  const double t2 = theta * theta;
  if (std::abs(theta) < 1e-2) return 1.0 - t2 / 12.0 + t2 * t2 / 360.0;
  return 2.0 * (1.0 - std::cos(theta)) / t2;
}

inline std::complex<double> filon_left(double theta) {
  const double t2 = theta * theta;
  if (std::abs(theta) < 1e-2) {
    return {0.5 - t2 / 24.0 + t2 * t2 / 720.0, theta / 6.0 - theta * t2 / 120.0};
  }
  return {(1.0 - std::cos(theta)) / t2, (theta - std::sin(theta)) / t2};
}

/// Missing piece of a trapezoid-type sum of the remainder at y = 0, from the
/// generalized Euler-Maclaurin expansion for K2 y^gamma.
inline double remainder_endpoint_error(const GibbsModel& m, double h) {
  const auto& s = m.singular;
  if (s.K2 == 0.0) return 0.0;
  return boost::math::zeta(-s.gamma) * s.K2 * std::pow(h, s.gamma + 1.0);
}

inline std::complex<double> model_cf(const GibbsModel& m, double u) {
  const auto& s = m.singular;
  return s.A * std::exp(-(s.beta + 1.0) * std::log(std::complex<double>(1.0, -u / m.c)));
}

}  // namespace detail

/// phi(u) = E exp(i u Y): the analytic singular model plus a Filon sum of
/// the tabulated remainder.
class CharacteristicFunction {
 public:
  explicit CharacteristicFunction(const GibbsModel& m, const YGridParams& grid = {})
      : model_(m), h_(m.y_max() / static_cast<double>(grid.intervals)), rem_(grid.intervals + 1) {
    parallel_for(rem_.size(), [&](std::size_t i) { rem_[i] = y_remainder_at(m, h_ * i); });
  }

  double nyquist() const { return kPi / h_; }

  std::complex<double> operator()(double u) const {
    if (std::abs(u) > nyquist()) {
      throw ConvergenceError("characteristic function requested beyond the y-grid Nyquist frequency");
    }
    const double theta = u * h_;
    const double w = detail::filon_interior(theta);
    std::complex<double> acc = 0.0;
    const std::complex<double> step = std::polar(1.0, theta);
    std::complex<double> e = 1.0;
    for (std::size_t i = 0; i < rem_.size(); ++i) {
      acc += rem_[i] * e;
      e *= step;
      if ((i & 1023u) == 1023u) e = std::polar(1.0, theta * static_cast<double>(i + 1));
    }
    const std::size_t last = rem_.size() - 1;
    const std::complex<double> el = detail::filon_left(theta);
    const std::complex<double> e_last = std::polar(1.0, u * h_ * static_cast<double>(last));
    std::complex<double> out = w * acc + rem_[0] * (el - w) + rem_[last] * e_last * (std::conj(el) - w);
    return detail::model_cf(model_, u) + h_ * out - detail::remainder_endpoint_error(model_, h_);
  }

 private:
  GibbsModel model_;
  double h_;
  std::vector<double> rem_;
};

inline std::complex<double> characteristic_function(const GibbsModel& m, double u) {
  return CharacteristicFunction(m)(u);
}

/// phi(2 pi j / (M h)) for j = 0..j_max from remainder nodes at spacing h,
/// with one length-M real FFT. Nodes past M are folded, which is exact on
/// this frequency lattice.
inline std::vector<std::complex<double>> characteristic_lattice(const GibbsModel& m, double h,
                                                                std::size_t M, std::size_t j_max) {
  if (j_max > M / 2) throw PreconditionError("lattice index beyond the FFT Nyquist bin");
  const auto nodes = static_cast<std::size_t>(std::ceil(m.y_max() / h));
  std::vector<double> rem(nodes + 1);
  parallel_for(rem.size(), [&](std::size_t i) { rem[i] = y_remainder_at(m, h * i); });
  std::vector<double> folded(M, 0.0);
  for (std::size_t i = 0; i < rem.size(); ++i) folded[i % M] += rem[i];
  const auto spec = fft::real_forward(folded);
  const double L = h * static_cast<double>(M);
  const double y_last = h * static_cast<double>(nodes);
  const double endpoint = detail::remainder_endpoint_error(m, h);
  std::vector<std::complex<double>> out(j_max + 1);
  for (std::size_t j = 0; j <= j_max; ++j) {
    const double u = 2.0 * kPi * static_cast<double>(j) / L;
    const double theta = u * h;
    const double w = detail::filon_interior(theta);
    const std::complex<double> el = detail::filon_left(theta);
    const std::complex<double> acc = std::conj(spec[j]);
    const std::complex<double> corr =
        rem[0] * (el - w) + rem[nodes] * std::polar(1.0, u * y_last) * (std::conj(el) - w);
    out[j] = detail::model_cf(m, u) + h * (w * acc + corr) - endpoint;
  }
  return out;
}

struct CltPrerequisites {
  double I = 0.0;         // integral of |phi|^r over the real line
  int r_used = 0;
  double nu = 0.0;        // sup |phi(u)| over u > sigma2 / m3
  double nu_from = 0.0;   // sigma2 / m3
  double cutoff = 0.0;    // the sup for nu is read on (nu_from, cutoff]
  double tail_modulus = 0.0;  // |phi(cutoff)|; |phi| decays monotonically past it
};

/// Smallest r in r_grid for which the integral of |phi|^r stabilizes, with
/// that integral and nu.
inline CltPrerequisites clt_prerequisites(const GibbsModel& m, const std::vector<int>& r_grid) {
  const double y_max = m.y_max();
  const std::size_t nodes = std::size_t{1} << 16;
  const double h = y_max / static_cast<double>(nodes);
  const std::size_t M = 2 * nodes;
  const auto phi = characteristic_lattice(m, h, M, M / 2);
  const double du = 2.0 * kPi / (h * static_cast<double>(M));
  const double U0 = du * static_cast<double>(M / 2);
  std::vector<double> mod(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) mod[j] = std::min(1.0, std::abs(phi[j]));

  CltPrerequisites out;
  out.nu_from = m.sigma2 / m.m3;
  out.cutoff = U0;
  out.tail_modulus = mod.back();
  for (std::size_t j = 0; j < mod.size(); ++j) {
    if (du * static_cast<double>(j) > out.nu_from) out.nu = std::max(out.nu, mod[j]);
  }

  const auto& s = m.singular;
  for (int r : r_grid) {
    if (r < 1) continue;
    double head = 0.0;
    for (std::size_t j = 0; j < mod.size(); ++j) {
      const double w = (j == 0 || j + 1 == mod.size()) ? 0.5 : 1.0;
      head += w * std::pow(mod[j], r);
    }
    head *= du;
    // Past U0 only the singular model survives; integrate it in log u.
    const double expo = 0.5 * r * (s.beta + 1.0);
    auto tail = [&](double U) {
      auto g = [&](double tau) {
        const double u = std::exp(tau);
        return u * std::pow(s.A, r) * std::pow(1.0 + (u / m.c) * (u / m.c), -expo);
      };
      return integrate(g, std::log(U0), std::log(U), {1e-14, 1e-12, 30}).value;
    };
    double U = U0 * 8.0;
    double prev = 2.0 * (head + tail(U));
    bool converged = false;
    for (int it = 0; it < 40 && U < 1e30; ++it) {
      U *= 8.0;
      const double cur = 2.0 * (head + tail(U));
      if (std::abs(cur - prev) <= 1e-6 * std::abs(cur)) {
        out.I = cur;
        out.r_used = r;
        converged = true;
        break;
      }
      prev = cur;
    }
    if (converged) return out;
  }
  throw ConvergenceError("no r in the grid makes the integral of |phi|^r converge");
}

struct EntropyEnergy {
  double h = 0.0;
  double energy = 0.0;
};

/// h(g_{1,c}) = c mu + log Z.
inline EntropyEnergy entropy_energy(const GibbsModel& m) { return {m.c * m.mu + std::log(m.Z), m.mu}; }

/// Trapezoidal entropy and energy of a node-layout x-space density.
inline EntropyEnergy entropy_energy(const HamiltonianSpec& spec, const DensityGrid& q) {
  if (std::abs(q.mass() - 1.0) > 1e-4) {
    throw PreconditionError("entropy_energy: density is not normalized (mass " +
                            std::to_string(q.mass()) + ")");
  }
  EntropyEnergy out;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double w = (q.layout() == GridLayout::nodes && (i == 0 || i + 1 == q.size())) ? 0.5 : 1.0;
    const double v = q.values()[i];
    if (v > 0.0) out.h -= w * q.dx() * v * std::log(v);
    out.energy += w * q.dx() * v * spec.evaluate(q.position(i));
  }
  return out;
}

/// g_{1,c} sampled on nodes over [-x_max, x_max] or [0, x_max].
inline DensityGrid x_density(const GibbsModel& m, std::size_t intervals = 1 << 16) {
  const double lo = m.spec.support() == Support::symmetric ? -m.quad.x_max : 0.0;
  const double dx = (m.quad.x_max - lo) / static_cast<double>(intervals);
  std::vector<double> v(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) v[i] = m.density(lo + dx * i);
  return DensityGrid(lo, dx, std::move(v));
}

/// Trapezoidal D(q || g_{1,c}) for a node-layout x-space density.
inline double kl(const DensityGrid& q, const GibbsModel& g) {
  double d = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double v = q.values()[i];
    if (!(v > 0.0)) continue;
    const double w = (i == 0 || i + 1 == q.size()) ? 0.5 : 1.0;
    const double x = q.position(i);
    const double log_g = -g.c * g.spec.evaluate(x) - std::log(g.Z);
    d += w * q.dx() * v * (std::log(v) - log_g);
  }
  return d;
}

struct MaxEntropyCheck {
  double b = 0.0;         // tilt strength in exp(-a f - b f^2)
  double a = 0.0;         // energy-matching coefficient
  double energy_q = 0.0;
  double h_q = 0.0;
  double h_g = 0.0;
  double kl = 0.0;        // D(q || g)
  bool passed = false;    // h_q <= h_g and |kl - (h_g - h_q)| <= tol
};

/// Builds q proportional to exp(-a f - b f^2) on the x-grid, solves a so that
/// E_q f matches mu, and compares D(q || g) with h(g) - h(q).
inline MaxEntropyCheck max_entropy_check(const GibbsModel& m, double b, double tol = 1e-6,
                                         std::size_t intervals = 1 << 16) {
  if (!(b >= 0.0)) throw PreconditionError("tilt strength must be nonnegative");
  const DensityGrid base = x_density(m, intervals);
  std::vector<double> f(base.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = m.spec.evaluate(base.position(i));
  auto build = [&](double a) {
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) v[i] = std::exp(-a * f[i] - b * f[i] * f[i]);
    return DensityGrid(base.lo(), base.dx(), std::move(v)).normalized();
  };
  auto energy = [&](double a) { return entropy_energy(m.spec, build(a)).energy; };
  // Energy decreases in a; bracket around c.
  double lo = -m.c, hi = m.c;
  while (energy(lo) < m.mu) lo -= 2.0 * m.c;
  while (energy(hi) > m.mu) hi += 2.0 * m.c;
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(
      [&](double a) { return energy(a) - m.mu; }, lo, hi,
      boost::math::tools::eps_tolerance<double>(52), iters);
  MaxEntropyCheck out;
  out.b = b;
  out.a = 0.5 * (root.first + root.second);
  const DensityGrid q = build(out.a);
  const auto eq = entropy_energy(m.spec, q);
  out.energy_q = eq.energy;
  out.h_q = eq.h;
  out.h_g = entropy_energy(m).h;
  out.kl = kl(q, m);
  out.passed = out.h_q <= out.h_g + tol && std::abs(out.kl - (out.h_g - out.h_q)) <= tol;
  return out;
}

}  // namespace thinshell
