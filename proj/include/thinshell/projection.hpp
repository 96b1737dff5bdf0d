#pragma once

// Projected surface densities p_{n,k,t} and their divergences from g_k.
// Everything is reduced to one dimension through s = R_k(y): the
// likelihood ratio p / g_k equals w_{n-k}(nt - s) / w_n(nt), so the law of
// R_k under p, r_k(s) = w_k(s) w_{n-k}(nt - s) / w_n(nt), carries all the
// information.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "thinshell/density_grid.hpp"
#include "thinshell/gibbs.hpp"
#include "thinshell/numeric.hpp"
#include "thinshell/sum_density.hpp"

namespace thinshell {

class ProjectionContext {
 public:
  /// `r_used` is only enforced when given, i.e. when the caller relies on
  /// the local-CLT machinery (FFT densities or bound checks).
  static ProjectionContext make(const GibbsModel& model, int n, int k,
                                DensitySource src = DensitySource::automatic,
                                const SumGridParams& params = {},
                                std::optional<int> r_used = std::nullopt) {
    if (!(k >= 1 && k < n)) throw PreconditionError("projection needs 1 <= k < n");
    if (r_used && n - k < *r_used) {
      throw PreconditionError("n - k = " + std::to_string(n - k) + " is below r = " +
                              std::to_string(*r_used));
    }
    ProjectionContext ctx;
    ctx.model_ = model;
    ctx.n_ = n;
    ctx.k_ = k;
    ctx.t_ = model.mu;
    ctx.src_ = src;
    ctx.wn_ = SumDensity::make(model, n, src, params);
    ctx.wk_ = SumDensity::make(model, k, src, params);
    ctx.wnk_ = SumDensity::make(model, n - k, src, params);
    ctx.log_wn_nt_ = ctx.wn_.log_pdf(n * ctx.t_);
    if (!std::isfinite(ctx.log_wn_nt_)) throw ConvergenceError("w_n(nt) is not positive");
    return ctx;
  }

  const GibbsModel& model() const { return model_; }
  int n() const { return n_; }
  int k() const { return k_; }
  double t() const { return t_; }
  double nt() const { return n_ * t_; }
  const SumDensity& wn() const { return wn_; }
  const SumDensity& wk() const { return wk_; }
  const SumDensity& wnk() const { return wnk_; }
  double log_wn_nt() const { return log_wn_nt_; }

  /// log of p/g_k at R_k = s: log w_{n-k}(nt - s) - log w_n(nt).
  double log_ratio(double s) const {
    if (!(s < nt())) return -kInfinity;
    return wnk_.log_pdf(nt() - s) - log_wn_nt_;
  }

  QuadratureOptions quadrature() const {
    // Interpolated FFT grids are only piecewise smooth.
    if (wn_.is_exact() && wk_.is_exact() && wnk_.is_exact()) return {};
    return {1e-9, 1e-6, 16};
  }

  /// Breakpoints on [0, nt] that separate the region carrying w_k's mass
  /// and every zero of `g` found on a scan.
  std::vector<double> breaks(const std::function<double(double)>& g) const {
    const double a = 0.0, b = nt();
    std::vector<double> out = {a, b};
    const double m = wk_.mean(), sd = wk_.sd();
    for (double j : {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
      const double x = m + j * sd;
      if (x > a && x < b) out.push_back(x);
    }
    // On an FFT grid with a singular analytic part, the first piece must
    // stay inside one cell so the endpoint rule sees no kinks; pieces then
    // grow geometrically away from the singularity.
    if (const auto& g0 = wk_.grid(); g0 && g0->analytic() && g0->lo() <= a) {
      const double stop = std::min(b, std::max(m - 8.0 * sd, 2.0 * sd));
      for (double x = 0.5 * g0->dx(); x < stop; x *= 4.0) out.push_back(x);
    }
    // Interpolated grids are smooth only between their nodes.
    if (const auto& gk = wk_.grid()) {
      for (std::size_t i = 0; i < gk->size(); ++i) {
        const double x = gk->position(i);
        if (x > a && x < b) out.push_back(x);
      }
    }
    if (const auto& gr = wnk_.grid()) {
      for (std::size_t i = 0; i < gr->size(); ++i) {
        const double x = b - gr->position(i);
        if (x > a && x < b) out.push_back(x);
      }
    }
    // A coarse scan of the whole range plus a fine one over w_k's bulk,
    // where pairs of nearby zeros are common.
    const std::size_t scan = 4000;
    std::vector<double> xs;
    xs.reserve(2 * scan + 2);
    for (std::size_t i = 0; i <= scan; ++i) {
      xs.push_back(a + (b - a) * static_cast<double>(i) / scan);
    }
    const double lo = std::max(a, m - 8.0 * sd), hi = std::min(b, m + 32.0 * sd);
    for (std::size_t i = 0; hi > lo && i <= scan; ++i) {
      xs.push_back(lo + (hi - lo) * static_cast<double>(i) / scan);
    }
    std::sort(xs.begin(), xs.end());
    xs.front() = a + (b - a) * 1e-9;
    xs.back() = b - (b - a) * 1e-9;
    double prev_x = xs.front();
    double prev = g(prev_x);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double x = xs[i];
      if (!(x > prev_x)) continue;
      const double v = g(x);
      if (std::isfinite(prev) && std::isfinite(v) && (prev > 0.0) != (v > 0.0)) {
        std::uintmax_t it = 200;
        const auto r = boost::math::tools::toms748_solve(
            g, prev_x, x, prev, v, boost::math::tools::eps_tolerance<double>(48), it);
        out.push_back(0.5 * (r.first + r.second));
      }
      prev_x = x;
      prev = v;
    }
    return out;
  }

 private:
  GibbsModel model_;
  int n_ = 0;
  int k_ = 0;
  double t_ = 0.0;
  DensitySource src_ = DensitySource::automatic;
  SumDensity wn_, wk_, wnk_;
  double log_wn_nt_ = 0.0;
};

namespace detail {

/// integral over [0, nt] of `fn` split at the context's breakpoints.
template <class F>
double integrate_s(const ProjectionContext& ctx, F&& fn, const std::function<double(double)>& crossing) {
  return integrate_piecewise(fn, ctx.breaks(crossing), ctx.quadrature());
}

inline double log_wk(const ProjectionContext& ctx, double s) { return ctx.wk().log_pdf(s); }

}  // namespace detail

struct ConditionalDensity {
  DensityGrid grid;     // r_k on [0, nt], cells layout, unit grid mass
  double defect = 0.0;  // |integral of r_k - 1| by quadrature
};

/// r_k(s) = w_k(s) w_{n-k}(nt - s) / w_n(nt), the law of R_k given R_n = nt.
inline ConditionalDensity rk_conditional_density(const ProjectionContext& ctx,
                                                 std::size_t cells = 4096) {
  auto rk = [&](double s) { return std::exp(detail::log_wk(ctx, s) + ctx.log_ratio(s)); };
  const double mass =
      detail::integrate_s(ctx, rk, [&](double s) { return ctx.log_ratio(s); });
  ConditionalDensity out;
  out.defect = std::abs(mass - 1.0);
  if (!(out.defect < 1e-4)) {
    throw ConvergenceError("r_k normalization defect " + std::to_string(out.defect) +
                           " exceeds 1e-4; refine the w grids");
  }
  const double dx = ctx.nt() / static_cast<double>(cells);
  std::vector<double> v(cells);
  for (std::size_t i = 0; i < cells; ++i) v[i] = rk((i + 0.5) * dx);
  out.grid = DensityGrid(0.0, dx, std::move(v), GridLayout::cells).normalized();
  out.grid.defect = out.defect;
  return out;
}

/// E[R_k] under r_k; equals k t by exchangeability.
inline double rk_mean(const ProjectionContext& ctx) {
  auto fn = [&](double s) { return s * std::exp(detail::log_wk(ctx, s) + ctx.log_ratio(s)); };
  return detail::integrate_s(ctx, fn, [&](double s) { return ctx.log_ratio(s); });
}

struct ProjectedDensity {
  DensityGrid grid;  // cells layout in y
  int n = 0;
  int k = 1;
  double t = 0.0;
  double mass_defect = 0.0;  // grid mass - 1 before normalization
};

/// p_{n,1,t}(y) = g_{1,c}(y) w_{n-1}(nt - f(y)) / w_n(nt) on a y-grid
/// covering {f(y) <= nt} (cut at the model's x_max).
inline ProjectedDensity project_uniform_k1(const ProjectionContext& ctx, std::size_t cells = 4096) {
  if (ctx.k() != 1) throw PreconditionError("project_uniform_k1 needs k = 1");
  const auto& m = ctx.model();
  const double y_hi = std::min(m.spec.inverse(ctx.nt()), m.quad.x_max);
  const double y_lo = m.spec.support() == Support::symmetric ? -y_hi : 0.0;
  const double dy = (y_hi - y_lo) / static_cast<double>(cells);
  std::vector<double> v(cells);
  bool any = false;
  for (std::size_t i = 0; i < cells; ++i) {
    const double y = y_lo + (i + 0.5) * dy;
    const double f = m.spec.evaluate(y);
    const double lp = -m.c * f - std::log(m.Z) + ctx.log_ratio(f);
    v[i] = std::exp(lp);
    any = any || v[i] > 0.0;
  }
  if (!any) throw PreconditionError("support exhaustion: f(y) > nt on the whole grid");
  ProjectedDensity out;
  DensityGrid raw(y_lo, dy, std::move(v), GridLayout::cells);
  out.mass_defect = raw.mass() - 1.0;
  out.grid = raw.normalized();
  out.n = ctx.n();
  out.k = 1;
  out.t = ctx.t();
  return out;
}

/// D(p_{n,k,t} || g_k) = integral of r_k(s) log(w_{n-k}(nt - s) / w_n(nt)).
inline double kl_to_gibbs(const ProjectionContext& ctx) {
  auto fn = [&](double s) {
    const double lr = ctx.log_ratio(s);
    if (!std::isfinite(lr)) return 0.0;  // support defect: excluded from KL
    return std::exp(detail::log_wk(ctx, s) + lr) * lr;
  };
  const double v = detail::integrate_s(ctx, fn, [&](double s) { return ctx.log_ratio(s); });
  if (v < -1e-8) throw ConvergenceError("KL came out negative beyond -1e-8: " + std::to_string(v));
  return std::max(v, 0.0);
}

/// L1 distance between p_{n,k,t} and g_k (range [0, 2]).
inline double tv_to_gibbs(const ProjectionContext& ctx) {
  auto fn = [&](double s) {
    const double lk = detail::log_wk(ctx, s);
    return std::abs(std::exp(lk + ctx.log_ratio(s)) - std::exp(lk));
  };
  const double inner = detail::integrate_s(ctx, fn, [&](double s) { return ctx.log_ratio(s); });
  // Past nt the surface density has no mass while w_k still does.
  const double outer = 1.0 - ctx.wk().cdf(ctx.nt());
  return std::clamp(inner + std::max(outer, 0.0), 0.0, 2.0);
}

struct TiltedProjection {
  double alpha = 0.0;
  double log_normalizer = 0.0;  // log E_p[exp(alpha R_k)]
  double d_surface = 0.0;       // D(p_alpha || h_{n,t})
  double kl = 0.0;              // D(p_alpha projected || g_k)
  double tv = 0.0;
  std::optional<ProjectedDensity> density;  // y-space output, k = 1 only
};

/// Tilt of the uniform surface density by rho = exp(alpha R_k). Because rho
/// depends only on the projected coordinates, the surface-level divergence
/// is alpha E_alpha[R_k] - log E[rho].
inline TiltedProjection project_tilted(const ProjectionContext& ctx, double alpha,
                                       bool with_density = true, std::size_t cells = 4096) {
  TiltedProjection out;
  out.alpha = alpha;
  const double ref = ctx.k() * ctx.t();
  auto log_rk = [&](double s) { return detail::log_wk(ctx, s) + ctx.log_ratio(s); };
  auto lr0 = [&](double s) { return ctx.log_ratio(s); };
  const double e_tilt = detail::integrate_s(
      ctx, [&](double s) { return std::exp(log_rk(s) + alpha * (s - ref)); }, lr0);
  if (!(e_tilt > 0.0) || !std::isfinite(e_tilt)) {
    throw ConvergenceError("tilt normalizer overflowed; alpha is too large for this grid");
  }
  const double log_e = std::log(e_tilt);
  out.log_normalizer = alpha * ref + log_e;
  auto log_pa = [&](double s) { return log_rk(s) + alpha * (s - ref) - log_e; };
  const double mean_a = detail::integrate_s(ctx, [&](double s) { return s * std::exp(log_pa(s)); }, lr0);
  out.d_surface = std::max(0.0, alpha * mean_a - out.log_normalizer);

  auto shifted = [&](double s) { return ctx.log_ratio(s) + alpha * (s - ref) - log_e; };
  const double proj = detail::integrate_s(
      ctx,
      [&](double s) {
        const double lr = ctx.log_ratio(s);
        if (!std::isfinite(lr)) return 0.0;
        return std::exp(log_pa(s)) * lr;
      },
      shifted);
  out.kl = std::max(0.0, out.d_surface + proj);
  const double inner = detail::integrate_s(
      ctx,
      [&](double s) {
        const double lk = detail::log_wk(ctx, s);
        return std::abs(std::exp(lk + shifted(s)) - std::exp(lk));
      },
      shifted);
  out.tv = std::clamp(inner + std::max(0.0, 1.0 - ctx.wk().cdf(ctx.nt())), 0.0, 2.0);

  if (with_density && ctx.k() == 1) {
    auto base = project_uniform_k1(ctx, cells);
    const auto& m = ctx.model();
    std::vector<double> v(base.grid.values());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] *= std::exp(alpha * (m.spec.evaluate(base.grid.position(i)) - ref) - log_e);
    }
    DensityGrid g(base.grid.lo(), base.grid.dx(), std::move(v), GridLayout::cells);
    base.mass_defect = g.mass() - 1.0;
    base.grid = g.normalized();
    out.density = std::move(base);
  }
  return out;
}

struct BoundReport {
  int n = 0;
  int k = 0;
  double t = 0.0;
  double c = 0.0;
  double alpha = 0.0;
  double kl = 0.0;
  double tv = 0.0;         // L1 convention, range [0, 2]
  double kl_bound = 0.0;   // log(n/(n-k)) + 2/(sqrt(n)/C - 1) + D(p || h)
  double tv_from_kl = 0.0; // sqrt(2 kl)
  std::optional<double> df_bound;
  double C_used = 0.0;
  bool pass_kl = false;
  bool pass_tv = false;
};

/// Closed-form TV bound for the Gaussian and exponential families.
inline std::optional<double> df_tv_bound(const HamiltonianSpec& spec, int n, int k) {
  if (spec.kind() == HamiltonianKind::quadratic && n - k - 3 > 0) {
    return 2.0 * (k + 3) / static_cast<double>(n - k - 3);
  }
  if (spec.kind() == HamiltonianKind::linear_half && n - k - 1 > 0) {
    return 2.0 * (k + 1) / static_cast<double>(n - k - 1);
  }
  return std::nullopt;
}

inline double kl_reference_bound(int n, int k, double C) {
  const double sn = std::sqrt(static_cast<double>(n));
  if (!(sn / C > 1.0)) throw PreconditionError("bound needs sqrt(n)/C > 1");
  return std::log(static_cast<double>(n) / (n - k)) + 2.0 / (sn / C - 1.0);
}

inline BoundReport bound_report(const ProjectionContext& ctx, double C, double alpha = 0.0) {
  BoundReport r;
  r.n = ctx.n();
  r.k = ctx.k();
  r.t = ctx.t();
  r.c = ctx.model().c;
  r.alpha = alpha;
  r.C_used = C;
  const double base = kl_reference_bound(r.n, r.k, C);
  if (alpha == 0.0) {
    r.kl = kl_to_gibbs(ctx);
    r.tv = tv_to_gibbs(ctx);
    r.kl_bound = base;
    r.df_bound = df_tv_bound(ctx.model().spec, r.n, r.k);
  } else {
    const auto tilt = project_tilted(ctx, alpha, false);
    r.kl = tilt.kl;
    r.tv = tilt.tv;
    r.kl_bound = base + tilt.d_surface;
  }
  r.tv_from_kl = std::sqrt(2.0 * r.kl);
  r.pass_kl = r.kl <= r.kl_bound;
  r.pass_tv = r.df_bound ? r.tv <= *r.df_bound + 1e-6 : r.tv <= std::sqrt(2.0 * r.kl_bound);
  return r;
}

struct ConverseResult {
  double eps = 0.0;
  double lower_bound = 0.0;
  double tv = 0.0;
};

/// 2 x integral over L = (kt - eps sqrt(n-k), kt + eps sqrt(n-k)) of
/// w_k (ratio - 1)^+, a lower bound on the L1 distance.
inline ConverseResult converse_lower_bound(const ProjectionContext& ctx, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("eps must be positive");
  ConverseResult out;
  out.eps = eps;
  const double half = eps * std::sqrt(static_cast<double>(ctx.n() - ctx.k()));
  const double a = std::max(0.0, ctx.k() * ctx.t() - half);
  const double b = std::min(ctx.nt(), ctx.k() * ctx.t() + half);
  if (b > a) {
    std::vector<double> br = {a, b};
    for (double x : ctx.breaks([&](double s) { return ctx.log_ratio(s); })) {
      if (x > a && x < b) br.push_back(x);
    }
    auto fn = [&](double s) {
      const double lk = detail::log_wk(ctx, s);
      return std::max(0.0, std::exp(lk + ctx.log_ratio(s)) - std::exp(lk));
    };
    out.lower_bound = 2.0 * integrate_piecewise(fn, br, ctx.quadrature());
  }
  out.tv = tv_to_gibbs(ctx);
  return out;
}

struct MixtureAtom {
  GibbsModel model;
  double t = 0.0;
  double weight = 0.0;
};

struct MixtureReport {
  std::vector<double> tv;  // per atom
  double tv_sum = 0.0;     // sum of weight * tv
  double bound = 0.0;      // sqrt(2k/(n-k))
  bool pass = false;
};

/// Triangle-inequality bound on the L1 distance between the surface mixture
/// and the matching Gibbs mixture.
inline MixtureReport mixture_bound_check(const std::vector<MixtureAtom>& atoms, int n, int k,
                                         DensitySource src = DensitySource::automatic,
                                         const SumGridParams& params = {}) {
  if (atoms.empty()) throw PreconditionError("mixture needs at least one atom");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.weight >= 0.0)) throw PreconditionError("mixture weights must be nonnegative");
    if (std::abs(a.model.mu - a.t) > 1e-8 * a.t) {
      throw PreconditionError("mixture atom is not energy-matched to its t");
    }
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw PreconditionError("mixture weights must sum to 1");
  MixtureReport r;
  r.tv.resize(atoms.size());
  parallel_for(atoms.size(), [&](std::size_t i) {
    r.tv[i] = tv_to_gibbs(ProjectionContext::make(atoms[i].model, n, k, src, params));
  });
  for (std::size_t i = 0; i < atoms.size(); ++i) r.tv_sum += atoms[i].weight * r.tv[i];
  r.bound = std::sqrt(2.0 * k / static_cast<double>(n - k));
  r.pass = r.tv_sum <= r.bound;
  return r;
}

/// sum g log(g/h) - (sum g) log(sum g / sum h); nonnegative for g, h >= 0.
inline double logsum_gap(const std::vector<double>& g, const std::vector<double>& h) {
  double lhs = 0.0, sg = 0.0, sh = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] > 0.0) lhs += g[i] * std::log(g[i] / h[i]);
    sg += g[i];
    sh += h[i];
  }
  const double rhs = sg > 0.0 ? sg * std::log(sg / sh) : 0.0;
  return lhs - rhs;
}

/// Random discrete instances of the log-sum inequality; returns the number
/// that hold to 1e-12.
inline int logsum_property_check(int trials, int size, std::uint64_t seed) {
  if (trials < 1 || size < 1) throw PreconditionError("trials and size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int passes = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> g(size), h(size);
    for (int i = 0; i < size; ++i) {
      g[i] = u(rng) < 0.1 ? 0.0 : -std::log(1.0 - u(rng));
      h[i] = 1e-3 + -std::log(1.0 - u(rng));
    }
    double scale = 0.0;
    for (int i = 0; i < size; ++i) scale += std::abs(g[i] * std::log(g[i] > 0 ? g[i] / h[i] : 1.0));
    if (logsum_gap(g, h) >= -1e-12 * std::max(1.0, scale)) ++passes;
  }
  return passes;
}

}  // namespace thinshell
