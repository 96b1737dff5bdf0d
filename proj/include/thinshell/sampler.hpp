#pragma once

// Monte Carlo access to the surface density h_{n,t}: exact central scaling
// for homogeneous f, thin-shell rejection plus projection otherwise, and
// the canonical-vs-microcanonical expectation experiments built on them.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "thinshell/density_grid.hpp"
#include "thinshell/gibbs.hpp"
#include "thinshell/numeric.hpp"
#include "thinshell/projection.hpp"
#include "thinshell/sum_density.hpp"

namespace thinshell {

/// SplitMix64 keyed by (seed, stream index). Each sample owns one stream, so
/// batches do not depend on how the work is scheduled.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t index, std::uint64_t domain = 0)
      : state_(mix(seed ^ mix(index + 0x9e3779b97f4a7c15ULL * (domain + 1)))) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }
  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

/// Draws single coordinates from g_{1,c}.
class CoordinateSampler {
 public:
  explicit CoordinateSampler(const GibbsModel& m, std::size_t table_intervals = 4096) : m_(m) {
    const auto kind = m.spec.kind();
    const bool power_like = kind == HamiltonianKind::power ||
                            (kind == HamiltonianKind::quartic_perturbed && m.spec.eps() == 0.0);
    if (kind == HamiltonianKind::quadratic || kind == HamiltonianKind::linear_half || power_like) {
      return;
    }
    build_table(table_intervals);
  }

  double draw(Stream& s) const {
    const auto kind = m_.spec.kind();
    const bool sym = m_.spec.support() == Support::symmetric;
    if (kind == HamiltonianKind::quadratic) {
      // exp(-c x^2) is N(0, 1 / (2c))
      static const boost::math::normal_distribution<double> z;
      return boost::math::quantile(z, s.uniform()) / std::sqrt(2.0 * m_.c);
    }
    if (kind == HamiltonianKind::linear_half) return -std::log1p(-s.uniform()) / m_.c;
    double mag;
    if (table_.empty()) {
      // c |x|^p is Gamma(1/p, 1) distributed.
      const double p = m_.spec.homogeneity_degree();
      mag = std::pow(boost::math::gamma_p_inv(1.0 / p, s.uniform()) / m_.c, 1.0 / p);
    } else {
      mag = invert(s.uniform());
    }
    if (sym && s.uniform() < 0.5) mag = -mag;
    return mag;
  }

 private:
  // CDF of |X| on uniform nodes, inverted through the cubic Hermite
  // interpolant that uses the exact density as the slope.
  void build_table(std::size_t intervals) {
    const double mult = m_.multiplicity();
    dx_ = m_.quad.x_max / static_cast<double>(intervals);
    table_.assign(intervals + 1, 0.0);
    slope_.assign(intervals + 1, 0.0);
    auto g = [&](double x) { return mult * m_.density(x); };
    for (std::size_t i = 0; i <= intervals; ++i) slope_[i] = g(i * dx_);
    for (std::size_t i = 0; i < intervals; ++i) {
      table_[i + 1] = table_[i] + detail::gk31(g, i * dx_, (i + 1) * dx_).value;
    }
    const double total = table_.back();
    if (std::abs(total - 1.0) > 1e-10) {
      throw ConvergenceError("coordinate CDF table misses unit mass by " +
                             std::to_string(total - 1.0));
    }
    for (std::size_t i = 0; i <= intervals; ++i) {
      table_[i] /= total;
      slope_[i] /= total;
    }
  }

  double invert(double u) const {
    auto it = std::upper_bound(table_.begin(), table_.end(), u);
    if (it == table_.begin()) return 0.0;
    if (it == table_.end()) return m_.quad.x_max;
    const std::size_t i = static_cast<std::size_t>(it - table_.begin()) - 1;
    const double f0 = table_[i], f1 = table_[i + 1];
    const double d0 = slope_[i] * dx_, d1 = slope_[i + 1] * dx_;
    auto hermite = [&](double s) {
      const double s2 = s * s, s3 = s2 * s;
      return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * f1 +
             (s3 - s2) * d1 - u;
    };
    const double lo = hermite(0.0), hi = hermite(1.0);
    if (lo >= 0.0) return i * dx_;
    if (hi <= 0.0) return (i + 1) * dx_;
    std::uintmax_t iters = 100;
    const auto r = boost::math::tools::toms748_solve(hermite, 0.0, 1.0, lo, hi,
                                                     boost::math::tools::eps_tolerance<double>(50),
                                                     iters);
    return (i + 0.5 * (r.first + r.second)) * dx_;
  }

  GibbsModel m_;
  double dx_ = 0.0;
  std::vector<double> table_;
  std::vector<double> slope_;
};

/// kappa x with R_n(kappa x) = n t.
inline std::vector<double> central_projection(const HamiltonianSpec& spec,
                                              const std::vector<double>& x, double t) {
  if (!(t > 0.0)) throw PreconditionError("central projection needs t > 0");
  const double target = static_cast<double>(x.size()) * t;
  auto energy = [&](double kappa) {
    double r = 0.0;
    for (double v : x) r += spec.evaluate(kappa * v);
    return r;
  };
  const double r1 = energy(1.0);
  if (std::isinf(r1)) throw PreconditionError("central projection: a coordinate lies outside F");
  if (!(r1 > 0.0)) throw PreconditionError("central projection of the zero vector");
  double kappa;
  if (spec.is_homogeneous()) {
    kappa = std::pow(target / r1, 1.0 / spec.homogeneity_degree());
  } else {
    double lo = 1.0, hi = 1.0;
    if (r1 < target) {
      while (energy(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw ConvergenceError("central projection: no upper bracket");
      }
    } else {
      while (energy(lo) > target) {
        hi = lo;
        lo *= 0.5;
        if (lo < 1e-300) throw ConvergenceError("central projection: no lower bracket");
      }
    }
    kappa = bisect_increasing(energy, target, lo, hi, 1e-15, 400);
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = kappa * x[i];
  const double r = [&] {
    double s = 0.0;
    for (double v : out) s += spec.evaluate(v);
    return s;
  }();
  if (std::abs(r - target) > 1e-10 * target) {
    throw ConvergenceError("central projection missed the surface by " +
                           std::to_string(std::abs(r - target) / target) + " relative");
  }
  return out;
}

enum class SampleMethod : std::uint64_t { scaling = 0, rejection = 1 };

struct SampleBatch {
  int n = 0;
  std::size_t count = 0;
  std::size_t dims = 0;  // stored coordinates per point; n unless truncated
  double t = 0.0;
  double c = 0.0;
  SampleMethod method = SampleMethod::scaling;
  double delta = 0.0;  // rejection only
  double acceptance_rate = 1.0;
  std::uint64_t seed = 0;
  std::size_t attempts = 0;
  double max_residual = 0.0;  // max |R_n(x) - nt| / nt over emitted points
  std::vector<double> points;  // row-major count x dims

  const double* row(std::size_t i) const { return points.data() + i * dims; }
};

struct SamplerOptions {
  std::size_t keep = 0;                    // coordinates to store; 0 keeps all
  std::size_t block = 4096;                // rejection candidates per parallel block
  std::size_t pilot_attempts = 200000;     // attempts before the acceptance check
  double min_acceptance = 1e-4;
};

namespace detail {

inline constexpr std::uint64_t kMicroDomain = 1;
inline constexpr std::uint64_t kRejectDomain = 2;
inline constexpr std::uint64_t kCanonDomain = 3;

inline std::size_t kept_dims(int n, const SamplerOptions& o) {
  if (o.keep == 0) return static_cast<std::size_t>(n);
  if (o.keep > static_cast<std::size_t>(n)) throw PreconditionError("keep exceeds n");
  return o.keep;
}

inline double surface_residual(const HamiltonianSpec& spec, const std::vector<double>& x, double t) {
  double r = 0.0;
  for (double v : x) r += spec.evaluate(v);
  const double target = static_cast<double>(x.size()) * t;
  return std::abs(r - target) / target;
}

}  // namespace detail

/// Exact draws from h_{n,t} for homogeneous f: project iid g_{n,c} vectors.
inline SampleBatch sample_surface_scaling(const GibbsModel& m, int n, std::size_t count,
                                          std::uint64_t seed, const SamplerOptions& opts = {}) {
  if (!m.spec.is_homogeneous()) {
    throw PreconditionError("scaling sampler needs a homogeneous f; use the rejection sampler");
  }
  if (n < 1) throw PreconditionError("n must be positive");
  SampleBatch b;
  b.n = n;
  b.count = count;
  b.dims = detail::kept_dims(n, opts);
  b.t = m.mu;
  b.c = m.c;
  b.method = SampleMethod::scaling;
  b.seed = seed;
  b.attempts = count;
  b.points.resize(count * b.dims);
  const CoordinateSampler coord(m);
  std::vector<double> residual(count, 0.0);
  parallel_for(count, [&](std::size_t i) {
    Stream s(seed, i, detail::kMicroDomain);
    std::vector<double> x(n);
    for (auto& v : x) v = coord.draw(s);
    const auto y = central_projection(m.spec, x, m.mu);
    residual[i] = detail::surface_residual(m.spec, y, m.mu);
    std::copy(y.begin(), y.begin() + b.dims, b.points.begin() + i * b.dims);
  });
  for (double r : residual) b.max_residual = std::max(b.max_residual, r);
  return b;
}

/// Half a standard deviation of R_n / n.
inline double default_shell_width(const GibbsModel& m, int n) {
  return 0.5 * std::sqrt(m.sigma2 / static_cast<double>(n));
}

/// Shell-conditioned draws: accept iid g_{n,c} vectors with
/// |R_n / n - t| <= delta, then project them onto the surface.
inline SampleBatch sample_surface_rejection(const GibbsModel& m, int n, double delta,
                                            std::size_t count, std::uint64_t seed,
                                            const SamplerOptions& opts = {}) {
  if (!(delta > 0.0)) throw PreconditionError("shell half-width delta must be positive");
  if (n < 1) throw PreconditionError("n must be positive");
  SampleBatch b;
  b.n = n;
  b.count = count;
  b.dims = detail::kept_dims(n, opts);
  b.t = m.mu;
  b.c = m.c;
  b.method = SampleMethod::rejection;
  b.delta = delta;
  b.seed = seed;
  b.points.reserve(count * b.dims);
  const CoordinateSampler coord(m);
  const std::size_t block = std::max<std::size_t>(opts.block, 1);
  std::size_t accepted = 0, attempts = 0;
  std::vector<std::vector<double>> cand(block);
  while (accepted < count) {
    parallel_for(block, [&](std::size_t j) {
      Stream s(seed, attempts + j, detail::kRejectDomain);
      std::vector<double> x(n);
      double r = 0.0;
      for (auto& v : x) {
        v = coord.draw(s);
        r += m.spec.evaluate(v);
      }
      if (std::abs(r / n - m.mu) <= delta) {
        cand[j] = central_projection(m.spec, x, m.mu);
      } else {
        cand[j].clear();
      }
    });
    // Candidates are consumed in index order, so the batch is independent
    // of the block size.
    for (std::size_t j = 0; j < block && accepted < count; ++j) {
      ++attempts;
      if (cand[j].empty()) continue;
      b.max_residual = std::max(b.max_residual, detail::surface_residual(m.spec, cand[j], m.mu));
      b.points.insert(b.points.end(), cand[j].begin(), cand[j].begin() + b.dims);
      ++accepted;
    }
    if (accepted < count && attempts >= opts.pilot_attempts &&
        static_cast<double>(accepted) < opts.min_acceptance * static_cast<double>(attempts)) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "acceptance rate %.3g after %zu attempts is below %.0e; widen delta (now %.6g, "
                    "shell probability about %.3g) or use the scaling sampler for homogeneous f",
                    static_cast<double>(accepted) / attempts, attempts, opts.min_acceptance, delta,
                    shell_probability(m, n, m.mu, delta));
      throw ConvergenceError(buf);
    }
  }
  b.attempts = attempts;
  b.acceptance_rate = attempts ? static_cast<double>(accepted) / attempts : 1.0;
  return b;
}

/// Kolmogorov-Smirnov distance between a sample and a grid CDF.
inline double ks_statistic(std::vector<double> xs, const DensityGrid& reference) {
  if (xs.empty()) throw PreconditionError("KS statistic needs at least one sample");
  std::sort(xs.begin(), xs.end());
  const double total = reference.mass();
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = reference.cdf(xs[i]) / total;
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

/// KS distance between the batch's first coordinates and p_{n,1,t}.
inline double empirical_projection_check(const SampleBatch& batch, const ProjectedDensity& ref) {
  if (ref.n != batch.n || std::abs(ref.t - batch.t) > 1e-12 * std::max(1.0, batch.t)) {
    throw PreconditionError("reference density is for (n, t) = (" + std::to_string(ref.n) + ", " +
                            std::to_string(ref.t) + "), batch has (" + std::to_string(batch.n) +
                            ", " + std::to_string(batch.t) + ")");
  }
  if (batch.dims < 1 || batch.count == 0) throw PreconditionError("batch holds no coordinates");
  std::vector<double> first(batch.count);
  for (std::size_t i = 0; i < batch.count; ++i) first[i] = batch.row(i)[0];
  return ks_statistic(std::move(first), ref.grid);
}

/// iid draws from a grid density by inverting its CDF.
inline std::vector<double> draw_from_grid(const DensityGrid& g, std::size_t count,
                                          std::uint64_t seed) {
  std::vector<double> out(count);
  const double total = g.mass();
  for (std::size_t i = 0; i < count; ++i) {
    Stream s(seed, i, 0);
    const double u = s.uniform() * total;
    double lo = g.lo(), hi = g.hi();
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (g.cdf(mid) < u ? lo : hi) = mid;
    }
    out[i] = 0.5 * (lo + hi);
  }
  return out;
}

enum class Growth { bounded, energy };

/// A function of the first k coordinates. Unbounded functions must declare
/// |p(x)| <= M (1 + sum_{i<=k} f(x_i)).
struct TestFunction {
  std::string name;
  int k = 1;
  std::function<double(const double*)> fn;
  std::optional<Growth> growth;
  double M = 1.0;
};

/// Built-ins: "const", "f1", "fsum" (sum of f over the first k coordinates)
/// and "ind_f1" (indicator of f(x_1) <= t).
inline TestFunction make_test_function(const std::string& name, const GibbsModel& m, int k) {
  const auto spec = m.spec;
  if (name == "const") return {name, k, [](const double*) { return 1.0; }, Growth::bounded, 1.0};
  if (name == "f1") {
    return {name, k, [spec](const double* x) { return spec.evaluate(x[0]); }, Growth::energy, 1.0};
  }
  if (name == "fsum") {
    return {name, k,
            [spec, k](const double* x) {
              double s = 0.0;
              for (int i = 0; i < k; ++i) s += spec.evaluate(x[i]);
              return s;
            },
            Growth::energy, 1.0};
  }
  if (name == "ind_f1") {
    const double t = m.mu;
    return {name, k, [spec, t](const double* x) { return spec.evaluate(x[0]) <= t ? 1.0 : 0.0; },
            Growth::bounded, 1.0};
  }
  throw PreconditionError("unknown test function '" + name + "' (const, f1, fsum, ind_f1)");
}

struct EnsembleGap {
  double E_micro = 0.0;
  double E_canon = 0.0;
  double gap = 0.0;
  double se_micro = 0.0;
  double se_canon = 0.0;
  double joint_se() const { return std::hypot(se_micro, se_canon); }
};

/// |E_surface[p] - E_{g_k}[p]| from a surface batch and fresh canonical draws.
inline EnsembleGap ensemble_expectation_gap(const GibbsModel& m, int n, int k,
                                            const TestFunction& p, const SampleBatch& batch,
                                            std::size_t canonical_count, std::uint64_t seed) {
  if (!p.growth) {
    throw PreconditionError("test function '" + p.name + "' has no growth declaration");
  }
  if (!(k >= 1 && k < n)) throw PreconditionError("ensembles need 1 <= k < n");
  if (p.k > k) throw PreconditionError("test function reads more than k coordinates");
  if (batch.n != n || batch.dims < static_cast<std::size_t>(k)) {
    throw PreconditionError("batch does not hold the first k coordinates of an n-point sample");
  }
  if (batch.count < 2 || canonical_count < 2) throw PreconditionError("need at least two samples");
  auto stats = [](const std::vector<double>& v, double& mean, double& se) {
    double s = 0.0;
    for (double x : v) s += x;
    mean = s / v.size();
    double q = 0.0;
    for (double x : v) q += (x - mean) * (x - mean);
    se = std::sqrt(q / (v.size() - 1) / v.size());
  };
  std::vector<double> micro(batch.count);
  for (std::size_t i = 0; i < batch.count; ++i) micro[i] = p.fn(batch.row(i));
  const CoordinateSampler coord(m);
  std::vector<double> canon(canonical_count);
  parallel_for(canonical_count, [&](std::size_t i) {
    Stream s(seed, i, detail::kCanonDomain);
    std::vector<double> y(k);
    for (auto& v : y) v = coord.draw(s);
    canon[i] = p.fn(y.data());
  });
  EnsembleGap g;
  stats(micro, g.E_micro, g.se_micro);
  stats(canon, g.E_canon, g.se_canon);
  g.gap = std::abs(g.E_micro - g.E_canon);
  return g;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw PreconditionError("batch file is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline constexpr char kBatchMagic[8] = {'T', 'H', 'N', 'S', 'H', 'L', '1', '\0'};

}  // namespace detail

/// Little-endian layout: magic, n, count, t, c, method, delta, seed, then
/// count x n doubles.
inline void write_batch(const std::string& path, const SampleBatch& b) {
  if (b.dims != static_cast<std::size_t>(b.n)) {
    throw PreconditionError("only full-dimensional batches can be written");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PreconditionError("cannot open " + path + " for writing");
  os.write(detail::kBatchMagic, 8);
  detail::put_u64(os, static_cast<std::uint64_t>(b.n));
  detail::put_u64(os, b.count);
  detail::put_f64(os, b.t);
  detail::put_f64(os, b.c);
  detail::put_u64(os, static_cast<std::uint64_t>(b.method));
  detail::put_f64(os, b.delta);
  detail::put_u64(os, b.seed);
  for (double v : b.points) detail::put_f64(os, v);
  if (!os) throw PreconditionError("write to " + path + " failed");
}

inline SampleBatch read_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PreconditionError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kBatchMagic, 8) != 0) {
    throw PreconditionError(path + " is not a sample batch file");
  }
  SampleBatch b;
  b.n = static_cast<int>(detail::get_u64(is));
  b.count = detail::get_u64(is);
  b.dims = static_cast<std::size_t>(b.n);
  b.t = detail::get_f64(is);
  b.c = detail::get_f64(is);
  const auto method = detail::get_u64(is);
  if (method > 1) throw PreconditionError("unknown sampling method in " + path);
  b.method = static_cast<SampleMethod>(method);
  b.delta = detail::get_f64(is);
  b.seed = detail::get_u64(is);
  b.points.resize(b.count * b.dims);
  for (auto& v : b.points) v = detail::get_f64(is);
  return b;
}

}  // namespace thinshell
