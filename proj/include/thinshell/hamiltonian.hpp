#pragma once

// Single-site energy functions f and the numerical membership test for the
// admissible class (f(0) = 0, increasing, slope bounded below in the tail,
// controlled f'^q / f near the origin, half-line or symmetric support).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thinshell/numeric.hpp"

namespace thinshell {

enum class HamiltonianKind { quadratic, linear_half, power, quartic_perturbed, custom };

/// half_line: f is +inf on x < 0. symmetric: f(x) = f(-x).
enum class Support { half_line, symmetric };

struct TailWitness {
  double a1 = 0.0;  // f'(x) >= a1 on (a2, inf)
  double a2 = 0.0;
};

struct OriginWitness {
  double q = 0.0;   // exponent in (1, 2)
  double a3 = 0.0;  // liminf f'(x)^q / f(x) >= a3
};

struct ScanParameters {
  double origin_lo = 1e-8;
  double origin_hi = 1e-1;
  std::size_t origin_points = 57;
  double tail_lo = 1.0;
  double tail_hi = 1e6;
  std::size_t tail_points = 49;
  std::vector<double> q_grid = {1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 1.4, 1.45, 1.5,
                                1.55, 1.6, 1.65, 1.7, 1.75, 1.8, 1.85, 1.9, 1.95};
  double slope_threshold = 1e-6;
};

struct MembershipReport {
  bool f0_ok = false;
  bool monotone_ok = false;
  std::optional<TailWitness> tail_slope;
  std::optional<OriginWitness> origin_exponent;
  bool support_ok = false;
  bool overall = false;
};

inline std::string_view to_string(HamiltonianKind k) {
  switch (k) {
    case HamiltonianKind::quadratic: return "quadratic";
    case HamiltonianKind::linear_half: return "linear_half";
    case HamiltonianKind::power: return "power";
    case HamiltonianKind::quartic_perturbed: return "quartic_perturbed";
    case HamiltonianKind::custom: return "custom";
  }
  return "unknown";
}

inline std::string_view to_string(Support s) {
  return s == Support::half_line ? "half_line" : "symmetric";
}

class HamiltonianSpec;
MembershipReport check_class_f(const HamiltonianSpec& spec, const ScanParameters& scan = {});

/// Immutable description of f. Built-ins carry analytic f', f^{-1}; custom
/// specs are given on x >= 0 and extended by the support flag.
class HamiltonianSpec {
 public:
  using Evaluator = std::function<double(double)>;

  static HamiltonianSpec quadratic() {
    return HamiltonianSpec(HamiltonianKind::quadratic, Support::symmetric, 2.0, 0.0);
  }
  static HamiltonianSpec linear_half() {
    return HamiltonianSpec(HamiltonianKind::linear_half, Support::half_line, 1.0, 0.0);
  }
  static HamiltonianSpec power(double p, Support support = Support::symmetric) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw PreconditionError("power Hamiltonian needs p >= 1");
    return HamiltonianSpec(HamiltonianKind::power, support, p, 0.0);
  }
  static HamiltonianSpec quartic_perturbed(double eps, Support support = Support::symmetric) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw PreconditionError("quartic perturbation needs eps >= 0");
    }
    return HamiltonianSpec(HamiltonianKind::quartic_perturbed, support, 2.0, eps);
  }
  /// `f` is evaluated on x >= 0 only. The tail witness is scanned once at
  /// construction so that inverse() can use an analytic bracket.
  static HamiltonianSpec custom(Evaluator f, Support support, std::string name = "custom") {
    HamiltonianSpec s(HamiltonianKind::custom, support, 0.0, 0.0);
    s.custom_ = std::make_shared<const Evaluator>(std::move(f));
    s.name_ = std::move(name);
    s.tail_ = check_class_f(s).tail_slope;
    return s;
  }

  HamiltonianKind kind() const { return kind_; }
  Support support() const { return support_; }
  double p() const { return p_; }
  double eps() const { return eps_; }
  const std::string& name() const { return name_; }

  bool has_closed_Z() const {
    return (kind_ == HamiltonianKind::quadratic) || (kind_ == HamiltonianKind::linear_half);
  }
  bool has_closed_wn() const { return has_closed_Z(); }

  /// f(lambda x) = lambda^degree f(x) for the pure power families.
  bool is_homogeneous() const {
    return kind_ == HamiltonianKind::quadratic || kind_ == HamiltonianKind::linear_half ||
           kind_ == HamiltonianKind::power ||
           (kind_ == HamiltonianKind::quartic_perturbed && eps_ == 0.0);
  }
  double homogeneity_degree() const { return p_; }

  /// (a1, a2) with f' >= a1 beyond a2. Built-ins have increasing f', so
  /// f'(1) on (1, inf) works; custom specs carry the scanned witness.
  std::optional<TailWitness> tail_witness() const {
    if (kind_ != HamiltonianKind::custom) return TailWitness{derivative(1.0), 1.0};
    return tail_;
  }

  /// f(x) as an extended real; +inf outside the finiteness set.
  double evaluate(double x) const {
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x < 0.0) {
      if (support_ == Support::half_line) return kInfinity;
      x = -x;
    }
    return evaluate_nonneg(x);
  }

  /// f'(x) for x > 0.
  double derivative(double x) const {
    if (!(x > 0.0)) throw std::domain_error("derivative requires x > 0");
    switch (kind_) {
      case HamiltonianKind::quadratic: return 2.0 * x;
      case HamiltonianKind::linear_half: return 1.0;
      case HamiltonianKind::power: return p_ * std::pow(x, p_ - 1.0);
      case HamiltonianKind::quartic_perturbed: return 2.0 * x + 4.0 * eps_ * x * x * x;
      case HamiltonianKind::custom: {
        double h = std::max(x, 1.0) * 1e-6;
        h = std::min(h, 0.5 * x);
        return ((*custom_)(x + h) - (*custom_)(x - h)) / (2.0 * h);
      }
    }
    return 0.0;
  }

  /// The unique x >= 0 with f(x) = y.
  double inverse(double y) const {
    if (!(y >= 0.0)) throw std::domain_error("inverse requires y >= 0");
    if (y == 0.0) return 0.0;
    switch (kind_) {
      case HamiltonianKind::quadratic: return std::sqrt(y);
      case HamiltonianKind::linear_half: return y;
      case HamiltonianKind::power: return std::pow(y, 1.0 / p_);
      case HamiltonianKind::quartic_perturbed: {
        if (eps_ == 0.0) return std::sqrt(y);
        // x^2 = (sqrt(1 + 4 eps y) - 1) / (2 eps), written without cancellation
        const double x2 = 2.0 * y / (1.0 + std::sqrt(1.0 + 4.0 * eps_ * y));
        return std::sqrt(x2);
      }
      case HamiltonianKind::custom: break;
    }
    double hi;
    if (tail_) {
      hi = std::max(1.0, y) / tail_->a1 + tail_->a2;
    } else {
      hi = std::max(1.0, y);
      int doublings = 0;
      while ((*custom_)(hi) < y) {
        hi *= 2.0;
        if (++doublings > 200) throw ConvergenceError("inverse: no bracket for y");
      }
    }
    if ((*custom_)(hi) < y) throw ConvergenceError("inverse: analytic bracket does not cover y");
    return bisect_increasing([this](double x) { return (*custom_)(x); }, y, 0.0, hi, 1e-12, 200);
  }

 private:
  HamiltonianSpec(HamiltonianKind kind, Support support, double p, double eps)
      : kind_(kind), support_(support), p_(p), eps_(eps), name_(to_string(kind)) {}

  double evaluate_nonneg(double x) const {
    switch (kind_) {
      case HamiltonianKind::quadratic: return x * x;
      case HamiltonianKind::linear_half: return x;
      case HamiltonianKind::power: return std::pow(x, p_);
      case HamiltonianKind::quartic_perturbed: {
        const double x2 = x * x;
        return x2 + eps_ * x2 * x2;
      }
      case HamiltonianKind::custom: return (*custom_)(x);
    }
    return kInfinity;
  }

  HamiltonianKind kind_;
  Support support_;
  double p_;
  double eps_;
  std::string name_;
  std::shared_ptr<const Evaluator> custom_;
  std::optional<TailWitness> tail_;
};

/// Local power law f(x) ~ a x^p0 at the origin, from x f'(x) / f(x) at a
/// small x. Drives the analytic model of the Y-density singularity.
inline double origin_power(const HamiltonianSpec& spec, double x_small = 1e-6) {
  switch (spec.kind()) {
    case HamiltonianKind::quadratic:
    case HamiltonianKind::quartic_perturbed: return 2.0;
    case HamiltonianKind::linear_half: return 1.0;
    case HamiltonianKind::power: return spec.p();
    case HamiltonianKind::custom: break;
  }
  return x_small * spec.derivative(x_small) / spec.evaluate(x_small);
}

inline MembershipReport check_class_f(const HamiltonianSpec& spec, const ScanParameters& scan) {
  MembershipReport rep;
  rep.f0_ok = spec.evaluate(0.0) == 0.0;

  const auto origin = log_space(scan.origin_lo, scan.origin_hi, scan.origin_points);
  const auto tail = log_space(scan.tail_lo, scan.tail_hi, scan.tail_points);

  std::vector<double> xs = origin;
  xs.insert(xs.end(), tail.begin(), tail.end());
  for (int i = 1; i <= 20; ++i) xs.push_back(0.05 * i);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  rep.monotone_ok = true;
  double prev = spec.evaluate(0.0);
  for (double x : xs) {
    const double v = spec.evaluate(x);
    if (!(v > prev) || !std::isfinite(v)) {
      rep.monotone_ok = false;
      break;
    }
    prev = v;
  }

  rep.support_ok = true;
  for (double x : {1e-3, 0.5, 1.0, 3.0, 10.0}) {
    const double left = spec.evaluate(-x);
    if (spec.support() == Support::half_line) {
      rep.support_ok = rep.support_ok && std::isinf(left) && left > 0;
    } else {
      rep.support_ok = rep.support_ok && left == spec.evaluate(x);
    }
  }

  // Tail slope: the first a2 beyond which the sampled slope stays above the
  // threshold and does not keep decaying over the last decade of the scan.
  if (rep.monotone_ok) {
    std::vector<double> slope(tail.size());
    for (std::size_t i = 0; i < tail.size(); ++i) slope[i] = spec.derivative(tail[i]);
    const double last_decade = scan.tail_hi / 10.0;
    for (std::size_t start = 0; start < tail.size(); ++start) {
      double min_all = kInfinity, min_last = kInfinity, min_before = kInfinity;
      for (std::size_t i = start; i < tail.size(); ++i) {
        min_all = std::min(min_all, slope[i]);
        if (tail[i] >= last_decade) {
          min_last = std::min(min_last, slope[i]);
        } else {
          min_before = std::min(min_before, slope[i]);
        }
      }
      if (!std::isfinite(min_before)) break;
      const double a1 = 0.5 * min_all;
      if (a1 >= scan.slope_threshold && min_last >= 0.5 * min_before) {
        rep.tail_slope = TailWitness{a1, tail[start]};
        break;
      }
    }
  }

  // Origin: f'^q / f must stay bounded below as x -> 0; a ratio that keeps
  // falling over the innermost decade is read as liminf = 0.
  if (rep.monotone_ok) {
    std::vector<double> fv(origin.size()), dv(origin.size());
    for (std::size_t i = 0; i < origin.size(); ++i) {
      fv[i] = spec.evaluate(origin[i]);
      dv[i] = spec.derivative(origin[i]);
    }
    std::size_t decade = 0;
    while (decade + 1 < origin.size() && origin[decade] < 10.0 * origin.front()) ++decade;
    for (double q : scan.q_grid) {
      if (!(q > 1.0 && q < 2.0)) continue;
      double a3 = kInfinity;
      std::vector<double> ratio(origin.size());
      for (std::size_t i = 0; i < origin.size(); ++i) {
        ratio[i] = std::pow(dv[i], q) / fv[i];
        a3 = std::min(a3, ratio[i]);
      }
      if (!(a3 > 0.0) || !std::isfinite(a3)) continue;
      if (ratio.front() < (1.0 - 1e-6) * ratio[decade]) continue;
      if (!rep.origin_exponent || a3 > rep.origin_exponent->a3) {
        rep.origin_exponent = OriginWitness{q, a3};
      }
    }
  }

  rep.overall = rep.f0_ok && rep.monotone_ok && rep.tail_slope.has_value() &&
                rep.origin_exponent.has_value() && rep.support_ok;
  return rep;
}

/// Parses `key=value` lines (kind, p, eps, support). Unknown keys are left
/// to the caller; see config.hpp for full experiment files.
inline HamiltonianSpec make_spec(std::string_view kind, double p, double eps,
                                 std::optional<Support> support) {
  if (kind == "quadratic") return HamiltonianSpec::quadratic();
  if (kind == "linear_half") return HamiltonianSpec::linear_half();
  if (kind == "power") return HamiltonianSpec::power(p, support.value_or(Support::symmetric));
  if (kind == "quartic_perturbed") {
    return HamiltonianSpec::quartic_perturbed(eps, support.value_or(Support::symmetric));
  }
  throw PreconditionError("unknown Hamiltonian kind '" + std::string(kind) + "'");
}

inline Support parse_support(std::string_view s) {
  if (s == "half_line") return Support::half_line;
  if (s == "symmetric") return Support::symmetric;
  throw PreconditionError("unknown support '" + std::string(s) + "'");
}

inline std::string serialize(const HamiltonianSpec& spec) {
  if (spec.kind() == HamiltonianKind::custom) {
    throw PreconditionError("custom Hamiltonians cannot be serialized");
  }
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << to_string(spec.kind()) << '\n';
  if (spec.kind() == HamiltonianKind::power) os << "p=" << spec.p() << '\n';
  if (spec.kind() == HamiltonianKind::quartic_perturbed) os << "eps=" << spec.eps() << '\n';
  os << "support=" << to_string(spec.support()) << '\n';
  return os.str();
}

inline HamiltonianSpec parse_spec(std::string_view text) {
  std::string kind;
  double p = 2.0, eps = 0.0;
  std::optional<Support> support;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw PreconditionError("line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "kind") {
        kind = value;
      } else if (key == "p") {
        p = std::stod(value);
      } else if (key == "eps") {
        eps = std::stod(value);
      } else if (key == "support") {
        support = parse_support(value);
      } else {
        throw PreconditionError("unknown key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      throw PreconditionError("line " + std::to_string(lineno) + ", field '" + key +
                              "': " + e.what());
    }
  }
  if (kind.empty()) throw PreconditionError("missing 'kind'");
  return make_spec(kind, p, eps, support);
}

}  // namespace thinshell
