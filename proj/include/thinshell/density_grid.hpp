#pragma once

// Densities sampled on a uniform grid, optionally carrying an analytic Gamma
// part that absorbs an integrable singularity at the left edge.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "thinshell/numeric.hpp"

namespace thinshell {

/// weight * Gamma(shape, rate) density on (0, inf).
struct GammaComponent {
  double weight = 0.0;
  double shape = 1.0;
  double rate = 1.0;

  double log_pdf(double x) const {
    if (!(x > 0.0) || weight <= 0.0) {
      if (x == 0.0 && shape == 1.0) return std::log(weight * rate);
      if (x == 0.0 && shape < 1.0 && weight > 0.0) return kInfinity;
      return -kInfinity;
    }
    return std::log(weight) + shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
           std::lgamma(shape);
  }
  double pdf(double x) const { return std::exp(log_pdf(x)); }
  /// Mass of the component on [0, x].
  double cdf(double x) const {
    if (!(x > 0.0)) return 0.0;
    if (std::isinf(x)) return weight;
    return weight * boost::math::gamma_p(shape, rate * x);
  }
  double mean() const { return shape / rate; }
  double variance() const { return shape / (rate * rate); }
};

/// `nodes`: values[i] sits at x0 + i dx and mass is trapezoidal.
/// `cells`: values[i] is the level on [x0 + i dx, x0 + (i+1) dx], sampled at
/// the midpoint; mass is the midpoint sum.
enum class GridLayout { nodes, cells };

class DensityGrid {
 public:
  DensityGrid() = default;

  DensityGrid(double x0, double dx, std::vector<double> values, GridLayout layout = GridLayout::nodes,
              std::optional<GammaComponent> analytic = std::nullopt)
      : x0_(x0), dx_(dx), layout_(layout), values_(std::move(values)), analytic_(analytic) {
    if (!(dx_ > 0.0)) throw PreconditionError("DensityGrid: spacing must be positive");
    if (values_.size() < 2) throw PreconditionError("DensityGrid: need at least two values");
    refresh();
  }

  double x0() const { return x0_; }
  double dx() const { return dx_; }
  std::size_t size() const { return values_.size(); }
  GridLayout layout() const { return layout_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& log_values() const { return log_values_; }
  const std::optional<GammaComponent>& analytic() const { return analytic_; }

  double position(std::size_t i) const {
    return x0_ + (static_cast<double>(i) + (layout_ == GridLayout::cells ? 0.5 : 0.0)) * dx_;
  }
  double lo() const { return x0_; }
  double hi() const {
    const double n = static_cast<double>(values_.size());
    return x0_ + (layout_ == GridLayout::cells ? n : n - 1.0) * dx_;
  }

  /// Total mass on [lo, hi], analytic part included.
  double mass() const { return mass_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }

  /// Bookkeeping slot for whatever correction produced the grid (clipped
  /// L1 mass, normalization defect). Not used in any computation here.
  double defect = 0.0;

  /// Density at x; zero outside [lo, hi]. Log-linear between samples unless
  /// an analytic part is present, in which case the regular part is linear.
  double evaluate(double x) const {
    if (!(x >= lo() && x <= hi())) return 0.0;
    const auto [i, w] = locate(x);
    if (analytic_) {
      const double reg = (1.0 - w) * values_[i] + w * values_[i + 1];
      return std::max(0.0, reg + analytic_->pdf(x));
    }
    return std::exp(interp_log(i, w));
  }

  double log_evaluate(double x) const {
    if (!(x >= lo() && x <= hi())) return -kInfinity;
    if (analytic_) return std::log(evaluate(x));
    const auto [i, w] = locate(x);
    return interp_log(i, w);
  }

  /// Mass on [lo, x].
  double cdf(double x) const {
    if (!(x > lo())) return 0.0;
    if (x >= hi()) return mass_;
    double out = analytic_ ? analytic_->cdf(x) - analytic_->cdf(lo()) : 0.0;
    if (layout_ == GridLayout::cells) {
      const double pos = (x - x0_) / dx_;
      const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 1);
      out += cumulative_[i] + (pos - static_cast<double>(i)) * dx_ * values_[i];
    } else {
      const auto [i, w] = locate(x);
      const double v = (1.0 - w) * values_[i] + w * values_[i + 1];
      out += cumulative_[i] + 0.5 * w * dx_ * (values_[i] + v);
    }
    return out;
  }

  /// Copy rescaled to unit mass; the defect records mass - 1.
  DensityGrid normalized() const {
    DensityGrid g = *this;
    const double m = mass_;
    for (double& v : g.values_) v /= m;
    if (g.analytic_) g.analytic_->weight /= m;
    g.refresh();
    g.defect = m - 1.0;
    return g;
  }

 private:
  std::pair<std::size_t, double> locate(double x) const {
    const double off = layout_ == GridLayout::cells ? 0.5 : 0.0;
    double pos = (x - x0_) / dx_ - off;
    const double last = static_cast<double>(values_.size() - 1);
    pos = std::clamp(pos, 0.0, last);
    auto i = static_cast<std::size_t>(pos);
    if (i >= values_.size() - 1) i = values_.size() - 2;
    return {i, pos - static_cast<double>(i)};
  }

  double interp_log(std::size_t i, double w) const {
    const double a = log_values_[i], b = log_values_[i + 1];
    if (w == 0.0) return a;
    if (w == 1.0) return b;
    if (std::isfinite(a) && std::isfinite(b)) return (1.0 - w) * a + w * b;
    return std::log((1.0 - w) * values_[i] + w * values_[i + 1]);
  }

  void refresh() {
    log_values_.resize(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
      log_values_[i] = values_[i] > 0.0 ? std::log(values_[i]) : -kInfinity;
    }
    cumulative_.assign(values_.size(), 0.0);
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      double w = dx_;
      if (layout_ == GridLayout::nodes && (i == 0 || i + 1 == values_.size())) w *= 0.5;
      const double x = position(i);
      m0 += w * values_[i];
      m1 += w * values_[i] * x;
      m2 += w * values_[i] * x * x;
      if (i + 1 < values_.size()) {
        cumulative_[i + 1] = cumulative_[i] + (layout_ == GridLayout::cells
                                                   ? dx_ * values_[i]
                                                   : 0.5 * dx_ * (values_[i] + values_[i + 1]));
      }
    }
    if (analytic_) {
      const double a = analytic_->cdf(hi()) - analytic_->cdf(lo());
      m0 += a;
      // Moments of the analytic part are taken over (0, inf); the window
      // always holds all but a negligible tail of it.
      m1 += analytic_->weight * analytic_->mean();
      m2 += analytic_->weight * (analytic_->variance() + analytic_->mean() * analytic_->mean());
    }
    mass_ = m0;
    mean_ = m0 > 0.0 ? m1 / m0 : 0.0;
    variance_ = m0 > 0.0 ? std::max(0.0, m2 / m0 - mean_ * mean_) : 0.0;
  }

  double x0_ = 0.0;
  double dx_ = 1.0;
  GridLayout layout_ = GridLayout::nodes;
  std::vector<double> values_;
  std::vector<double> log_values_;
  std::vector<double> cumulative_;
  std::optional<GammaComponent> analytic_;
  double mass_ = 0.0;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

}  // namespace thinshell
