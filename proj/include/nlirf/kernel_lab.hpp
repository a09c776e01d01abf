#pragma once

/** @file
 * Kernel building blocks: density, conditional CDF and quantile of y_t given
 * y_{t-1}, the estimated nonlinear AR map g_hat, and Nadaraya-Watson
 * h-step conditional means.
 */

#include "nlirf/core.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlirf {

enum class KernelType { gaussian, epanechnikov };

/// Data-driven bandwidth rules, both on the full series.
enum class BandwidthRule { silverman, undersmoothed };

/**
 * Kernel family, bandwidth and local-mass threshold.
 *
 * An explicit `bandwidth` overrides `rule`. An empty `min_weight_sum`
 * requires the kernel weight sum at the conditioning point to be at least
 * 5 times the largest single weight there.
 */
struct KernelConfig {
  KernelType kernel = KernelType::gaussian;
  std::optional<double> bandwidth;
  std::optional<double> min_weight_sum;
  BandwidthRule rule = BandwidthRule::silverman;
};

inline void validate(const KernelConfig& cfg) {
  if (cfg.bandwidth && !(*cfg.bandwidth > 0.0 && std::isfinite(*cfg.bandwidth)))
    throw std::invalid_argument("explicit bandwidth must be positive and finite");
  if (cfg.min_weight_sum && !(*cfg.min_weight_sum > 0.0))
    throw std::invalid_argument("min_weight_sum must be positive");
}

inline double kernel_value(KernelType k, double u) {
  if (k == KernelType::gaussian) return normal_pdf(u);
  return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

namespace detail {

inline double rule_of_thumb(std::span<const double> data, double exponent, const char* name) {
  if (data.size() < 2) throw std::invalid_argument(std::string(name) + " needs at least 2 points");
  const double n = static_cast<double>(data.size());
  const double mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : data) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw std::invalid_argument(std::string(name) + ": data are constant");
  return 1.06 * sd * std::pow(n, exponent);
}

}  // namespace detail

/// 1.06 * sd * T^{-1/5}
inline double silverman_bandwidth(std::span<const double> data) {
  return detail::rule_of_thumb(data, -0.2, "silverman_bandwidth");
}

/**
 * 1.06 * sd * T^{-1/3}. Keeps T b^{5/3} -> infinity while T b^5 -> 0, so the
 * smoothing bias is negligible against the sqrt(T b) sampling error; with
 * Silverman's rate the two are of the same order.
 */
inline double undersmoothed_bandwidth(std::span<const double> data) {
  return detail::rule_of_thumb(data, -1.0 / 3.0, "undersmoothed_bandwidth");
}

inline double resolve_bandwidth(const KernelConfig& cfg, std::span<const double> data) {
  validate(cfg);
  if (cfg.bandwidth) return *cfg.bandwidth;
  return cfg.rule == BandwidthRule::silverman ? silverman_bandwidth(data) : undersmoothed_bandwidth(data);
}

/// (1 / (T b)) sum_t K((y_t - y) / b)
inline double kde(std::span<const double> data, double y, const KernelConfig& cfg) {
  if (data.size() < 2) throw std::invalid_argument("kde needs at least 2 points");
  const double b = resolve_bandwidth(cfg, data);
  double s = 0.0;
  for (double v : data) s += kernel_value(cfg.kernel, (v - y) / b);
  return s / (static_cast<double>(data.size()) * b);
}

struct ConditionalEstimate {
  double value = 0.0;
  double effective_weight = 0.0;
  double bandwidth_used = 0.0;
};

namespace detail {

inline void require_local_mass(double sum, double max_w, const KernelConfig& cfg, double at) {
  const double need = cfg.min_weight_sum ? *cfg.min_weight_sum : 5.0 * max_w;
  if (!(sum > 0.0) || sum < need) {
    throw InsufficientLocalData("insufficient local data at y=" + std::to_string(at) + " (weight " +
                                std::to_string(sum) + " < " + std::to_string(need) + ")");
  }
}

}  // namespace detail

/**
 * Kernel-weighted distribution of the successors y_t of observations y_{t-1}
 * near a conditioning point. Successors are held in ascending order, ties in
 * time order, with normalized cumulative weights alongside.
 */
class LocalDistribution {
 public:
  LocalDistribution(std::shared_ptr<const std::vector<double>> sorted, std::vector<double> cumulative, double weight,
                    double max_weight, double bandwidth)
      : sorted_(std::move(sorted)),
        cum_(std::move(cumulative)),
        weight_(weight),
        max_weight_(max_weight),
        bandwidth_(bandwidth) {}

  /// First successor whose normalized cumulative weight reaches alpha.
  double quantile(double alpha) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
    const auto it = std::lower_bound(cum_.begin(), cum_.end(), alpha);
    return (*sorted_)[static_cast<std::size_t>(it - cum_.begin())];
  }

  /// Weighted share of successors strictly below z.
  double cdf(double z) const {
    const auto k = static_cast<std::size_t>(std::lower_bound(sorted_->begin(), sorted_->end(), z) - sorted_->begin());
    return k == 0 ? 0.0 : cum_[k - 1];
  }

  double effective_weight() const { return weight_; }
  double max_normalized_weight() const { return max_weight_ / weight_; }
  double bandwidth() const { return bandwidth_; }

 private:
  std::shared_ptr<const std::vector<double>> sorted_;
  std::vector<double> cum_;
  double weight_;
  double max_weight_;
  double bandwidth_;
};

/// Kernel estimate of the transition y_{t-1} -> y_t, fitted once per series.
class TransitionKernel {
 public:
  TransitionKernel(std::span<const double> series, const KernelConfig& cfg) : cfg_(cfg) {
    if (series.size() < 3) throw std::invalid_argument("conditional estimation needs T >= 3");
    bandwidth_ = resolve_bandwidth(cfg, series);
    const std::size_t n = series.size() - 1;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return series[a + 1] < series[b + 1]; });
    auto sorted = std::make_shared<std::vector<double>>(n);
    cond_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      (*sorted)[i] = series[order[i] + 1];
      cond_[i] = series[order[i]];
    }
    sorted_ = std::move(sorted);
  }

  LocalDistribution at(double y) const {
    if (!std::isfinite(y)) throw InsufficientLocalData("non-finite conditioning point");
    const std::size_t n = cond_.size();
    std::vector<double> cum(n);
    double run = 0.0, wmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = kernel_value(cfg_.kernel, (cond_[i] - y) / bandwidth_);
      run += w;
      wmax = std::max(wmax, w);
      cum[i] = run;
    }
    detail::require_local_mass(run, wmax, cfg_, y);
    for (double& c : cum) c /= run;
    return LocalDistribution(sorted_, std::move(cum), run, wmax, bandwidth_);
  }

  double bandwidth() const { return bandwidth_; }
  const KernelConfig& config() const { return cfg_; }

 private:
  KernelConfig cfg_;
  double bandwidth_ = 0.0;
  std::shared_ptr<const std::vector<double>> sorted_;
  std::vector<double> cond_;
};

inline ConditionalEstimate cond_cdf(const TimeSeries& series, double z, double y, const KernelConfig& cfg) {
  const TransitionKernel tk(series.univariate_view(), cfg);
  const auto d = tk.at(y);
  return {d.cdf(z), d.effective_weight(), d.bandwidth()};
}

/// Weighted sample quantile; the exact minimizer of the kernel-weighted check loss.
inline ConditionalEstimate cond_quantile(const TimeSeries& series, double alpha, double y, const KernelConfig& cfg) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
  const TransitionKernel tk(series.univariate_view(), cfg);
  const auto d = tk.at(y);
  return {d.quantile(alpha), d.effective_weight(), d.bandwidth()};
}

inline constexpr double kShockClamp = 6.0;

struct GHatValue {
  double value = 0.0;
  bool clamped = false;
};

/**
 * g_hat(y; eps) = Q_hat[Phi(eps) | y].
 *
 * `bind` fixes the conditioning state so repeated shocks at one state reuse
 * the same weights. Shocks outside [-6, 6] are clamped and flagged.
 */
class EstimatedTransition {
 public:
  EstimatedTransition(std::span<const double> series, const KernelConfig& cfg) : kernel_(series, cfg) {}

  LocalDistribution bind(double y) const { return kernel_.at(y); }

  static GHatValue apply(const LocalDistribution& d, double eps) {
    const bool clamped = std::abs(eps) > kShockClamp;
    const double e = std::clamp(eps, -kShockClamp, kShockClamp);
    return {d.quantile(normal_cdf(e)), clamped};
  }

  GHatValue operator()(double y, double eps) const { return apply(bind(y), eps); }

  double bandwidth() const { return kernel_.bandwidth(); }

 private:
  TransitionKernel kernel_;
};

inline GHatValue g_hat_detailed(const TimeSeries& series, double y, double eps, const KernelConfig& cfg) {
  return EstimatedTransition(series.univariate_view(), cfg)(y, eps);
}

inline double g_hat(const TimeSeries& series, double y, double eps, const KernelConfig& cfg) {
  return g_hat_detailed(series, y, eps, cfg).value;
}

/// Nadaraya-Watson regression of a response on a scalar regressor.
class KernelRegression {
 public:
  KernelRegression(std::vector<double> x, std::vector<double> response, double bandwidth, const KernelConfig& cfg)
      : x_(std::move(x)), resp_(std::move(response)), bandwidth_(bandwidth), cfg_(cfg) {
    if (x_.size() != resp_.size() || x_.empty()) throw std::invalid_argument("regression sample size mismatch");
    if (!(bandwidth_ > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  }

  ConditionalEstimate at(double y) const {
    if (!std::isfinite(y)) throw InsufficientLocalData("non-finite conditioning point");
    // responses centred on the first one, so a constant response is returned exactly
    const double ref = resp_.front();
    double sw = 0.0, swy = 0.0, wmax = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double w = kernel_value(cfg_.kernel, (x_[i] - y) / bandwidth_);
      sw += w;
      swy += w * (resp_[i] - ref);
      wmax = std::max(wmax, w);
    }
    detail::require_local_mass(sw, wmax, cfg_, y);
    return {ref + swy / sw, sw, bandwidth_};
  }

  double bandwidth() const { return bandwidth_; }

 private:
  std::vector<double> x_;
  std::vector<double> resp_;
  double bandwidth_;
  KernelConfig cfg_;
};

/// Estimates of m^{(h)}(y) = E[y_{t+h} | y_t = y] for h = 1..max_lag.
class LocalProjection {
 public:
  LocalProjection(std::span<const double> series, std::size_t max_lag, const KernelConfig& cfg) {
    if (series.size() < max_lag + 3) throw std::invalid_argument("local projection needs T > h + 2");
    const double b = resolve_bandwidth(cfg, series);
    for (std::size_t h = 1; h <= max_lag; ++h) {
      const std::size_t n = series.size() - h;
      std::vector<double> x(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(n));
      std::vector<double> r(series.begin() + static_cast<std::ptrdiff_t>(h), series.end());
      lags_.emplace_back(std::move(x), std::move(r), b, cfg);
    }
  }

  /// m_hat^{(h)}(y); h = 0 is the identity.
  double at(std::size_t h, double y) const { return h == 0 ? y : lags_.at(h - 1).at(y).value; }

  ConditionalEstimate estimate(std::size_t h, double y) const { return lags_.at(h - 1).at(y); }

  std::size_t max_lag() const { return lags_.size(); }

 private:
  std::vector<KernelRegression> lags_;
};

inline ConditionalEstimate nadaraya_watson(const TimeSeries& series, std::size_t h, double y, const KernelConfig& cfg) {
  if (h < 1) throw std::invalid_argument("nadaraya_watson requires h >= 1 (m^(0) is the identity)");
  const auto v = series.univariate_view();
  if (v.size() <= h + 2) throw std::invalid_argument("nadaraya_watson requires T > h + 2");
  return LocalProjection(v, h, cfg).estimate(h, y);
}

}  // namespace nlirf
