#pragma once

/** @file
 * Shared value types for the nonlinear IRF toolkit: time series container,
 * error types, seeded Gaussian streams and the normal CDF.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace nlirf {

/// Raised when a kernel estimate is requested at a point the data cloud does
/// not cover (effective local weight below the configured threshold).
class InsufficientLocalData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the autocovariance design used for mixing recovery is
/// numerically rank deficient.
class DegenerateDynamics : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Ordered real-valued observations, one row per time point.
 *
 * Column-major storage keeps each component contiguous, so univariate
 * estimators can view a column as a span without copying.
 */
class TimeSeries {
 public:
  TimeSeries() = default;

  explicit TimeSeries(Eigen::MatrixXd values, std::string origin = {})
      : values_(std::move(values)), origin_(std::move(origin)) {
    if (values_.rows() < 2) {
      throw std::invalid_argument("time series needs at least 2 observations");
    }
    if (values_.cols() < 1) {
      throw std::invalid_argument("time series needs at least one component");
    }
    if (!values_.allFinite()) {
      throw std::invalid_argument("time series contains non-finite values");
    }
  }

  static TimeSeries univariate(std::span<const double> values, std::string origin = {}) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
    return TimeSeries(std::move(m), std::move(origin));
  }

  Eigen::Index length() const { return values_.rows(); }
  Eigen::Index dim() const { return values_.cols(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::string& origin() const { return origin_; }

  std::span<const double> column(Eigen::Index j) const {
    return {values_.col(j).data(), static_cast<std::size_t>(values_.rows())};
  }

  /// Column 0 of a univariate series; throws for multivariate input.
  std::span<const double> univariate_view() const {
    if (dim() != 1) throw std::invalid_argument("univariate series required");
    return column(0);
  }

 private:
  Eigen::MatrixXd values_;
  std::string origin_;
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of substream `stream` under `master`: splitmix64(master + stream * golden).
/// Distinct stream ids never share draws, so adding a consumer leaves others intact.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + stream * 0x9e3779b97f4a7c15ULL);
}

/// Standard-normal draws from a 64-bit Mersenne Twister.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return dist_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

/// H x n standard-normal innovations; row k drives step k + 1.
struct ShockSequence {
  Eigen::MatrixXd draws;
  std::uint64_t seed = 0;
};

/// Rows are filled in time order, components in index order.
inline ShockSequence draw_shocks(Eigen::Index horizons, Eigen::Index dim, std::uint64_t seed) {
  if (horizons < 1 || dim < 1) throw std::invalid_argument("shock sequence must be non-empty");
  NormalStream rng(seed);
  ShockSequence out{Eigen::MatrixXd(horizons, dim), seed};
  for (Eigen::Index k = 0; k < horizons; ++k)
    for (Eigen::Index i = 0; i < dim; ++i) out.draws(k, i) = rng();
  return out;
}

}  // namespace nlirf
