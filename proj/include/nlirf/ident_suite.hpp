#pragma once

/** @file
 * Identification utilities for multivariate and augmented models.
 *
 * recover_mixing: for y_t = A x_t with unit-diagonal A and independent
 * sources, the observable autocovariances satisfy
 *   gamma_12(h) = [a21 gamma_11(h) + a12 gamma_22(h)] / (1 + a12 a21),
 * so a regression across lags identifies A up to the source permutation.
 *
 * markov_moment_test: conditional independence of y_t and y_{t-2} given
 * y_{t-1}, through E[c(y_{t-1}) Cov(a(y_t), b(y_{t-2}) | y_{t-1})] = 0.
 */

#include "nlirf/core.hpp"
#include "nlirf/kernel_lab.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nlirf {

/// Autocovariances at lags 1..H; gamma_12 averages the two cross directions.
struct AutocovarianceSet {
  std::vector<double> g11;
  std::vector<double> g12;
  std::vector<double> g22;
};

inline AutocovarianceSet sample_autocovariances(const TimeSeries& series, std::size_t max_lag) {
  if (series.dim() != 2) throw std::invalid_argument("bivariate series required");
  const auto T = static_cast<std::size_t>(series.length());
  if (max_lag < 1 || max_lag >= T) throw std::invalid_argument("max_lag must lie in [1, T)");
  const auto y1 = series.column(0), y2 = series.column(1);
  const double n = static_cast<double>(T);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    m1 += y1[t];
    m2 += y2[t];
  }
  m1 /= n;
  m2 /= n;
  AutocovarianceSet g;
  for (std::size_t h = 1; h <= max_lag; ++h) {
    double c11 = 0.0, c22 = 0.0, c12 = 0.0, c21 = 0.0;
    for (std::size_t t = h; t < T; ++t) {
      const double a = y1[t] - m1, b = y2[t] - m2, al = y1[t - h] - m1, bl = y2[t - h] - m2;
      c11 += a * al;
      c22 += b * bl;
      c12 += a * bl;
      c21 += b * al;
    }
    g.g11.push_back(c11 / n);
    g.g22.push_back(c22 / n);
    g.g12.push_back(0.5 * (c12 + c21) / n);
  }
  return g;
}

struct MixingCandidate {
  double a12 = 0.0;
  double a21 = 0.0;
  Eigen::Matrix2d A;
  /// Norm of gamma_12 minus its fit implied by this candidate.
  double residual_norm = 0.0;
  /// Recovered sources A^{-1} y_t, one row per time point (empty for ACF-only input).
  Eigen::MatrixXd sources;
};

struct MixingEstimate {
  std::vector<MixingCandidate> candidates;
  std::size_t chosen = 0;
  /// Regression coefficients on gamma_11 and gamma_22.
  double coef_g11 = 0.0;
  double coef_g22 = 0.0;
  double regression_residual_norm = 0.0;
  double condition_number = 0.0;
  bool discriminant_clamped = false;

  const MixingCandidate& best() const { return candidates.at(chosen); }
};

inline constexpr double kMaxAcfCondition = 1e8;

/**
 * Mixing recovery from autocovariances at lags 1..H.
 *
 * With d and e the coefficients on gamma_11 and gamma_22, c = d / e = a21 / a12
 * and a12 solves d c a12^2 - c a12 + d = 0. Both roots are returned; they
 * describe the same model with the two sources swapped and rescaled. The
 * chosen candidate minimizes the fit residual, ties going to the smaller
 * off-diagonal norm.
 */
inline MixingEstimate recover_mixing_from_acf(const AutocovarianceSet& g) {
  const std::size_t H = g.g11.size();
  if (H < 2 || g.g12.size() != H || g.g22.size() != H) throw std::invalid_argument("need >= 2 lags of each ACF");
  Eigen::MatrixXd X(H, 2);
  Eigen::VectorXd y(H);
  for (std::size_t h = 0; h < H; ++h) {
    X(static_cast<Eigen::Index>(h), 0) = g.g11[h];
    X(static_cast<Eigen::Index>(h), 1) = g.g22[h];
    y(static_cast<Eigen::Index>(h)) = g.g12[h];
  }
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("non-finite autocovariances");

  MixingEstimate est;
  const Eigen::Vector2d norms = X.colwise().norm().transpose();
  if (!(norms.minCoeff() > 0.0)) throw DegenerateDynamics("an autocovariance sequence is identically zero");
  const Eigen::MatrixXd Xn = X * norms.cwiseInverse().asDiagonal();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xn);
  const auto sv = svd.singularValues();
  est.condition_number = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
  if (!(est.condition_number <= kMaxAcfCondition)) {
    throw DegenerateDynamics("source autocovariances are (nearly) proportional; condition number " +
                             std::to_string(est.condition_number));
  }
  const Eigen::Vector2d coef = X.colPivHouseholderQr().solve(y);
  const double d = coef(0), e = coef(1);
  est.coef_g11 = d;
  est.coef_g22 = e;
  est.regression_residual_norm = (y - X * coef).norm();

  // d a^2 - a + e = 0 is the quadratic above divided by c; roots in stable form.
  double disc = 1.0 - 4.0 * d * e;
  if (disc < 0.0) {
    disc = 0.0;
    est.discriminant_clamped = true;
  }
  const double q = 1.0 + std::sqrt(disc);
  std::vector<double> roots{2.0 * e / q};
  if (d != 0.0) roots.push_back(q / (2.0 * d));

  for (double a12 : roots) {
    const double denom = 1.0 - d * a12;
    if (!std::isfinite(a12) || denom == 0.0) continue;
    const double a21 = d / denom;
    if (!std::isfinite(a21) || 1.0 + a12 * a21 == 0.0 || 1.0 - a12 * a21 == 0.0) continue;
    MixingCandidate c;
    c.a12 = a12;
    c.a21 = a21;
    c.A << 1.0, a12, a21, 1.0;
    c.residual_norm = (y - (a21 * X.col(0) + a12 * X.col(1)) / (1.0 + a12 * a21)).norm();
    est.candidates.push_back(std::move(c));
  }
  if (est.candidates.empty()) throw DegenerateDynamics("no admissible mixing matrix (a12 a21 = +/-1)");

  const double scale = y.norm() + 1e-300;
  for (std::size_t i = 1; i < est.candidates.size(); ++i) {
    const auto& ci = est.candidates[i];
    const auto& cb = est.candidates[est.chosen];
    const double gap = ci.residual_norm - cb.residual_norm;
    const bool tie = std::abs(gap) <= 1e-9 * scale;
    if ((!tie && gap < 0.0) || (tie && std::hypot(ci.a12, ci.a21) < std::hypot(cb.a12, cb.a21))) est.chosen = i;
  }
  return est;
}

inline MixingEstimate recover_mixing(const TimeSeries& series, std::size_t max_lag) {
  if (max_lag < 2) throw std::invalid_argument("recover_mixing needs max_lag >= 2");
  MixingEstimate est = recover_mixing_from_acf(sample_autocovariances(series, max_lag));
  for (auto& c : est.candidates) c.sources = series.values() * c.A.inverse().transpose();
  return est;
}

/// Bounded test functions (a, b, c) applied to (y_t, y_{t-2}, y_{t-1}).
struct BasisTriple {
  std::string name;
  std::function<double(double)> a;
  std::function<double(double)> b;
  std::function<double(double)> c;
};

/// {(x, x, 1), (x, x, x), (x^2, x^2, 1), (1{x>med}, 1{x>med}, x)} with med the sample median.
inline std::vector<BasisTriple> default_markov_basis(std::span<const double> y) {
  std::vector<double> v(y.begin(), y.end());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double med = *mid;
  auto id = [](double x) { return x; };
  auto one = [](double) { return 1.0; };
  auto sq = [](double x) { return x * x; };
  auto above = [med](double x) { return x > med ? 1.0 : 0.0; };
  return {{"x,x,1", id, id, one}, {"x,x,x", id, id, id}, {"x2,x2,1", sq, sq, one}, {"ind,ind,x", above, above, id}};
}

struct MarkovTestResult {
  Eigen::VectorXd moments;
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
  bool reject = false;
  std::size_t block_len = 0;
  std::size_t bootstrap_reps = 0;
};

inline std::size_t default_block_length(std::size_t T) {
  return static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(T))));
}

namespace detail {

/// Leave-one-out Nadaraya-Watson fits of several responses on one regressor.
inline Eigen::MatrixXd loo_kernel_fit(std::span<const double> x, const Eigen::MatrixXd& resp, double bw,
                                      KernelType kernel) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n, resp.cols());
  Eigen::VectorXd den = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = kernel_value(kernel, (x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)]) / bw);
      if (w == 0.0) continue;
      den(i) += w;
      den(j) += w;
      num.row(i) += w * resp.row(j);
      num.row(j) += w * resp.row(i);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(den(i) > 0.0)) throw InsufficientLocalData("isolated observation in Markov test regression");
    num.row(i) /= den(i);
  }
  return num;
}

}  // namespace detail

/**
 * Wald test of the moment conditions implied by the first-order Markov property.
 *
 * Contributions are (a(y_t) - E[a(y_t)|y_{t-1}]) (b(y_{t-2}) - E[b(y_{t-2})|y_{t-1}]) c(y_{t-1}),
 * with the conditional means fitted by leave-one-out kernel regression. Their
 * mean is studentized by a circular block bootstrap covariance and compared
 * to a chi-square with one degree of freedom per (independent) basis triple.
 */
inline MarkovTestResult markov_moment_test(const TimeSeries& series, const std::vector<BasisTriple>& basis,
                                           std::size_t block_len, std::size_t B, std::uint64_t seed,
                                           const KernelConfig& cfg = {}, double level = 0.05) {
  const auto y = series.univariate_view();
  const std::size_t T = y.size();
  if (T < 100) throw std::invalid_argument("Markov test needs T >= 100");
  if (basis.empty()) throw std::invalid_argument("Markov test needs a non-empty basis");
  if (block_len < 1 || block_len > T - 2) throw std::invalid_argument("block length must lie in [1, T - 2]");
  if (B < 2) throw std::invalid_argument("Markov test needs at least 2 bootstrap replications");
  const double bw = resolve_bandwidth(cfg, y);

  const std::size_t n = T - 2;
  const auto K = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd resp(static_cast<Eigen::Index>(n), 2 * K);
  Eigen::MatrixXd cval(static_cast<Eigen::Index>(n), K);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto& f = basis[static_cast<std::size_t>(k)];
      resp(ii, k) = f.a(y[i + 2]);
      resp(ii, K + k) = f.b(y[i]);
      cval(ii, k) = f.c(y[i + 1]);
    }
  }
  if (!resp.allFinite() || !cval.allFinite()) throw std::invalid_argument("basis function produced non-finite values");
  const Eigen::MatrixXd fit = detail::loo_kernel_fit(y.subspan(1, n), resp, bw, cfg.kernel);

  Eigen::MatrixXd contrib(static_cast<Eigen::Index>(n), K);
  for (Eigen::Index k = 0; k < K; ++k) {
    contrib.col(k) = (resp.col(k) - fit.col(k)).cwiseProduct(resp.col(K + k) - fit.col(K + k)).cwiseProduct(cval.col(k));
  }
  MarkovTestResult res;
  res.moments = contrib.colwise().mean().transpose();
  res.block_len = block_len;
  res.bootstrap_reps = B;

  std::mt19937_64 eng(seed);
  std::uniform_int_distribution<std::size_t> start(0, n - 1);
  const std::size_t blocks = (n + block_len - 1) / block_len;
  Eigen::MatrixXd boot(static_cast<Eigen::Index>(B), K);
  for (std::size_t b = 0; b < B; ++b) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(K);
    std::size_t taken = 0;
    for (std::size_t j = 0; j < blocks && taken < n; ++j) {
      const std::size_t s0 = start(eng);
      for (std::size_t l = 0; l < block_len && taken < n; ++l, ++taken)
        acc += contrib.row(static_cast<Eigen::Index>((s0 + l) % n)).transpose();
    }
    boot.row(static_cast<Eigen::Index>(b)) = acc.transpose() / static_cast<double>(n);
  }
  const Eigen::RowVectorXd bmean = boot.colwise().mean();
  const Eigen::MatrixXd centered = boot.rowwise() - bmean;
  const Eigen::MatrixXd V = centered.transpose() * centered / static_cast<double>(B - 1);

  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(V);
  res.dof = static_cast<std::size_t>(cod.rank());
  if (res.dof == 0) throw std::invalid_argument("bootstrap covariance of the moments is zero");
  res.statistic = std::max(0.0, res.moments.dot(cod.solve(res.moments)));
  const boost::math::chi_squared chi(static_cast<double>(res.dof));
  res.critical_value = boost::math::quantile(chi, 1.0 - level);
  res.p_value = boost::math::cdf(boost::math::complement(chi, res.statistic));
  res.reject = res.statistic > res.critical_value;
  return res;
}

inline MarkovTestResult markov_moment_test(const TimeSeries& series, std::uint64_t seed) {
  const auto y = series.univariate_view();
  return markov_moment_test(series, default_markov_basis(y), default_block_length(y.size()), 500, seed);
}

}  // namespace nlirf
