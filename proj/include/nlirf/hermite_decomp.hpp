#pragma once

/** @file
 * Probabilists' Hermite polynomials and the decomposition of an IRF by
 * degree of nonlinearity in the shock.
 *
 * Regressing simulated outcomes on He_0..He_J of the first-step innovation
 * gives beta_j ~ E[M He_j(eps)] / j!, so IRF(h, delta) ~ sum_{j>=1} beta_j delta^j.
 * The recurrence used here is He_{j+1}(x) = x He_j(x) - j He_{j-1}(x).
 */

#include "nlirf/core.hpp"
#include "nlirf/irf_engine.hpp"
#include "nlirf/kernel_lab.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace nlirf {

inline double hermite(int j, double x) {
  if (j < 0) throw std::invalid_argument("Hermite degree must be non-negative");
  if (j == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 1; k < j; ++k) {
    const double next = x * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// S x (J + 1) matrix with column j holding He_j of each draw.
inline Eigen::MatrixXd hermite_design(std::span<const double> eps, int J) {
  if (J < 1) throw std::invalid_argument("Hermite design needs J >= 1");
  const auto S = static_cast<Eigen::Index>(eps.size());
  if (S <= J + 1) throw std::invalid_argument("Hermite design needs more draws than J + 1");
  Eigen::MatrixXd X(S, J + 1);
  for (Eigen::Index s = 0; s < S; ++s) {
    const double x = eps[static_cast<std::size_t>(s)];
    X(s, 0) = 1.0;
    X(s, 1) = x;
    for (int j = 1; j < J; ++j) X(s, j + 1) = x * X(s, j) - static_cast<double>(j) * X(s, j - 1);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < J + 1) throw std::domain_error("rank-deficient Hermite design (duplicate draws)");
  return X;
}

struct HermiteDecomposition {
  std::size_t horizon = 0;
  double delta = 0.0;
  /// beta_j for j = 0..J
  Eigen::VectorXd coefficients;
  Eigen::VectorXd coefficient_se;
  /// c_j = beta_j delta^j; entry 0 is left at zero
  Eigen::VectorXd contributions;
  double linear_part = 0.0;
  double nonlinear_part = 0.0;
  double reconstructed_total = 0.0;
  double linear_se = 0.0;
  double nonlinear_se = 0.0;
  double residual_se = 0.0;
  /// IRF estimated directly from the same draws, when available
  double irf_estimate = std::numeric_limits<double>::quiet_NaN();
};

/**
 * OLS of sim_outputs on the Hermite design of eps_draws (column-pivoting QR),
 * with heteroskedasticity-robust (HC1) standard errors. Throws
 * std::domain_error when the design is rank deficient.
 */
inline HermiteDecomposition decompose_irf(std::span<const double> sim_outputs, std::span<const double> eps_draws,
                                          double delta, int J, std::size_t h) {
  if (sim_outputs.size() != eps_draws.size()) throw std::invalid_argument("outputs and draws differ in length");
  const Eigen::MatrixXd X = hermite_design(eps_draws, J);
  const auto S = X.rows();
  Eigen::VectorXd y(S);
  for (Eigen::Index s = 0; s < S; ++s) y(s) = sim_outputs[static_cast<std::size_t>(s)];
  if (!y.allFinite()) throw std::invalid_argument("non-finite simulated outputs");

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  HermiteDecomposition d;
  d.horizon = h;
  d.delta = delta;
  d.coefficients = qr.solve(y);
  const double rss = (y - X * d.coefficients).squaredNorm();
  const double s2 = rss / static_cast<double>(S - (J + 1));
  d.residual_se = std::sqrt(s2);

  // HC1 sandwich: the regression error is usually heteroskedastic in eps
  const Eigen::MatrixXd bread = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(J + 1, J + 1));
  const Eigen::VectorXd resid = y - X * d.coefficients;
  const Eigen::MatrixXd meat = X.transpose() * resid.array().square().matrix().asDiagonal() * X;
  const Eigen::MatrixXd cov = static_cast<double>(S) / static_cast<double>(S - (J + 1)) * bread * meat * bread;
  d.coefficient_se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  Eigen::VectorXd pow_delta(J + 1);
  pow_delta(0) = 1.0;
  for (int j = 1; j <= J; ++j) pow_delta(j) = pow_delta(j - 1) * delta;
  d.contributions = d.coefficients.cwiseProduct(pow_delta);
  d.contributions(0) = 0.0;
  d.linear_part = d.contributions(1);
  d.nonlinear_part = 0.0;
  for (int j = 2; j <= J; ++j) d.nonlinear_part += d.contributions(j);
  d.reconstructed_total = d.linear_part + d.nonlinear_part;

  Eigen::VectorXd w_lin = Eigen::VectorXd::Zero(J + 1), w_nl = Eigen::VectorXd::Zero(J + 1);
  w_lin(1) = delta;
  for (int j = 2; j <= J; ++j) w_nl(j) = pow_delta(j);
  d.linear_se = std::sqrt(std::max(0.0, w_lin.dot(cov * w_lin)));
  d.nonlinear_se = std::sqrt(std::max(0.0, w_nl.dot(cov * w_nl)));
  return d;
}

/**
 * Decomposition at every horizon of a request.
 *
 * Direct route: outputs are the baseline y^s_{t+h}. Local-projection route:
 * outputs are m_hat^{(h-1)}(y^s_{t+1}). Replications rejected at a horizon
 * are left out of that horizon's regression.
 */
inline std::vector<HermiteDecomposition> decompose_series(const TimeSeries& series, const IrfRequest& req, int J) {
  const PairedPaths p = estimated_paths(series, req);
  const IrfCurve curve = req.route == Route::local_projection ? irf_lp(series, req) : irf_from_paths(p, req);
  std::unique_ptr<LocalProjection> lp;
  if (req.route == Route::local_projection && req.horizons > 1)
    lp = std::make_unique<LocalProjection>(series.univariate_view(), req.horizons - 1, req.kernel);

  std::vector<HermiteDecomposition> out;
  for (std::size_t k = 0; k < req.horizons; ++k) {
    std::vector<double> outputs, draws;
    for (Eigen::Index s = 0; s < p.base.rows(); ++s) {
      double v;
      if (req.route == Route::local_projection) {
        if (k == 0) {
          v = p.base(s, 0);
        } else {
          try {
            v = lp->at(k, p.base(s, 0));
          } catch (const InsufficientLocalData&) {
            continue;
          }
        }
      } else {
        if (p.valid_through[static_cast<std::size_t>(s)] <= k) continue;
        v = p.base(s, static_cast<Eigen::Index>(k));
      }
      outputs.push_back(v);
      draws.push_back(p.eps(s, 0));
    }
    auto d = decompose_irf(outputs, draws, req.delta, J, k + 1);
    d.irf_estimate = curve.value[k];
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace nlirf
