#pragma once

/** @file
 * Gaussian quasi-maximum likelihood for DAR(1) by exhaustive grid search.
 *
 * The objective is the standard Gaussian quasi log-likelihood
 *   sum_{t=2}^T -1/2 [ ln(alpha + beta y_{t-1}^2) + (y_t - rho y_{t-1})^2 / (alpha + beta y_{t-1}^2) ].
 */

#include "nlirf/core.hpp"
#include "nlirf/model_zoo.hpp"

#include <array>
#include <limits>
#include <span>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace nlirf {

/// Lattice over (rho, alpha, beta): lower + i * step up to upper inclusive.
struct GridSpec {
  std::array<double, 3> lower{0.01, 0.01, 0.01};
  std::array<double, 3> upper{1.20, 1.20, 1.20};
  double step = 0.01;

  std::size_t points(std::size_t axis) const {
    return static_cast<std::size_t>(std::floor((upper[axis] - lower[axis]) / step + 1e-9)) + 1;
  }
  double value(std::size_t axis, std::size_t i) const { return lower[axis] + static_cast<double>(i) * step; }
};

inline void validate(const GridSpec& g) {
  if (!(g.step > 0.0)) throw std::invalid_argument("grid step must be positive");
  for (std::size_t k = 0; k < 3; ++k)
    if (!(g.lower[k] < g.upper[k])) throw std::invalid_argument("grid lower bound must be below upper bound");
  if (!(g.lower[1] > 0.0)) throw std::invalid_argument("alpha grid must be strictly positive");
  if (g.lower[2] < 0.0) throw std::invalid_argument("beta grid must be non-negative");
}

struct QmleResult {
  DarParams params;
  double loglik = 0.0;
  bool grid_argmax_on_boundary = false;
};

inline double dar_quasi_loglik(const DarParams& p, std::span<const double> y) {
  if (y.size() < 2) throw std::invalid_argument("quasi log-likelihood needs at least 2 observations");
  double ll = 0.0;
  for (std::size_t t = 1; t < y.size(); ++t) {
    const double v = p.alpha + p.beta * y[t - 1] * y[t - 1];
    if (!(v > 0.0)) throw std::invalid_argument("conditional variance must be positive");
    const double r = y[t] - p.rho * y[t - 1];
    ll += -0.5 * (std::log(v) + r * r / v);
  }
  return ll;
}

inline double dar_quasi_loglik(const DarParams& p, const TimeSeries& series) {
  return dar_quasi_loglik(p, series.univariate_view());
}

/**
 * Exhaustive argmax of the quasi log-likelihood over the lattice.
 *
 * For fixed (alpha, beta) the objective is a quadratic in rho with
 * coefficients given by four weighted sums, so each (alpha, beta) pass costs
 * O(T) and every rho on the axis is then evaluated exactly in O(1). Ties
 * resolve to the lexicographically smallest (rho, alpha, beta).
 */
inline QmleResult qmle_grid_search(const TimeSeries& series, const GridSpec& grid = {}) {
  validate(grid);
  const auto y = series.univariate_view();
  const std::size_t n = y.size() - 1;
  std::vector<double> xx(n), xz(n), zz(n);
  for (std::size_t t = 0; t < n; ++t) {
    xx[t] = y[t] * y[t];
    xz[t] = y[t] * y[t + 1];
    zz[t] = y[t + 1] * y[t + 1];
  }
  const std::size_t nr = grid.points(0), na = grid.points(1), nb = grid.points(2);
  std::vector<double> rho(nr);
  for (std::size_t i = 0; i < nr; ++i) rho[i] = grid.value(0, i);

  double best = -std::numeric_limits<double>::infinity();
  std::array<std::size_t, 3> arg{0, 0, 0};
  bool found = false;
  for (std::size_t ia = 0; ia < na; ++ia) {
    const double alpha = grid.value(1, ia);
    for (std::size_t ib = 0; ib < nb; ++ib) {
      const double beta = grid.value(2, ib);
      double s_log = 0.0, s_zz = 0.0, s_xz = 0.0, s_xx = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double v = alpha + beta * xx[t];
        const double iv = 1.0 / v;
        s_log += std::log(v);
        s_zz += zz[t] * iv;
        s_xz += xz[t] * iv;
        s_xx += xx[t] * iv;
      }
      for (std::size_t ir = 0; ir < nr; ++ir) {
        const double r = rho[ir];
        const double ll = -0.5 * (s_log + s_zz - 2.0 * r * s_xz + r * r * s_xx);
        if (!std::isfinite(ll)) continue;
        const std::array<std::size_t, 3> cand{ir, ia, ib};
        if (!found || ll > best || (ll == best && cand < arg)) {
          best = ll;
          arg = cand;
          found = true;
        }
      }
    }
  }
  if (!found) throw std::runtime_error("quasi log-likelihood not finite anywhere on the grid");
  QmleResult res;
  res.params = {grid.value(0, arg[0]), grid.value(1, arg[1]), grid.value(2, arg[2])};
  res.loglik = dar_quasi_loglik(res.params, y);
  res.grid_argmax_on_boundary = arg[0] == 0 || arg[0] == nr - 1 || arg[1] == 0 || arg[1] == na - 1 ||
                                arg[2] == 0 || arg[2] == nb - 1;
  return res;
}

}  // namespace nlirf
