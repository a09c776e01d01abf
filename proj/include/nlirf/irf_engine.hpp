#pragma once

/** @file
 * Nonparametric impulse response estimators for univariate Markov series.
 *
 * Both routes start from the same S x H matrix of standard-normal draws
 * (replication-major). The shocked path replaces eps_{t+1} by
 * eps_{t+1} + delta and keeps every other innovation, so delta = 0 yields an
 * exactly zero curve and the two routes agree bitwise at h = 1.
 */

#include "nlirf/core.hpp"
#include "nlirf/irf_curve.hpp"
#include "nlirf/kernel_lab.hpp"
#include "nlirf/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

namespace nlirf {

struct IrfRequest {
  double y0 = 0.0;
  std::size_t horizons = 10;
  double delta = 1.0;
  std::size_t replications = 10000;
  KernelConfig kernel;
  std::uint64_t seed = 0;
  Route route = Route::direct;
};

inline void validate(const IrfRequest& r) {
  if (r.horizons < 1) throw std::invalid_argument("IRF request needs at least one horizon");
  if (r.replications < 1) throw std::invalid_argument("IRF request needs at least one replication");
  if (!std::isfinite(r.delta) || !std::isfinite(r.y0)) throw std::invalid_argument("IRF request has non-finite values");
  validate(r.kernel);
}

/// Share of replications a horizon may lose before estimation aborts.
inline constexpr double kMaxRejectedShare = 0.10;

/// S x H standard-normal draws, filled replication by replication.
inline Eigen::MatrixXd draw_replication_shocks(std::size_t S, std::size_t H, std::uint64_t seed) {
  NormalStream rng(seed);
  Eigen::MatrixXd eps(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(H));
  for (Eigen::Index s = 0; s < eps.rows(); ++s)
    for (Eigen::Index k = 0; k < eps.cols(); ++k) eps(s, k) = rng();
  return eps;
}

/// The true map of a univariate model, exposed through the bind/apply interface.
class ModelTransition {
 public:
  explicit ModelTransition(ModelSpec m) : model_(std::move(m)) {
    validate(model_);
    if (model_dim(model_) != 1) throw std::invalid_argument("univariate model required");
  }
  double bind(double y) const { return y; }
  GHatValue apply(double y, double eps) const { return {transition_g(model_, y, eps), false}; }

 private:
  ModelSpec model_;
};

/// Baseline and shocked trajectories; entry (s, k) is horizon k + 1 of replication s.
struct PairedPaths {
  Eigen::MatrixXd base;
  Eigen::MatrixXd shocked;
  Eigen::MatrixXd eps;
  /// Number of leading horizons replication s reached before leaving the data cloud.
  std::vector<std::size_t> valid_through;
  std::size_t clamped_shocks = 0;
};

/**
 * Iterate a transition along S paired paths from y0.
 *
 * The conditioning state y0 is bound once. A replication stops at the first
 * step whose state has insufficient local data; its earlier horizons remain
 * usable.
 */
template <class Transition>
PairedPaths simulate_paired(const Transition& tr, double y0, double delta, const Eigen::MatrixXd& eps) {
  const auto S = eps.rows(), H = eps.cols();
  PairedPaths p{Eigen::MatrixXd::Zero(S, H), Eigen::MatrixXd::Zero(S, H), eps,
                std::vector<std::size_t>(static_cast<std::size_t>(S), 0), 0};
  const auto start = tr.bind(y0);
  for (Eigen::Index s = 0; s < S; ++s) {
    const auto b = tr.apply(start, eps(s, 0));
    const auto x = tr.apply(start, eps(s, 0) + delta);
    p.clamped_shocks += static_cast<std::size_t>(b.clamped) + static_cast<std::size_t>(x.clamped);
    p.base(s, 0) = b.value;
    p.shocked(s, 0) = x.value;
    std::size_t valid = 1;
    try {
      for (Eigen::Index k = 1; k < H; ++k) {
        const auto bk = tr.apply(tr.bind(p.base(s, k - 1)), eps(s, k));
        p.base(s, k) = bk.value;
        if (p.shocked(s, k - 1) == p.base(s, k - 1)) {
          p.shocked(s, k) = bk.value;
        } else {
          p.shocked(s, k) = tr.apply(tr.bind(p.shocked(s, k - 1)), eps(s, k)).value;
        }
        p.clamped_shocks += static_cast<std::size_t>(bk.clamped);
        valid = static_cast<std::size_t>(k) + 1;
      }
    } catch (const InsufficientLocalData&) {
    }
    p.valid_through[static_cast<std::size_t>(s)] = valid;
  }
  return p;
}

namespace detail {

inline IrfMeta make_meta(const IrfRequest& req, Route route) {
  IrfMeta m;
  m.y0 = {req.y0};
  m.delta = {req.delta};
  m.replications = req.replications;
  m.seed = req.seed;
  m.route = route;
  return m;
}

/// Per-horizon mean and MC standard error of f(s, k) over replications with valid(s, k).
template <class Valid, class F>
IrfCurve reduce_replications(std::size_t S, std::size_t H, Valid&& valid, F&& f, IrfMeta meta) {
  IrfCurve c;
  c.meta = std::move(meta);
  c.value.resize(H);
  c.mc_se.resize(H);
  c.rejected_reps.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < S; ++s) {
      if (!valid(s, k)) continue;
      sum += f(s, k);
      ++n;
    }
    c.rejected_reps[k] = S - n;
    if (n == 0 || static_cast<double>(S - n) > kMaxRejectedShare * static_cast<double>(S)) {
      throw InsufficientLocalData("horizon " + std::to_string(k + 1) + ": " + std::to_string(S - n) + " of " +
                                  std::to_string(S) + " replications left the data cloud");
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      if (!valid(s, k)) continue;
      const double d = f(s, k) - mean;
      ss += d * d;
    }
    c.value[k] = mean;
    c.mc_se[k] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n))
                       : std::numeric_limits<double>::quiet_NaN();
  }
  return c;
}

template <class F>
IrfCurve reduce_paths(const PairedPaths& p, F&& f, IrfMeta meta) {
  const auto S = static_cast<std::size_t>(p.base.rows());
  const auto H = static_cast<std::size_t>(p.base.cols());
  return reduce_replications(
      S, H, [&](std::size_t s, std::size_t k) { return p.valid_through[s] > k; }, std::forward<F>(f),
      std::move(meta));
}

}  // namespace detail

/// Paired paths through g_hat fitted on `series`, driven by the request's draws.
inline PairedPaths estimated_paths(const TimeSeries& series, const IrfRequest& req) {
  validate(req);
  const EstimatedTransition tr(series.univariate_view(), req.kernel);
  return simulate_paired(tr, req.y0, req.delta, draw_replication_shocks(req.replications, req.horizons, req.seed));
}

/// Monte Carlo paired paths through the true map of a univariate model.
inline PairedPaths oracle_paths(const ModelSpec& model, const IrfRequest& req) {
  validate(req);
  return simulate_paired(ModelTransition(model), req.y0, req.delta,
                         draw_replication_shocks(req.replications, req.horizons, req.seed));
}

inline IrfCurve irf_from_paths(const PairedPaths& p, const IrfRequest& req, Route route = Route::direct) {
  return detail::reduce_paths(
      p, [&](std::size_t s, std::size_t k) {
        const auto ss = static_cast<Eigen::Index>(s), kk = static_cast<Eigen::Index>(k);
        return p.shocked(ss, kk) - p.base(ss, kk);
      },
      detail::make_meta(req, route));
}

/// (1/S) sum_s (y^{(delta),s}_{t+h} - y^s_{t+h}) with both paths iterated through g_hat.
inline IrfCurve irf_direct(const TimeSeries& series, const IrfRequest& req) {
  return irf_from_paths(estimated_paths(series, req), req, Route::direct);
}

/**
 * Local-projection route: one step through g_hat, then
 * (1/S) sum_s [m_hat^{(h-1)}(y^{(delta),s}_{t+1}) - m_hat^{(h-1)}(y^s_{t+1})].
 *
 * A replication is rejected at a horizon when m_hat cannot be evaluated at
 * either of its one-step states.
 */
inline IrfCurve irf_lp(const TimeSeries& series, const IrfRequest& req) {
  validate(req);
  const auto y = series.univariate_view();
  const EstimatedTransition tr(y, req.kernel);
  const auto eps = draw_replication_shocks(req.replications, req.horizons, req.seed);
  const std::size_t S = req.replications, H = req.horizons;
  const auto start = tr.bind(req.y0);
  std::vector<double> base(S), shocked(S);
  for (std::size_t s = 0; s < S; ++s) {
    const auto ss = static_cast<Eigen::Index>(s);
    base[s] = EstimatedTransition::apply(start, eps(ss, 0)).value;
    shocked[s] = EstimatedTransition::apply(start, eps(ss, 0) + req.delta).value;
  }
  const LocalProjection lp(y, H > 1 ? H - 1 : 0, req.kernel);

  // One-step states are observed values, so repeats are common; memoize per lag.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd diff(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(H));
  for (std::size_t k = 0; k < H; ++k) {
    std::unordered_map<double, double> memo;
    auto m_hat = [&](double x) {
      if (k == 0) return x;
      if (auto it = memo.find(x); it != memo.end()) return it->second;
      double v = nan;
      try {
        v = lp.at(k, x);
      } catch (const InsufficientLocalData&) {
      }
      memo.emplace(x, v);
      return v;
    };
    for (std::size_t s = 0; s < S; ++s) {
      diff(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = m_hat(shocked[s]) - m_hat(base[s]);
    }
  }
  return detail::reduce_replications(
      S, H,
      [&](std::size_t s, std::size_t k) {
        return !std::isnan(diff(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)));
      },
      [&](std::size_t s, std::size_t k) { return diff(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)); },
      detail::make_meta(req, Route::local_projection));
}

/// Dispatch on req.route; the oracle route needs a model and is rejected here.
inline IrfCurve estimate_irf(const TimeSeries& series, const IrfRequest& req) {
  switch (req.route) {
    case Route::direct: return irf_direct(series, req);
    case Route::local_projection: return irf_lp(series, req);
    case Route::oracle: break;
  }
  throw std::invalid_argument("oracle route requires a model (see true_irf)");
}

/// Summary a(.) applied to the predictive distributions at each horizon.
struct Transform {
  enum class Kind { identity, indicator, quantile_level, function };
  Kind kind = Kind::identity;
  /// indicator: a(y) = 1{y < threshold}
  double threshold = 0.0;
  /// quantile_level: difference of predictive quantiles at this level
  double level = 0.5;
  std::function<double(double)> fn;

  static Transform identity() { return {}; }
  static Transform indicator(double y_star) { return {Kind::indicator, y_star, 0.5, {}}; }
  static Transform quantile(double level) { return {Kind::quantile_level, 0.0, level, {}}; }
  static Transform function(std::function<double(double)> f) { return {Kind::function, 0.0, 0.5, std::move(f)}; }
};

namespace detail {

inline double empirical_quantile(std::vector<double> v, double level) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  auto idx = static_cast<std::size_t>(std::ceil(level * n));
  idx = std::clamp<std::size_t>(idx, 1, v.size()) - 1;
  return v[idx];
}

inline IrfCurve quantile_irf(const PairedPaths& p, const IrfRequest& req, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
  const auto S = static_cast<std::size_t>(p.base.rows());
  const auto H = static_cast<std::size_t>(p.base.cols());
  constexpr std::size_t batches = 10;
  IrfCurve c;
  c.meta = make_meta(req, Route::direct);
  for (std::size_t k = 0; k < H; ++k) {
    std::vector<double> b, x;
    for (std::size_t s = 0; s < S; ++s) {
      if (p.valid_through[s] <= k) continue;
      b.push_back(p.base(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)));
      x.push_back(p.shocked(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)));
    }
    const std::size_t n = b.size();
    if (n == 0 || static_cast<double>(S - n) > kMaxRejectedShare * static_cast<double>(S))
      throw InsufficientLocalData("too many replications left the data cloud at horizon " + std::to_string(k + 1));
    c.value.push_back(empirical_quantile(x, level) - empirical_quantile(b, level));
    c.rejected_reps.push_back(S - n);
    // Batch means over contiguous blocks of replications.
    double se = std::numeric_limits<double>::quiet_NaN();
    if (n >= 2 * batches) {
      std::vector<double> d;
      for (std::size_t j = 0; j < batches; ++j) {
        const std::size_t lo = j * n / batches, hi = (j + 1) * n / batches;
        std::vector<double> bb(b.begin() + static_cast<std::ptrdiff_t>(lo), b.begin() + static_cast<std::ptrdiff_t>(hi));
        std::vector<double> xb(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi));
        d.push_back(empirical_quantile(xb, level) - empirical_quantile(bb, level));
      }
      double m = 0.0, ss = 0.0;
      for (double v : d) m += v;
      m /= static_cast<double>(batches);
      for (double v : d) ss += (v - m) * (v - m);
      se = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
    }
    c.mc_se.push_back(se);
  }
  return c;
}

}  // namespace detail

/// (1/S) sum_s [a(y^{(delta),s}_{t+h}) - a(y^s_{t+h})] on paths already simulated.
inline IrfCurve transformed_from_paths(const PairedPaths& p, const IrfRequest& req, const Transform& a) {
  using K = Transform::Kind;
  if (a.kind == K::quantile_level) return detail::quantile_irf(p, req, a.level);
  if (a.kind == K::function && !a.fn) throw std::invalid_argument("function transform needs a callable");
  auto apply = [&](double v) -> double {
    switch (a.kind) {
      case K::identity: return v;
      case K::indicator: return v < a.threshold ? 1.0 : 0.0;
      default: return a.fn(v);
    }
  };
  return detail::reduce_paths(
      p, [&](std::size_t s, std::size_t k) {
        const auto ss = static_cast<Eigen::Index>(s), kk = static_cast<Eigen::Index>(k);
        const double v = apply(p.shocked(ss, kk)) - apply(p.base(ss, kk));
        if (!std::isfinite(v)) throw std::invalid_argument("transform produced a non-finite value");
        return v;
      },
      detail::make_meta(req, Route::direct));
}

inline IrfCurve irf_transformed(const TimeSeries& series, const IrfRequest& req, const Transform& a) {
  return transformed_from_paths(estimated_paths(series, req), req, a);
}

/// (1/S) sum_s [y^{(delta)}_{t+h} y^{(delta)}_{t+h-1} - y_{t+h} y_{t+h-1}]; horizon 1 pairs with y_t = y0.
inline IrfCurve dynamic_from_paths(const PairedPaths& p, const IrfRequest& req) {
  return detail::reduce_paths(
      p, [&](std::size_t s, std::size_t k) {
        const auto ss = static_cast<Eigen::Index>(s), kk = static_cast<Eigen::Index>(k);
        const double prev_x = k == 0 ? req.y0 : p.shocked(ss, kk - 1);
        const double prev_b = k == 0 ? req.y0 : p.base(ss, kk - 1);
        return p.shocked(ss, kk) * prev_x - p.base(ss, kk) * prev_b;
      },
      detail::make_meta(req, Route::direct));
}

inline IrfCurve irf_dynamic(const TimeSeries& series, const IrfRequest& req) {
  if (req.horizons < 2) throw std::invalid_argument("dynamic IRF needs at least 2 horizons");
  return dynamic_from_paths(estimated_paths(series, req), req);
}

/// (1/S) sum_s (y^{(delta),s}_{t+h} - y^s_{t+h})^2
inline IrfCurve joint_from_paths(const PairedPaths& p, const IrfRequest& req) {
  return detail::reduce_paths(
      p, [&](std::size_t s, std::size_t k) {
        const auto ss = static_cast<Eigen::Index>(s), kk = static_cast<Eigen::Index>(k);
        const double d = p.shocked(ss, kk) - p.base(ss, kk);
        return d * d;
      },
      detail::make_meta(req, Route::direct));
}

inline IrfCurve irf_joint(const TimeSeries& series, const IrfRequest& req) {
  return joint_from_paths(estimated_paths(series, req), req);
}

/// A^h D delta for the Gaussian VAR(1).
inline Eigen::VectorXd var_irf(const VarParams& params, const Eigen::VectorXd& delta, std::size_t h) {
  const auto n = params.A.rows();
  if (params.A.cols() != n || params.D.rows() != n || params.D.cols() != n || delta.size() != n)
    throw std::invalid_argument("var_irf: dimension mismatch");
  Eigen::VectorXd r = params.D * delta;
  for (std::size_t k = 0; k < h; ++k) r = params.A * r;
  return r;
}

struct MaxIrfResult {
  double value = 0.0;
  Eigen::VectorXd delta;
  /// a' A^h D vanishes: every unit shock gives zero and delta is left at zero.
  bool degenerate = false;
};

/**
 * max over unit delta of a' A^h D delta.
 *
 * The maximum sqrt(a' A^h D D' A'^h a) is attained at D' A'^h a normalized
 * to unit length, and depends on D only through DD'.
 */
inline MaxIrfResult var_max_irf(const VarParams& params, const Eigen::VectorXd& a, std::size_t h) {
  const auto n = params.A.rows();
  if (params.A.cols() != n || params.D.rows() != n || params.D.cols() != n || a.size() != n)
    throw std::invalid_argument("var_max_irf: dimension mismatch");
  if (a.isZero(0.0)) throw std::invalid_argument("var_max_irf: direction must be non-zero");
  Eigen::VectorXd w = a;
  for (std::size_t k = 0; k < h; ++k) w = params.A.transpose() * w;
  const Eigen::VectorXd v = params.D.transpose() * w;
  const double norm = v.norm();
  if (!(norm > 0.0)) return {0.0, Eigen::VectorXd::Zero(n), true};
  return {norm, v / norm, false};
}

}  // namespace nlirf
