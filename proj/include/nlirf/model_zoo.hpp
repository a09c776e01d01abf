#pragma once

/** @file
 * Data-generating processes with known one-step maps and oracle IRFs:
 * DAR(1), Gaussian AR(1), Gaussian VAR(1) and a conditionally Gaussian
 * model with caller-supplied drift and scale.
 */

#include "nlirf/core.hpp"
#include "nlirf/irf_curve.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>

namespace nlirf {

/// y_t = rho * y_{t-1} + sqrt(alpha + beta * y_{t-1}^2) * eps_t
struct DarParams {
  double rho = 0.0;
  double alpha = 1.0;
  double beta = 0.0;
};

/// y_t = rho * y_{t-1} + sigma * eps_t
struct GaussianAr1Params {
  double rho = 0.0;
  double sigma = 1.0;
};

/// y_t = A y_{t-1} + D eps_t
struct VarParams {
  Eigen::MatrixXd A;
  Eigen::MatrixXd D;
};

/// y_t = m(y_{t-1}) + D(y_{t-1}) eps_t, with m and D supplied by the caller.
struct CondGaussianParams {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> scale;
  Eigen::Index dim = 1;
};

using ModelSpec = std::variant<DarParams, GaussianAr1Params, VarParams, CondGaussianParams>;

inline std::string variant_name(const ModelSpec& m) {
  switch (m.index()) {
    case 0: return "dar1";
    case 1: return "gaussian_ar1";
    case 2: return "gaussian_var1";
    default: return "cond_gaussian";
  }
}

inline Eigen::Index model_dim(const ModelSpec& m) {
  return std::visit(
      [](const auto& p) -> Eigen::Index {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, VarParams>) return p.A.rows();
        else if constexpr (std::is_same_v<T, CondGaussianParams>) return p.dim;
        else return 1;
      },
      m);
}

struct LyapunovEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/**
 * Monte Carlo estimate of E log|rho + sqrt(beta) eps|, eps ~ N(0,1).
 *
 * A negative value is the strict-stationarity condition of DAR(1). With
 * beta = 0 there is no randomness and log|rho| is returned exactly.
 */
inline LyapunovEstimate lyapunov_exponent(const DarParams& p, std::size_t draws, std::uint64_t seed) {
  if (draws < 10000) throw std::invalid_argument("lyapunov_exponent needs at least 1e4 draws");
  if (!(p.beta >= 0.0) || !std::isfinite(p.rho)) throw std::invalid_argument("invalid DAR parameters");
  if (p.beta == 0.0) return {std::log(std::abs(p.rho)), 0.0};
  NormalStream rng(seed);
  const double sb = std::sqrt(p.beta);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double v = std::log(std::abs(p.rho + sb * rng()));
    const double d = v - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (v - mean);
  }
  const double n = static_cast<double>(draws);
  return {mean, std::sqrt(m2 / (n - 1.0) / n)};
}

namespace detail {

inline constexpr std::size_t kLyapunovGuardDraws = 100000;
inline constexpr std::uint64_t kLyapunovGuardSeed = 0x4c79617075ULL;

inline void validate(const DarParams& p) {
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw std::invalid_argument("DAR alpha must be > 0");
  if (!(p.beta >= 0.0) || !std::isfinite(p.beta)) throw std::invalid_argument("DAR beta must be >= 0");
  if (!std::isfinite(p.rho)) throw std::invalid_argument("DAR rho must be finite");
  const auto ly = lyapunov_exponent(p, kLyapunovGuardDraws, kLyapunovGuardSeed);
  if (ly.value - 3.0 * ly.std_error >= 0.0) {
    throw std::invalid_argument("DAR parameters violate the Lyapunov stationarity condition (estimate " +
                                std::to_string(ly.value) + ")");
  }
}

inline void validate(const GaussianAr1Params& p) {
  if (!(std::abs(p.rho) < 1.0)) throw std::invalid_argument("Gaussian AR(1) requires |rho| < 1");
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw std::invalid_argument("Gaussian AR(1) requires sigma > 0");
}

inline void validate(const VarParams& p) {
  const auto n = p.A.rows();
  if (n < 1 || p.A.cols() != n || p.D.rows() != n || p.D.cols() != n)
    throw std::invalid_argument("VAR(1) requires square A and D of equal size");
  if (!p.A.allFinite() || !p.D.allFinite()) throw std::invalid_argument("VAR(1) matrices must be finite");
  const Eigen::EigenSolver<Eigen::MatrixXd> es(p.A, false);
  if (!(es.eigenvalues().cwiseAbs().maxCoeff() < 1.0))
    throw std::invalid_argument("VAR(1) requires spectral radius of A below 1");
  if (Eigen::FullPivLU<Eigen::MatrixXd>(p.D).rank() < n) throw std::invalid_argument("VAR(1) requires invertible D");
}

inline void validate(const CondGaussianParams& p) {
  if (!p.drift || !p.scale) throw std::invalid_argument("conditionally Gaussian model needs drift and scale");
  if (p.dim < 1) throw std::invalid_argument("conditionally Gaussian model needs dim >= 1");
}

inline Eigen::MatrixXd checked_scale(const CondGaussianParams& p, const Eigen::VectorXd& y) {
  Eigen::MatrixXd d = p.scale(y);
  if (d.rows() != p.dim || d.cols() != p.dim || !d.allFinite())
    throw std::invalid_argument("scale function returned an invalid matrix");
  if (p.dim == 1 ? !(d(0, 0) > 0.0) : d.determinant() == 0.0)
    throw std::invalid_argument("scale function is not positive at the evaluation point");
  return d;
}

}  // namespace detail

/// Throws std::invalid_argument when the model violates its invariants.
inline void validate(const ModelSpec& m) {
  std::visit([](const auto& p) { detail::validate(p); }, m);
}

/// One step of the model: g(y_prev; eps).
inline Eigen::VectorXd transition_g(const ModelSpec& m, const Eigen::VectorXd& y_prev, const Eigen::VectorXd& eps) {
  const auto n = model_dim(m);
  if (y_prev.size() != n || eps.size() != n) throw std::invalid_argument("state/shock dimension mismatch");
  if (!y_prev.allFinite() || !eps.allFinite()) throw std::invalid_argument("non-finite input to transition_g");
  return std::visit(
      [&](const auto& p) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DarParams>) {
          const double y = y_prev(0);
          return Eigen::VectorXd::Constant(1, p.rho * y + std::sqrt(p.alpha + p.beta * y * y) * eps(0));
        } else if constexpr (std::is_same_v<T, GaussianAr1Params>) {
          return Eigen::VectorXd::Constant(1, p.rho * y_prev(0) + p.sigma * eps(0));
        } else if constexpr (std::is_same_v<T, VarParams>) {
          return p.A * y_prev + p.D * eps;
        } else {
          Eigen::VectorXd mu = p.drift(y_prev);
          if (mu.size() != n || !mu.allFinite()) throw std::invalid_argument("drift function returned invalid vector");
          return mu + detail::checked_scale(p, y_prev) * eps;
        }
      },
      m);
}

inline double transition_g(const ModelSpec& m, double y_prev, double eps) {
  return transition_g(m, Eigen::VectorXd::Constant(1, y_prev), Eigen::VectorXd::Constant(1, eps))(0);
}

/// Row k of the result is g^{(k+1)}(y0; shocks[0..k]).
inline Eigen::MatrixXd iterate_g(const ModelSpec& m, const Eigen::VectorXd& y0, const ShockSequence& shocks) {
  if (shocks.draws.rows() < 1) throw std::invalid_argument("empty shock sequence");
  Eigen::MatrixXd path(shocks.draws.rows(), model_dim(m));
  Eigen::VectorXd y = y0;
  for (Eigen::Index k = 0; k < shocks.draws.rows(); ++k) {
    y = transition_g(m, y, shocks.draws.row(k).transpose());
    path.row(k) = y.transpose();
  }
  return path;
}

/**
 * Simulate T observations y_1..y_T starting from y0.
 *
 * One Gaussian vector is drawn per time step, in time order and component
 * order. The first `burn_in` steps are discarded.
 */
inline TimeSeries simulate(const ModelSpec& m, Eigen::Index T, const Eigen::VectorXd& y0, std::uint64_t seed,
                           Eigen::Index burn_in = 0) {
  validate(m);
  if (T < 2) throw std::invalid_argument("simulate requires T >= 2");
  if (burn_in < 0) throw std::invalid_argument("burn-in must be non-negative");
  const auto n = model_dim(m);
  if (y0.size() != n || !y0.allFinite()) throw std::invalid_argument("initial state must be finite and of model dimension");
  NormalStream rng(seed);
  Eigen::MatrixXd out(T, n);
  Eigen::VectorXd y = y0, eps(n);
  for (Eigen::Index t = 0; t < burn_in + T; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = rng();
    y = transition_g(m, y, eps);
    if (t >= burn_in) out.row(t - burn_in) = y.transpose();
  }
  return TimeSeries(std::move(out), "simulated:" + variant_name(m) + ":seed=" + std::to_string(seed));
}

inline TimeSeries simulate(const ModelSpec& m, Eigen::Index T, double y0, std::uint64_t seed, Eigen::Index burn_in = 0) {
  return simulate(m, T, Eigen::VectorXd::Constant(1, y0), seed, burn_in);
}

struct TrueIrfOptions {
  /// Linear combination a'y reported for multivariate models; defaults to e_1.
  std::optional<Eigen::VectorXd> projection;
  bool force_monte_carlo = false;
};

/**
 * Oracle IRF(k, delta) = E[a'(y^(delta)_{t+k} - y_{t+k}) | y_t = y0] for k = 1..h.
 *
 * Closed forms are used for Gaussian AR(1), Gaussian VAR(1) and DAR(1)
 * (whose conditional mean is rho * y, so m^{(k-1)} is linear); otherwise S
 * paired paths share every innovation except eps_{t+1} + delta.
 */
inline IrfCurve true_irf(const ModelSpec& m, const Eigen::VectorXd& y0, std::size_t h, const Eigen::VectorXd& delta,
                         std::size_t S, std::uint64_t seed, const TrueIrfOptions& opt = {}) {
  validate(m);
  if (h < 1) throw std::invalid_argument("horizon must be >= 1");
  if (S < 1) throw std::invalid_argument("replication count must be >= 1");
  const auto n = model_dim(m);
  if (y0.size() != n || delta.size() != n) throw std::invalid_argument("state/shock dimension mismatch");
  if (!y0.allFinite() || !delta.allFinite()) throw std::invalid_argument("non-finite state or shock");
  Eigen::VectorXd a = opt.projection.value_or(Eigen::VectorXd::Unit(n, 0));
  if (a.size() != n) throw std::invalid_argument("projection dimension mismatch");

  IrfCurve curve;
  curve.meta.y0.assign(y0.data(), y0.data() + n);
  curve.meta.delta.assign(delta.data(), delta.data() + n);
  curve.meta.replications = S;
  curve.meta.seed = seed;
  curve.meta.route = Route::oracle;
  curve.value.assign(h, 0.0);
  curve.mc_se.assign(h, 0.0);
  curve.rejected_reps.assign(h, 0);

  const bool closed = !opt.force_monte_carlo && m.index() != 3;
  if (closed) {
    curve.meta.closed_form = true;
    curve.meta.replications = 0;
    Eigen::VectorXd impact;
    Eigen::MatrixXd A;
    if (const auto* d = std::get_if<DarParams>(&m)) {
      impact = Eigen::VectorXd::Constant(1, std::sqrt(d->alpha + d->beta * y0(0) * y0(0)) * delta(0));
      A = Eigen::MatrixXd::Constant(1, 1, d->rho);
    } else if (const auto* g = std::get_if<GaussianAr1Params>(&m)) {
      impact = Eigen::VectorXd::Constant(1, g->sigma * delta(0));
      A = Eigen::MatrixXd::Constant(1, 1, g->rho);
    } else {
      const auto& v = std::get<VarParams>(m);
      impact = v.D * delta;
      A = v.A;
    }
    Eigen::VectorXd resp = impact;
    for (std::size_t k = 0; k < h; ++k) {
      curve.value[k] = a.dot(resp);
      resp = A * resp;
    }
    return curve;
  }

  NormalStream rng(seed);
  ShockSequence shocks{Eigen::MatrixXd(static_cast<Eigen::Index>(h), n), seed};
  std::vector<double> sum(h, 0.0), sumsq(h, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (Eigen::Index k = 0; k < shocks.draws.rows(); ++k)
      for (Eigen::Index i = 0; i < n; ++i) shocks.draws(k, i) = rng();
    const Eigen::MatrixXd base = iterate_g(m, y0, shocks);
    ShockSequence shocked = shocks;
    shocked.draws.row(0) += delta.transpose();
    const Eigen::MatrixXd pert = iterate_g(m, y0, shocked);
    for (std::size_t k = 0; k < h; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double d = a.dot(pert.row(kk).transpose()) - a.dot(base.row(kk).transpose());
      sum[k] += d;
      sumsq[k] += d * d;
    }
  }
  const double sd = static_cast<double>(S);
  for (std::size_t k = 0; k < h; ++k) {
    curve.value[k] = sum[k] / sd;
    const double var = S > 1 ? std::max(0.0, (sumsq[k] - sd * curve.value[k] * curve.value[k]) / (sd - 1.0)) : 0.0;
    curve.mc_se[k] = std::sqrt(var / sd);
  }
  return curve;
}

inline IrfCurve true_irf(const ModelSpec& m, double y0, std::size_t h, double delta, std::size_t S, std::uint64_t seed,
                         const TrueIrfOptions& opt = {}) {
  return true_irf(m, Eigen::VectorXd::Constant(1, y0), h, Eigen::VectorXd::Constant(1, delta), S, seed, opt);
}

}  // namespace nlirf
