#pragma once

/** @file
 * Monte Carlo sweeps over sample sizes: estimation error against model
 * oracles, log-log rate slopes and direct/LP RMSE ratios.
 */

#include "nlirf/core.hpp"
#include "nlirf/irf_engine.hpp"
#include "nlirf/kernel_lab.hpp"
#include "nlirf/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace nlirf {

enum class SweepTarget { cond_cdf, irf };

struct SweepSpec {
  ModelSpec model = GaussianAr1Params{0.5, 1.0};
  std::vector<std::size_t> sample_sizes{2000, 8000, 32000};
  std::size_t seeds_per_size = 20;
  /// Initial state of each simulated trajectory.
  double y_start = 0.0;
  SweepTarget target = SweepTarget::cond_cdf;
  /// cond_cdf target: F(z | y)
  double cdf_z = 0.0;
  double cdf_y = 0.0;
  KernelConfig kernel;
  /// irf target: every horizon of this request, on both routes; its seed is ignored
  IrfRequest irf{0.0, 1, 0.5, 2000, {}, 0, Route::direct};
  std::uint64_t master_seed = 0;
};

inline void validate(const SweepSpec& s) {
  validate(s.model);
  if (model_dim(s.model) != 1) throw std::invalid_argument("sweep needs a univariate model");
  if (s.model.index() == 3) throw std::invalid_argument("sweep needs a model with a closed-form oracle");
  if (s.sample_sizes.size() < 2) throw std::invalid_argument("sweep needs at least 2 sample sizes");
  if (!std::is_sorted(s.sample_sizes.begin(), s.sample_sizes.end()))
    throw std::invalid_argument("sample sizes must be ascending");
  if (s.seeds_per_size < 10) throw std::invalid_argument("sweep needs at least 10 seeds per size");
  if (s.target == SweepTarget::irf) validate(s.irf);
  validate(s.kernel);
}

struct SweepRow {
  std::size_t T = 0;
  std::size_t seed_index = 0;
  std::string route;
  std::string target;
  double estimate = 0.0;
  double oracle = 0.0;
  double abs_err = 0.0;
  double bandwidth = 0.0;
  bool failed = false;
};

struct SweepSummaryRow {
  std::size_t T = 0;
  std::string route;
  std::string target;
  double rmse = 0.0;
  double mean_bandwidth = 0.0;
  std::size_t cells = 0;
  std::size_t failed = 0;
};

struct SweepSlope {
  std::string route;
  std::string target;
  double slope = std::numeric_limits<double>::quiet_NaN();
  /// false when some RMSE is zero or non-finite, so log RMSE is unusable
  bool defined = false;
};

struct SweepRatio {
  std::size_t T = 0;
  std::string target;
  /// RMSE(direct) / RMSE(local_projection)
  double ratio = std::numeric_limits<double>::quiet_NaN();
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepSummaryRow> summary;
  std::vector<SweepSlope> slopes;
  std::vector<SweepRatio> ratios;

  const SweepSlope* slope_for(const std::string& route, const std::string& target) const {
    for (const auto& s : slopes)
      if (s.route == route && s.target == target) return &s;
    return nullptr;
  }
  double ratio_at(std::size_t T, const std::string& target) const {
    for (const auto& r : ratios)
      if (r.T == T && r.target == target) return r.ratio;
    return std::numeric_limits<double>::quiet_NaN();
  }
};

/// F(z | y) of the model's one-step transition.
inline double oracle_cond_cdf(const ModelSpec& m, double z, double y) {
  if (const auto* g = std::get_if<GaussianAr1Params>(&m)) return normal_cdf((z - g->rho * y) / g->sigma);
  if (const auto* d = std::get_if<DarParams>(&m)) return normal_cdf((z - d->rho * y) / std::sqrt(d->alpha + d->beta * y * y));
  throw std::invalid_argument("no closed-form conditional CDF for this model");
}

/// Least-squares slope of ys on xs.
inline double ols_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

/**
 * Aggregate per-cell rows: RMSE per (T, route, target), slope of log RMSE on
 * log(T b_T) per (route, target), and direct/LP RMSE ratios per T.
 */
inline SweepReport summarize_sweep(std::vector<SweepRow> rows) {
  SweepReport rep;
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, SweepSummaryRow> agg;
  std::map<Key, double> sq;
  for (const auto& r : rows) {
    auto& s = agg[{r.route, r.target, r.T}];
    s.T = r.T;
    s.route = r.route;
    s.target = r.target;
    if (r.failed) {
      ++s.failed;
      continue;
    }
    ++s.cells;
    sq[{r.route, r.target, r.T}] += r.abs_err * r.abs_err;
    s.mean_bandwidth += r.bandwidth;
  }
  for (auto& [k, s] : agg) {
    s.rmse = s.cells > 0 ? std::sqrt(sq[k] / static_cast<double>(s.cells)) : std::numeric_limits<double>::quiet_NaN();
    s.mean_bandwidth = s.cells > 0 ? s.mean_bandwidth / static_cast<double>(s.cells) : 0.0;
    rep.summary.push_back(s);
  }
  std::map<std::pair<std::string, std::string>, std::vector<const SweepSummaryRow*>> series;
  for (const auto& s : rep.summary) series[{s.route, s.target}].push_back(&s);
  for (const auto& [key, pts] : series) {
    SweepSlope sl{key.first, key.second};
    std::vector<double> xs, ys;
    bool ok = pts.size() >= 2;
    for (const auto* p : pts) {
      if (!(p->rmse > 0.0) || !std::isfinite(p->rmse) || !(p->mean_bandwidth > 0.0)) ok = false;
      xs.push_back(std::log(static_cast<double>(p->T) * p->mean_bandwidth));
      ys.push_back(std::log(p->rmse));
    }
    if (ok) {
      sl.slope = ols_slope(xs, ys);
      sl.defined = std::isfinite(sl.slope);
    }
    rep.slopes.push_back(sl);
  }
  for (const auto& s : rep.summary) {
    if (s.route != to_string(Route::direct)) continue;
    auto it = agg.find({to_string(Route::local_projection), s.target, s.T});
    if (it == agg.end()) continue;
    rep.ratios.push_back({s.T, s.target, s.rmse / it->second.rmse});
  }
  rep.rows = std::move(rows);
  return rep;
}

/**
 * Simulate, estimate and compare with the oracle in every (T, seed) cell.
 *
 * Cell data seed: substream_seed(master, (size_index << 20) | seed_index);
 * IRF draws use substream 1 of that seed. Cells whose estimator throws are
 * recorded as failed; a cell where more than half of the replications leave
 * the data cloud aborts the sweep.
 */
inline SweepReport run_sweep(const SweepSpec& spec) {
  validate(spec);
  std::vector<SweepRow> rows;
  IrfCurve truth;
  if (spec.target == SweepTarget::irf) {
    truth = true_irf(spec.model, spec.irf.y0, spec.irf.horizons, spec.irf.delta, 1, 0);
  }
  for (std::size_t ti = 0; ti < spec.sample_sizes.size(); ++ti) {
    const std::size_t T = spec.sample_sizes[ti];
    for (std::size_t si = 0; si < spec.seeds_per_size; ++si) {
      const std::uint64_t data_seed = substream_seed(spec.master_seed, (static_cast<std::uint64_t>(ti) << 20) | si);
      const TimeSeries series = simulate(spec.model, static_cast<Eigen::Index>(T), spec.y_start, data_seed);
      const auto y = series.univariate_view();
      if (spec.target == SweepTarget::cond_cdf) {
        SweepRow r{T, si, "kernel", "cond_cdf"};
        r.oracle = oracle_cond_cdf(spec.model, spec.cdf_z, spec.cdf_y);
        try {
          const auto est = cond_cdf(series, spec.cdf_z, spec.cdf_y, spec.kernel);
          r.estimate = est.value;
          r.bandwidth = est.bandwidth_used;
          r.abs_err = std::abs(r.estimate - r.oracle);
        } catch (const InsufficientLocalData&) {
          r.failed = true;
          r.estimate = r.abs_err = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(r);
        continue;
      }
      IrfRequest req = spec.irf;
      req.seed = substream_seed(data_seed, 1);
      const double bw = resolve_bandwidth(req.kernel, y);
      for (Route route : {Route::direct, Route::local_projection}) {
        req.route = route;
        std::vector<SweepRow> cell;
        try {
          const IrfCurve c = estimate_irf(series, req);
          for (std::size_t h = 1; h <= req.horizons; ++h) {
            SweepRow r{T, si, to_string(route), "irf_h" + std::to_string(h)};
            r.estimate = c.at(h);
            r.oracle = truth.at(h);
            r.abs_err = std::abs(r.estimate - r.oracle);
            r.bandwidth = bw;
            cell.push_back(r);
          }
        } catch (const InsufficientLocalData&) {
          const auto paths = estimated_paths(series, req);
          const auto lost = std::count_if(paths.valid_through.begin(), paths.valid_through.end(),
                                          [&](std::size_t v) { return v < req.horizons; });
          if (static_cast<double>(lost) > 0.5 * static_cast<double>(req.replications)) throw;
          for (std::size_t h = 1; h <= req.horizons; ++h) {
            SweepRow r{T, si, to_string(route), "irf_h" + std::to_string(h)};
            r.failed = true;
            r.oracle = truth.at(h);
            r.estimate = r.abs_err = std::numeric_limits<double>::quiet_NaN();
            cell.push_back(r);
          }
        }
        rows.insert(rows.end(), cell.begin(), cell.end());
      }
    }
  }
  return summarize_sweep(std::move(rows));
}

}  // namespace nlirf
