#pragma once

/** @file
 * CSV ingestion/emission and JSON (de)serialization of configuration types.
 * JSON readers reject unknown keys.
 */

#include "nlirf/core.hpp"
#include "nlirf/irf_engine.hpp"
#include "nlirf/kernel_lab.hpp"
#include "nlirf/model_zoo.hpp"
#include "nlirf/qmle_dar.hpp"
#include "nlirf/rate_bench.hpp"

#include <json.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace nlirf {

using json = nlohmann::json;

/// Shortest round-trip text form (17 significant digits).
inline std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE;
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw std::invalid_argument(where + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw std::invalid_argument(where + ": expected an array of rows");
  const auto r = static_cast<Eigen::Index>(j.size());
  const auto c = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      throw std::invalid_argument(where + ": ragged matrix");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

}  // namespace detail

// ---- CSV ----

/**
 * Read a `t,y1[,y2,...]` file. Lines starting with '#' and blank lines are
 * skipped. t must be an integer increasing by exactly one per row.
 */
inline TimeSeries read_series_csv(std::istream& in, const std::string& origin = {}) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  std::vector<double> vals;
  long long prev_t = 0;
  std::size_t rows = 0;
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument(origin + (origin.empty() ? "" : ":") + "line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto f = detail::split_fields(s);
    if (width == 0) {
      if (f.size() < 2 || f[0] != "t") fail("header must be t,y1[,y2,...]");
      for (std::size_t k = 1; k < f.size(); ++k)
        if (f[k] != "y" + std::to_string(k)) fail("header must be t,y1[,y2,...]");
      width = f.size();
      continue;
    }
    if (f.size() != width) fail("expected " + std::to_string(width) + " fields, got " + std::to_string(f.size()));
    double tv = 0.0;
    if (!detail::parse_double(f[0], tv) || !std::isfinite(tv) || tv != std::floor(tv)) fail("t must be an integer");
    const auto t = static_cast<long long>(tv);
    if (rows > 0) {
      if (t <= prev_t) fail("t is not increasing");
      if (t != prev_t + 1) fail("gap in t");
    }
    prev_t = t;
    for (std::size_t k = 1; k < width; ++k) {
      double v = 0.0;
      if (!detail::parse_double(f[k], v)) fail("malformed number '" + f[k] + "'");
      if (!std::isfinite(v)) fail("non-finite value '" + f[k] + "'");
      vals.push_back(v);
    }
    ++rows;
  }
  if (width == 0) throw std::invalid_argument(origin + (origin.empty() ? "" : ": ") + "missing header");
  if (rows == 0) throw std::invalid_argument("empty series");
  const auto n = static_cast<Eigen::Index>(width - 1);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), n);
  for (std::size_t r = 0; r < rows; ++r)
    for (Eigen::Index k = 0; k < n; ++k) m(static_cast<Eigen::Index>(r), k) = vals[r * (width - 1) + static_cast<std::size_t>(k)];
  return TimeSeries(std::move(m), origin);
}

inline TimeSeries ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return read_series_csv(in, path);
}

inline void write_series_csv(std::ostream& out, const TimeSeries& s, long long t0 = 1) {
  out << "t";
  for (Eigen::Index k = 0; k < s.dim(); ++k) out << ",y" << (k + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < s.length(); ++i) {
    out << (t0 + i);
    for (Eigen::Index k = 0; k < s.dim(); ++k) out << ',' << format_number(s.values()(i, k));
    out << '\n';
  }
}

// ---- JSON ----

inline json to_json(const ModelSpec& m) {
  json j{{"variant", variant_name(m)}};
  if (const auto* d = std::get_if<DarParams>(&m)) {
    j["rho"] = d->rho;
    j["alpha"] = d->alpha;
    j["beta"] = d->beta;
  } else if (const auto* g = std::get_if<GaussianAr1Params>(&m)) {
    j["rho"] = g->rho;
    j["sigma"] = g->sigma;
  } else if (const auto* v = std::get_if<VarParams>(&m)) {
    j["A"] = detail::matrix_to_json(v->A);
    j["D"] = detail::matrix_to_json(v->D);
  } else {
    throw std::invalid_argument("cond_gaussian models carry functions and cannot be serialized");
  }
  return j;
}

inline ModelSpec model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("variant")) throw std::invalid_argument("model: missing 'variant'");
  const auto name = j.at("variant").get<std::string>();
  ModelSpec m;
  if (name == "dar1") {
    detail::check_keys(j, {"variant", "rho", "alpha", "beta"}, "model");
    m = DarParams{j.at("rho").get<double>(), j.at("alpha").get<double>(), j.at("beta").get<double>()};
  } else if (name == "gaussian_ar1") {
    detail::check_keys(j, {"variant", "rho", "sigma"}, "model");
    m = GaussianAr1Params{j.at("rho").get<double>(), j.at("sigma").get<double>()};
  } else if (name == "gaussian_var1") {
    detail::check_keys(j, {"variant", "A", "D"}, "model");
    m = VarParams{detail::matrix_from_json(j.at("A"), "model.A"), detail::matrix_from_json(j.at("D"), "model.D")};
  } else {
    throw std::invalid_argument("model: unknown variant '" + name + "'");
  }
  validate(m);
  return m;
}

inline json to_json(const KernelConfig& k) {
  json j{{"kernel", k.kernel == KernelType::gaussian ? "gaussian" : "epanechnikov"}};
  j["bandwidth"] = k.bandwidth ? json(*k.bandwidth) : json(k.rule == BandwidthRule::silverman ? "silverman" : "undersmoothed");
  j["min_weight_sum"] = k.min_weight_sum ? json(*k.min_weight_sum) : json(nullptr);
  return j;
}

inline KernelConfig kernel_from_json(const json& j) {
  detail::check_keys(j, {"kernel", "bandwidth", "min_weight_sum"}, "kernel");
  KernelConfig k;
  const auto name = detail::get_or<std::string>(j, "kernel", "gaussian");
  if (name == "gaussian") k.kernel = KernelType::gaussian;
  else if (name == "epanechnikov") k.kernel = KernelType::epanechnikov;
  else throw std::invalid_argument("kernel: unknown kernel '" + name + "'");
  if (j.contains("bandwidth")) {
    const auto& b = j.at("bandwidth");
    if (b.is_string()) {
      const auto rule = b.get<std::string>();
      if (rule == "silverman") k.rule = BandwidthRule::silverman;
      else if (rule == "undersmoothed") k.rule = BandwidthRule::undersmoothed;
      else throw std::invalid_argument("kernel: bandwidth must be a number, \"silverman\" or \"undersmoothed\"");
    } else if (!b.is_null()) {
      k.bandwidth = b.get<double>();
    }
  }
  if (j.contains("min_weight_sum") && !j.at("min_weight_sum").is_null()) k.min_weight_sum = j.at("min_weight_sum").get<double>();
  validate(k);
  return k;
}

inline json to_json(const GridSpec& g) {
  return json{{"lower", g.lower}, {"upper", g.upper}, {"step", g.step}};
}

inline GridSpec grid_from_json(const json& j) {
  detail::check_keys(j, {"lower", "upper", "step"}, "grid");
  GridSpec g;
  g.lower = detail::get_or(j, "lower", g.lower);
  g.upper = detail::get_or(j, "upper", g.upper);
  g.step = detail::get_or(j, "step", g.step);
  validate(g);
  return g;
}

inline json to_json(const QmleResult& r) {
  return json{{"rho", r.params.rho},
              {"alpha", r.params.alpha},
              {"beta", r.params.beta},
              {"loglik", r.loglik},
              {"grid_argmax_on_boundary", r.grid_argmax_on_boundary}};
}

inline json to_json(const SweepSpec& s) {
  json j{{"model", to_json(s.model)},
         {"sample_sizes", s.sample_sizes},
         {"seeds_per_size", s.seeds_per_size},
         {"y_start", s.y_start},
         {"target", s.target == SweepTarget::cond_cdf ? "cond_cdf" : "irf"},
         {"kernel", to_json(s.kernel)}};
  if (s.target == SweepTarget::cond_cdf) {
    j["z"] = s.cdf_z;
    j["y"] = s.cdf_y;
  } else {
    j["y0"] = s.irf.y0;
    j["horizons"] = s.irf.horizons;
    j["delta"] = s.irf.delta;
    j["replications"] = s.irf.replications;
  }
  return j;
}

/// Sweep seeds come from the caller; a "kernel" entry applies to both targets.
inline SweepSpec sweep_from_json(const json& j) {
  detail::check_keys(j, {"model", "sample_sizes", "seeds_per_size", "y_start", "target", "kernel", "z", "y", "y0",
                         "horizons", "delta", "replications"},
                     "bench");
  SweepSpec s;
  if (j.contains("model")) s.model = model_from_json(j.at("model"));
  s.sample_sizes = detail::get_or(j, "sample_sizes", s.sample_sizes);
  s.seeds_per_size = detail::get_or(j, "seeds_per_size", s.seeds_per_size);
  s.y_start = detail::get_or(j, "y_start", s.y_start);
  const auto target = detail::get_or<std::string>(j, "target", "cond_cdf");
  if (target == "cond_cdf") s.target = SweepTarget::cond_cdf;
  else if (target == "irf") s.target = SweepTarget::irf;
  else throw std::invalid_argument("bench: unknown target '" + target + "'");
  if (j.contains("kernel")) s.kernel = kernel_from_json(j.at("kernel"));
  const bool cdf = s.target == SweepTarget::cond_cdf;
  for (const char* k : {"z", "y"})
    if (!cdf && j.contains(k)) throw std::invalid_argument(std::string("bench: key '") + k + "' needs target cond_cdf");
  for (const char* k : {"y0", "horizons", "delta", "replications"})
    if (cdf && j.contains(k)) throw std::invalid_argument(std::string("bench: key '") + k + "' needs target irf");
  s.cdf_z = detail::get_or(j, "z", s.cdf_z);
  s.cdf_y = detail::get_or(j, "y", s.cdf_y);
  s.irf.y0 = detail::get_or(j, "y0", s.irf.y0);
  s.irf.horizons = detail::get_or(j, "horizons", s.irf.horizons);
  s.irf.delta = detail::get_or(j, "delta", s.irf.delta);
  s.irf.replications = detail::get_or(j, "replications", s.irf.replications);
  s.irf.kernel = s.kernel;
  validate(s);
  return s;
}

}  // namespace nlirf
