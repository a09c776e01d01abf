#pragma once

/** @file
 * Experiment orchestration behind the nlirf command-line tool.
 *
 * A config file holds a format version, a master seed and one section per
 * subcommand. Each run writes manifest.json (the fully resolved config, which
 * is itself a valid config) and stamps its SHA-256 into every output.
 * Subcommand k draws from substream_seed(master, k + 1), so the subcommands
 * never share draws.
 */

#include "nlirf/core.hpp"
#include "nlirf/hermite_decomp.hpp"
#include "nlirf/ident_suite.hpp"
#include "nlirf/io.hpp"
#include "nlirf/irf_engine.hpp"
#include "nlirf/kernel_lab.hpp"
#include "nlirf/model_zoo.hpp"
#include "nlirf/qmle_dar.hpp"
#include "nlirf/rate_bench.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nlirf {

inline constexpr const char* kFormatVersion = "1";

inline const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"simulate", "qmle", "irf", "decompose", "identify", "markov-test", "bench"};
  return names;
}

/// Config-file section key of a subcommand ("markov-test" -> "markov_test").
inline std::string section_key(const std::string& sub) {
  std::string k = sub;
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

inline std::uint64_t subcommand_seed(std::uint64_t master, const std::string& sub) {
  const auto& n = subcommand_names();
  const auto it = std::find(n.begin(), n.end(), sub);
  if (it == n.end()) throw std::invalid_argument("unknown subcommand '" + sub + "'");
  return substream_seed(master, static_cast<std::uint64_t>(it - n.begin()) + 1);
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : md) {
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

/// Observed series: read from `input`, or simulated from `model` (substream 0).
struct DataSource {
  std::optional<std::string> input;
  std::optional<ModelSpec> model;
  std::size_t T = 200;
  double y_start = 0.0;
  std::size_t burn_in = 0;
};

inline DataSource data_source_from_json(const json& j, const std::string& where) {
  DataSource d;
  if (j.contains("input")) d.input = j.at("input").get<std::string>();
  if (j.contains("model")) d.model = model_from_json(j.at("model"));
  d.T = detail::get_or(j, "T", d.T);
  d.y_start = detail::get_or(j, "y_start", d.y_start);
  d.burn_in = detail::get_or(j, "burn_in", d.burn_in);
  if (!d.input && !d.model) throw std::invalid_argument(where + ": needs 'input' or 'model'");
  if (d.input && !std::filesystem::exists(*d.input)) throw std::invalid_argument(where + ": input '" + *d.input + "' does not exist");
  return d;
}

inline void data_source_to_json(const DataSource& d, json& j) {
  if (d.input) j["input"] = *d.input;
  if (d.model) j["model"] = to_json(*d.model);
  j["T"] = d.T;
  j["y_start"] = d.y_start;
  j["burn_in"] = d.burn_in;
}

inline TimeSeries load_data(const DataSource& d, std::uint64_t seed) {
  if (d.input) return ingest_csv(*d.input);
  return simulate(*d.model, static_cast<Eigen::Index>(d.T), Eigen::VectorXd::Constant(model_dim(*d.model), d.y_start),
                  substream_seed(seed, 0), static_cast<Eigen::Index>(d.burn_in));
}

#define NLIRF_DATA_KEYS "input", "model", "T", "y_start", "burn_in"

/**
 * Fill defaults in a subcommand section and re-serialize it. Unknown keys
 * and invalid values throw.
 */
inline json resolve_section(const std::string& sub, const json& in) {
  const std::string where = section_key(sub);
  json out;
  if (sub == "simulate") {
    detail::check_keys(in, {"model", "T", "y0", "burn_in", "density_points"}, where);
    const ModelSpec m = in.contains("model") ? model_from_json(in.at("model")) : ModelSpec{DarParams{0.5, 1.0, 0.5}};
    out["model"] = to_json(m);
    out["T"] = detail::get_or<std::size_t>(in, "T", 200);
    out["y0"] = detail::get_or(in, "y0", 0.0);
    out["burn_in"] = detail::get_or<std::size_t>(in, "burn_in", 0);
    out["density_points"] = detail::get_or<std::size_t>(in, "density_points", 200);
    if (out["T"].get<std::size_t>() < 2) throw std::invalid_argument("simulate: T must be >= 2");
    if (out["density_points"].get<std::size_t>() < 2) throw std::invalid_argument("simulate: density_points must be >= 2");
  } else if (sub == "qmle") {
    detail::check_keys(in, {NLIRF_DATA_KEYS, "grid"}, where);
    data_source_to_json(data_source_from_json(in, where), out);
    out["grid"] = to_json(in.contains("grid") ? grid_from_json(in.at("grid")) : GridSpec{});
  } else if (sub == "irf" || sub == "decompose") {
    const bool irf = sub == "irf";
    if (irf)
      detail::check_keys(in, {NLIRF_DATA_KEYS, "y0", "horizons", "deltas", "replications", "kernel"}, where);
    else
      detail::check_keys(in, {NLIRF_DATA_KEYS, "y0", "horizons", "delta", "replications", "kernel", "degree", "route"}, where);
    const DataSource d = data_source_from_json(in, where);
    if (d.model && model_dim(*d.model) != 1) throw std::invalid_argument(where + ": model must be univariate");
    data_source_to_json(d, out);
    IrfRequest r;
    r.y0 = detail::get_or(in, "y0", 0.0);
    r.horizons = detail::get_or<std::size_t>(in, "horizons", 10);
    r.replications = detail::get_or<std::size_t>(in, "replications", 10000);
    if (in.contains("kernel")) r.kernel = kernel_from_json(in.at("kernel"));
    validate(r);
    out["y0"] = r.y0;
    out["horizons"] = r.horizons;
    out["replications"] = r.replications;
    out["kernel"] = to_json(r.kernel);
    if (irf) {
      const auto deltas = detail::get_or(in, "deltas", std::vector<double>{-1.0, -0.5, 0.5, 1.0});
      if (deltas.empty()) throw std::invalid_argument("irf: deltas must be non-empty");
      for (double v : deltas)
        if (!std::isfinite(v)) throw std::invalid_argument("irf: non-finite delta");
      out["deltas"] = deltas;
    } else {
      const double delta = detail::get_or(in, "delta", 0.5);
      const int degree = detail::get_or(in, "degree", 5);
      const Route route = route_from_string(detail::get_or<std::string>(in, "route", "direct"));
      if (route == Route::oracle) throw std::invalid_argument("decompose: route must be direct or local_projection");
      if (degree < 1) throw std::invalid_argument("decompose: degree must be >= 1");
      if (!std::isfinite(delta)) throw std::invalid_argument("decompose: non-finite delta");
      out["delta"] = delta;
      out["degree"] = degree;
      out["route"] = to_string(route);
    }
  } else if (sub == "identify") {
    detail::check_keys(in, {NLIRF_DATA_KEYS, "max_lag"}, where);
    const DataSource d = data_source_from_json(in, where);
    if (d.model && model_dim(*d.model) != 2) throw std::invalid_argument(where + ": model must be bivariate");
    data_source_to_json(d, out);
    out["max_lag"] = detail::get_or<std::size_t>(in, "max_lag", 10);
    if (out["max_lag"].get<std::size_t>() < 2) throw std::invalid_argument("identify: max_lag must be >= 2");
  } else if (sub == "markov-test") {
    detail::check_keys(in, {NLIRF_DATA_KEYS, "block_len", "bootstrap_reps", "level", "kernel"}, where);
    const DataSource d = data_source_from_json(in, where);
    if (d.model && model_dim(*d.model) != 1) throw std::invalid_argument(where + ": model must be univariate");
    data_source_to_json(d, out);
    out["block_len"] = in.contains("block_len") ? in.at("block_len") : json(nullptr);
    if (!out["block_len"].is_null() && out["block_len"].get<std::size_t>() < 1)
      throw std::invalid_argument("markov_test: block_len must be >= 1");
    out["bootstrap_reps"] = detail::get_or<std::size_t>(in, "bootstrap_reps", 500);
    out["level"] = detail::get_or(in, "level", 0.05);
    const double lv = out["level"].get<double>();
    if (!(lv > 0.0 && lv < 1.0)) throw std::invalid_argument("markov_test: level must lie in (0, 1)");
    out["kernel"] = to_json(in.contains("kernel") ? kernel_from_json(in.at("kernel")) : KernelConfig{});
  } else if (sub == "bench") {
    out = to_json(sweep_from_json(in));
  } else {
    throw std::invalid_argument("unknown subcommand '" + sub + "'");
  }
  return out;
}

#undef NLIRF_DATA_KEYS

struct RunConfig {
  std::string subcommand;
  std::string version = kFormatVersion;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
  /// Resolved section of this subcommand.
  json section = json::object();

  json manifest() const {
    return json{{"version", version}, {"seed", seed}, {"subcommand", subcommand}, {section_key(subcommand), section}};
  }
  std::string manifest_hash() const { return sha256_hex(manifest().dump()); }
};

/**
 * Build a RunConfig from a parsed config file and command-line overrides.
 * Sections of other subcommands are resolved too, so a bad key anywhere fails.
 */
inline RunConfig resolve_config(const std::string& sub, const json& file, std::optional<std::uint64_t> seed_override,
                                const std::filesystem::path& out_dir) {
  std::vector<const char*> allowed{"version", "seed", "subcommand"};
  std::vector<std::string> keys;
  for (const auto& n : subcommand_names()) keys.push_back(section_key(n));
  const json cfg = file.is_null() ? json::object() : file;
  if (!cfg.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [k, v] : cfg.items()) {
    const bool known = std::find(keys.begin(), keys.end(), k) != keys.end() ||
                       std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
    if (!known) throw std::invalid_argument("config: unknown key '" + k + "'");
  }
  RunConfig rc;
  rc.subcommand = sub;
  subcommand_seed(0, sub);  // throws on an unknown subcommand
  rc.version = detail::get_or<std::string>(cfg, "version", kFormatVersion);
  if (rc.version != kFormatVersion) throw std::invalid_argument("config: unrecognized version '" + rc.version + "'");
  if (cfg.contains("subcommand") && cfg.at("subcommand").get<std::string>() != sub)
    throw std::invalid_argument("config: written for subcommand '" + cfg.at("subcommand").get<std::string>() + "'");
  rc.seed = seed_override ? *seed_override : detail::get_or<std::uint64_t>(cfg, "seed", 0);
  rc.out_dir = out_dir;
  for (const auto& n : subcommand_names()) {
    const auto k = section_key(n);
    if (n == sub) rc.section = resolve_section(n, cfg.contains(k) ? cfg.at(k) : json::object());
    else if (cfg.contains(k)) resolve_section(n, cfg.at(k));
  }
  return rc;
}

namespace detail {

class OutputSet {
 public:
  OutputSet(const RunConfig& rc) : dir_(rc.out_dir), hash_(rc.manifest_hash()) {
    std::filesystem::create_directories(dir_);
    std::ofstream m(dir_ / "manifest.json", std::ios::binary);
    if (!m) throw std::runtime_error("cannot write to output directory '" + dir_.string() + "'");
    m << rc.manifest().dump(2) << '\n';
  }

  /// Open a CSV output whose first line is the manifest hash comment.
  std::ofstream csv(const std::string& name) const {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + (dir_ / name).string() + "'");
    f << "# manifest_sha256=" << hash_ << '\n';
    return f;
  }

  /// JSON outputs carry the hash as a top-level key.
  void write_json(const std::string& name, json j) const {
    j["manifest_sha256"] = hash_;
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + (dir_ / name).string() + "'");
    f << j.dump(2) << '\n';
  }

 private:
  std::filesystem::path dir_;
  std::string hash_;
};

inline DataSource data_of(const json& s) {
  DataSource d;
  if (s.contains("input")) d.input = s.at("input").get<std::string>();
  if (s.contains("model")) d.model = model_from_json(s.at("model"));
  d.T = s.at("T").get<std::size_t>();
  d.y_start = s.at("y_start").get<double>();
  d.burn_in = s.at("burn_in").get<std::size_t>();
  return d;
}

inline std::string delta_label(double d) {
  std::string s = format_number(d);
  for (auto& c : s)
    if (c == '-') c = 'm';
  return s;
}

inline void run_simulate(const RunConfig& rc, const OutputSet& out, std::uint64_t seed) {
  const auto& s = rc.section;
  const ModelSpec m = model_from_json(s.at("model"));
  const auto series = simulate(m, s.at("T").get<Eigen::Index>(), Eigen::VectorXd::Constant(model_dim(m), s.at("y0").get<double>()),
                               substream_seed(seed, 0), s.at("burn_in").get<Eigen::Index>());
  auto traj = out.csv("trajectory.csv");
  write_series_csv(traj, series);

  auto dens = out.csv("density.csv");
  dens << "component,y,density\n";
  const auto points = s.at("density_points").get<std::size_t>();
  for (Eigen::Index k = 0; k < series.dim(); ++k) {
    const auto col = series.column(k);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const double step = (*hi - *lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
      const double y = *lo + step * static_cast<double>(i);
      dens << (k + 1) << ',' << format_number(y) << ',' << format_number(kde(col, y, KernelConfig{})) << '\n';
    }
  }
}

inline void run_qmle(const RunConfig& rc, const OutputSet& out, std::uint64_t seed) {
  const auto series = load_data(data_of(rc.section), seed);
  out.write_json("qmle.json", to_json(qmle_grid_search(series, grid_from_json(rc.section.at("grid")))));
}

inline IrfRequest request_of(const json& s) {
  IrfRequest r;
  r.y0 = s.at("y0").get<double>();
  r.horizons = s.at("horizons").get<std::size_t>();
  r.replications = s.at("replications").get<std::size_t>();
  r.kernel = kernel_from_json(s.at("kernel"));
  return r;
}

inline void write_irf_rows(std::ostream& f, const IrfCurve& c, const std::string& route, double delta) {
  for (std::size_t k = 0; k < c.horizons(); ++k) {
    f << (k + 1) << ',' << route << ',' << format_number(delta) << ',' << format_number(c.value[k]) << ','
      << format_number(c.mc_se[k]) << ',' << c.rejected_reps[k] << '\n';
  }
}

inline void run_irf(const RunConfig& rc, const OutputSet& out, std::uint64_t seed) {
  const auto& s = rc.section;
  const DataSource d = data_of(s);
  const auto series = load_data(d, seed);
  IrfRequest req = request_of(s);
  // every delta shares the same innovations
  req.seed = substream_seed(seed, 1);
  for (double delta : s.at("deltas").get<std::vector<double>>()) {
    req.delta = delta;
    auto f = out.csv("irf_delta_" + delta_label(delta) + ".csv");
    f << "horizon,route,delta,value,mc_se,rejected_reps\n";
    if (d.model) write_irf_rows(f, true_irf(*d.model, req.y0, req.horizons, delta, req.replications, substream_seed(seed, 2)), "true", delta);
    req.route = Route::direct;
    write_irf_rows(f, irf_direct(series, req), "direct", delta);
    req.route = Route::local_projection;
    write_irf_rows(f, irf_lp(series, req), "lp", delta);
  }
}

inline void run_decompose(const RunConfig& rc, const OutputSet& out, std::uint64_t seed) {
  const auto& s = rc.section;
  const auto series = load_data(data_of(s), seed);
  IrfRequest req = request_of(s);
  req.delta = s.at("delta").get<double>();
  req.route = route_from_string(s.at("route").get<std::string>());
  req.seed = substream_seed(seed, 1);
  const auto parts = decompose_series(series, req, s.at("degree").get<int>());
  auto f = out.csv("decompose.csv");
  f << "h,delta,degree,coefficient,contribution\n";
  const std::string dl = format_number(req.delta);
  for (const auto& p : parts) {
    for (Eigen::Index j = 0; j < p.coefficients.size(); ++j)
      f << p.horizon << ',' << dl << ',' << j << ',' << format_number(p.coefficients(j)) << ','
        << format_number(p.contributions(j)) << '\n';
    f << p.horizon << ',' << dl << ",linear,," << format_number(p.linear_part) << '\n';
    f << p.horizon << ',' << dl << ",nonlinear,," << format_number(p.nonlinear_part) << '\n';
    f << p.horizon << ',' << dl << ",total,," << format_number(p.reconstructed_total) << '\n';
    f << p.horizon << ',' << dl << ",irf,," << format_number(p.irf_estimate) << '\n';
  }
}

inline void run_identify(const RunConfig& rc, const OutputSet& out, std::uint64_t seed) {
  const auto& s = rc.section;
  const auto series = load_data(data_of(s), seed);
  const auto est = recover_mixing(series, s.at("max_lag").get<std::size_t>());
  json cands = json::array();
  for (const auto& c : est.candidates) {
    cands.push_back({{"a12", c.a12}, {"a21", c.a21}, {"A", matrix_to_json(c.A)}, {"residual_norm", c.residual_norm}});
  }
  out.write_json("identify.json", json{{"candidates", cands},
                                       {"chosen", est.chosen},
                                       {"coef_g11", est.coef_g11},
                                       {"coef_g22", est.coef_g22},
                                       {"regression_residual_norm", est.regression_residual_norm},
                                       {"condition_number", est.condition_number},
                                       {"discriminant_clamped", est.discriminant_clamped}});
}

inline void run_markov(const RunConfig& rc, const OutputSet& out, std::uint64_t seed) {
  const auto& s = rc.section;
  const auto series = load_data(data_of(s), seed);
  const auto y = series.univariate_view();
  const auto basis = default_markov_basis(y);
  const std::size_t block = s.at("block_len").is_null() ? default_block_length(y.size()) : s.at("block_len").get<std::size_t>();
  const auto r = markov_moment_test(series, basis, block, s.at("bootstrap_reps").get<std::size_t>(), substream_seed(seed, 1),
                                    kernel_from_json(s.at("kernel")), s.at("level").get<double>());
  json names = json::array();
  for (const auto& b : basis) names.push_back(b.name);
  out.write_json("markov_test.json", json{{"basis", names},
                                          {"moments", std::vector<double>(r.moments.data(), r.moments.data() + r.moments.size())},
                                          {"statistic", r.statistic},
                                          {"critical_value", r.critical_value},
                                          {"p_value", r.p_value},
                                          {"dof", r.dof},
                                          {"reject", r.reject},
                                          {"block_len", r.block_len},
                                          {"bootstrap_reps", r.bootstrap_reps},
                                          {"level", s.at("level")}});
}

inline void run_bench(const RunConfig& rc, const OutputSet& out, std::uint64_t seed) {
  SweepSpec spec = sweep_from_json(rc.section);
  spec.master_seed = seed;
  const auto rep = run_sweep(spec);
  auto f = out.csv("bench.csv");
  f << "T,seed,route,target,estimate,oracle,abs_err\n";
  for (const auto& r : rep.rows)
    f << r.T << ',' << r.seed_index << ',' << r.route << ',' << r.target << ',' << format_number(r.estimate) << ','
      << format_number(r.oracle) << ',' << format_number(r.abs_err) << '\n';
  auto g = out.csv("bench_summary.csv");
  g << "T,route,target,rmse,mean_bandwidth,cells,failed\n";
  for (const auto& r : rep.summary)
    g << r.T << ',' << r.route << ',' << r.target << ',' << format_number(r.rmse) << ',' << format_number(r.mean_bandwidth)
      << ',' << r.cells << ',' << r.failed << '\n';
  auto h = out.csv("bench_rates.csv");
  h << "kind,T,route,target,value,defined\n";
  for (const auto& sl : rep.slopes)
    h << "slope,," << sl.route << ',' << sl.target << ',' << format_number(sl.slope) << ',' << (sl.defined ? 1 : 0) << '\n';
  for (const auto& ra : rep.ratios)
    h << "direct_lp_ratio," << ra.T << ",," << ra.target << ',' << format_number(ra.ratio) << ",1\n";
}

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const InsufficientLocalData*>(&e)) return "insufficient_local_data";
  if (dynamic_cast<const DegenerateDynamics*>(&e)) return "degenerate_dynamics";
  if (dynamic_cast<const json::exception*>(&e)) return "config";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  if (dynamic_cast<const std::domain_error*>(&e)) return "domain_error";
  return "runtime_error";
}

}  // namespace detail

/// Execute a resolved config; throws on any module error.
inline void execute(const RunConfig& rc) {
  const detail::OutputSet out(rc);
  const std::uint64_t seed = subcommand_seed(rc.seed, rc.subcommand);
  const auto& sub = rc.subcommand;
  if (sub == "simulate") detail::run_simulate(rc, out, seed);
  else if (sub == "qmle") detail::run_qmle(rc, out, seed);
  else if (sub == "irf") detail::run_irf(rc, out, seed);
  else if (sub == "decompose") detail::run_decompose(rc, out, seed);
  else if (sub == "identify") detail::run_identify(rc, out, seed);
  else if (sub == "markov-test") detail::run_markov(rc, out, seed);
  else if (sub == "bench") detail::run_bench(rc, out, seed);
  else throw std::invalid_argument("unknown subcommand '" + sub + "'");
}

/// One-line, machine-parsable form of an error: "error: <kind>: <message>".
inline std::string format_error(const std::exception& e) {
  std::string msg = e.what();
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  return "error: " + detail::error_kind(e) + ": " + msg;
}

/**
 * Resolve and execute. Returns 0 on success; otherwise writes a single
 * error line to `err` and returns 1.
 */
inline int run(const std::string& sub, const std::optional<std::filesystem::path>& config_path,
               std::optional<std::uint64_t> seed, const std::filesystem::path& out_dir, std::ostream& err) {
  try {
    json file;
    if (config_path) {
      std::ifstream in(*config_path);
      if (!in) throw std::invalid_argument("cannot open config '" + config_path->string() + "'");
      file = json::parse(in);
    }
    execute(resolve_config(sub, file, seed, out_dir));
    return 0;
  } catch (const std::exception& e) {
    err << format_error(e) << '\n';
    return 1;
  }
}

}  // namespace nlirf
