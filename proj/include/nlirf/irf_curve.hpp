#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlirf {

enum class Route { direct, local_projection, oracle };

inline std::string to_string(Route r) {
  switch (r) {
    case Route::direct: return "direct";
    case Route::local_projection: return "local_projection";
    case Route::oracle: return "oracle";
  }
  return "unknown";
}

inline Route route_from_string(const std::string& s) {
  if (s == "direct") return Route::direct;
  if (s == "local_projection" || s == "lp") return Route::local_projection;
  if (s == "oracle" || s == "true") return Route::oracle;
  throw std::invalid_argument("unknown route '" + s + "'");
}

/// Echo of the request that produced a curve.
struct IrfMeta {
  std::vector<double> y0;
  std::vector<double> delta;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  Route route = Route::direct;
  bool closed_form = false;
};

/// Horizon-indexed responses; index k holds horizon k + 1.
struct IrfCurve {
  std::vector<double> value;
  std::vector<double> mc_se;
  std::vector<std::size_t> rejected_reps;
  IrfMeta meta;

  std::size_t horizons() const { return value.size(); }
  double at(std::size_t h) const { return value.at(h - 1); }
  double se_at(std::size_t h) const { return mc_se.at(h - 1); }
};

}  // namespace nlirf
