/**
 * @brief JSON mapping of configuration structs.
 *
 * Readers are strict: unknown keys and wrong types raise ConfigError, and
 * missing keys keep the struct's default. Writers always emit every field,
 * so a written config is the fully resolved one.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <set>
#include <string>

#include "micromech/errors.hpp"
#include "micromech/green.hpp"
#include "micromech/microstructure.hpp"
#include "micromech/solver.hpp"
#include "micromech/tensor.hpp"

namespace micromech {

using Json = nlohmann::json;

/// Reads fields out of one JSON object and rejects keys nobody asked for.
class JsonReader {
 public:
  JsonReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T>
  JsonReader& get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        out = it->template get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path(key) + ": " + e.what());
      }
    }
    return *this;
  }

  /// Nested object handled by `fn(const Json&, std::string where)`.
  template <class F>
  JsonReader& nested(const char* key, F&& fn) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) fn(*it, path(key));
    return *this;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown key");
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

// Enumerations.

inline FreqScheme parse_scheme(const std::string& s) {
  if (s == "rotated_grid") return FreqScheme::RotatedGrid;
  if (s == "continuous") return FreqScheme::Continuous;
  throw ConfigError("unknown frequency scheme '" + s + "' (expected rotated_grid or continuous)");
}

inline const char* scheme_key(FreqScheme s) {
  return s == FreqScheme::RotatedGrid ? "rotated_grid" : "continuous";
}

inline ResidualFrequencies parse_residual_freqs(const std::string& s) {
  if (s == "scheme") return ResidualFrequencies::Scheme;
  if (s == "continuous") return ResidualFrequencies::Continuous;
  throw ConfigError("unknown residual frequencies '" + s + "' (expected scheme or continuous)");
}

inline const char* residual_freqs_key(ResidualFrequencies r) {
  return r == ResidualFrequencies::Scheme ? "scheme" : "continuous";
}

// SolverConfig

inline Json to_json(const SolverConfig& c) {
  return {{"tol", c.tol},
          {"max_iter", c.max_iter},
          {"scheme", scheme_key(c.scheme)},
          {"residual_frequencies", residual_freqs_key(c.residual_freqs)},
          {"record_history", c.record_history}};
}

inline SolverConfig solver_config_from_json(const Json& j, const std::string& where = "solver") {
  SolverConfig c;
  std::string scheme = scheme_key(c.scheme), rf = residual_freqs_key(c.residual_freqs);
  JsonReader r(j, where);
  r.get("tol", c.tol).get("max_iter", c.max_iter).get("scheme", scheme);
  r.get("residual_frequencies", rf).get("record_history", c.record_history).finish();
  c.scheme = parse_scheme(scheme);
  c.residual_freqs = parse_residual_freqs(rf);
  return c;
}

// IsotropicProps

inline Json to_json(const IsotropicProps& p) { return {{"E", p.E}, {"nu", p.nu}}; }

inline IsotropicProps props_from_json(const Json& j, const std::string& where) {
  IsotropicProps p{0.0, 0.0};
  if (!j.contains("E") || !j.contains("nu")) throw ConfigError(where + ": needs E and nu");
  JsonReader(j, where).get("E", p.E).get("nu", p.nu).finish();
  return p;
}

// SpinodalParams

inline Json to_json(const SpinodalParams& p) {
  return {{"steps", p.steps},
          {"dt", p.dt},
          {"interface_width", p.interface_width},
          {"mobility", p.mobility},
          {"threshold", p.threshold},
          {"initial_noise_amplitude", p.initial_noise_amplitude},
          {"stabilization", p.stabilization}};
}

inline SpinodalParams spinodal_from_json(const Json& j, const std::string& where = "spinodal") {
  SpinodalParams p;
  JsonReader(j, where)
      .get("steps", p.steps)
      .get("dt", p.dt)
      .get("interface_width", p.interface_width)
      .get("mobility", p.mobility)
      .get("threshold", p.threshold)
      .get("initial_noise_amplitude", p.initial_noise_amplitude)
      .get("stabilization", p.stabilization)
      .finish();
  return p;
}

// FiberPackingOptions

inline Json to_json(const FiberPackingOptions& o) {
  return {{"gap_frac", o.gap_frac},
          {"rsa_attempts", o.rsa_attempts},
          {"max_stir_sweeps", o.max_stir_sweeps},
          {"stall_sweeps", o.stall_sweeps},
          {"raster_tolerance", o.raster_tolerance},
          {"vof_tolerance", o.vof_tolerance},
          {"max_correction_rounds", o.max_correction_rounds}};
}

inline FiberPackingOptions packing_from_json(const Json& j, const std::string& where = "packing") {
  FiberPackingOptions o;
  JsonReader(j, where)
      .get("gap_frac", o.gap_frac)
      .get("rsa_attempts", o.rsa_attempts)
      .get("max_stir_sweeps", o.max_stir_sweeps)
      .get("stall_sweeps", o.stall_sweeps)
      .get("raster_tolerance", o.raster_tolerance)
      .get("vof_tolerance", o.vof_tolerance)
      .get("max_correction_rounds", o.max_correction_rounds)
      .finish();
  return o;
}

inline Json to_json(const Voigt4& c) {
  Json rows = Json::array();
  for (const auto& r : c.m) rows.push_back({r[0], r[1], r[2]});
  return rows;
}

inline Json to_json(const Voigt2& e) { return {e[0], e[1], e[2]}; }

inline Voigt2 voigt2_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [e11, e22, e12]");
  Voigt2 e;
  try {
    for (std::size_t i = 0; i < 3; ++i) e[i] = j[i].get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(where + ": " + ex.what());
  }
  return e;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

/// Applies a dotted-path override such as "solver.tol=1e-8". The value is
/// parsed as JSON when possible and taken as a plain string otherwise.
inline void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  Json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty path segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override '" + key + "' descends into a non-object");
      *node = Json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace micromech
