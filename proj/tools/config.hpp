#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdlab/error.hpp"
#include "rdlab/graph_kernel.hpp"
#include "rdlab/rates.hpp"

namespace rdlab::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 1;

struct RunSettings {
  double horizon = 1.0;
  double sample_dt = 0.1;
  std::uint64_t replicas = 1;
  std::optional<std::uint64_t> seed;
  std::uint64_t max_events = 100'000'000;
  std::optional<double> mass_cap;

  bool operator==(const RunSettings&) const = default;
};

struct SdeSettings {
  double dt = 1e-3;

  bool operator==(const SdeSettings&) const = default;
};

struct RunConfig {
  std::optional<std::string> preset;
  ModelParams model;
  SiteKernel kernel;
  DensityVector rho0{1.0};
  RunSettings run;
  std::optional<SdeSettings> sde;

  bool operator==(const RunConfig&) const = default;

  void validate() const {
    try {
      model.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    if (rho0.size() != kernel.site_count())
      throw ConfigError("rho0 has " + std::to_string(rho0.size()) + " entries but the kernel has " +
                        std::to_string(kernel.site_count()) + " sites");
    if (!(run.horizon > 0.0) || !std::isfinite(run.horizon)) throw ConfigError("run.horizon must be > 0");
    if (!(run.sample_dt > 0.0) || !std::isfinite(run.sample_dt)) throw ConfigError("run.sample_dt must be > 0");
    if (run.replicas < 1) throw ConfigError("run.replicas must be >= 1");
    if (run.max_events < 1) throw ConfigError("run.max_events must be >= 1");
    if (run.mass_cap && !(*run.mass_cap > 0.0)) throw ConfigError("run.mass_cap must be > 0");
    if (sde && (!(sde->dt > 0.0) || sde->dt > run.horizon)) throw ConfigError("sde.dt must be in (0, horizon]");
  }

  std::uint64_t resolved_seed() const {
    if (run.seed) return *run.seed;
    if (const char* env = std::getenv("RD_SEED")) {
      try {
        std::size_t used = 0;
        const std::string s(env);
        const auto v = std::stoull(s, &used);
        if (used == s.size() && !s.empty() && s[0] != '-') return v;
      } catch (const std::exception&) {
      }
      throw ConfigError("RD_SEED is not an unsigned integer");
    }
    return kDefaultSeed;
  }

  double sde_dt() const { return sde ? sde->dt : SdeSettings{}.dt; }
};

// ---------------------------------------------------------------- presets

inline std::vector<std::string> preset_names() { return {"feller", "anderson", "quadratic", "critical"}; }

inline RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.sde = SdeSettings{};
  if (name == "feller") {
    c.model = ModelParams{1.0, 1.0, 1, 1, 100};
  } else if (name == "anderson") {
    c.model = ModelParams{1.0, 0.0, 1, 2, 100};
    c.kernel = SiteKernel::ring(3);
    c.rho0 = DensityVector(3, 1.0);
  } else if (name == "quadratic") {
    c.model = ModelParams{1.0, 1.0, 2, 1, 100};
    c.kernel = SiteKernel({{0.0, 1.0}, {1.0, 0.0}});
    c.rho0 = DensityVector{1.0, 0.5};
    c.run.horizon = 0.5;
    c.run.sample_dt = 0.05;
  } else if (name == "critical") {
    c.model = ModelParams{1.0, 1.0, 2, 2, 100};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------- parsing

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

inline double number(const Json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError(what + " must be a number");
  return v.get<double>();
}

inline std::int64_t integer(const Json& v, const std::string& what) {
  if (!v.is_number_integer()) throw ConfigError(what + " must be an integer");
  return v.get<std::int64_t>();
}

inline std::uint64_t unsigned_integer(const Json& v, const std::string& what) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(what + " must be a nonnegative integer");
}

inline std::vector<double> vector_of(const Json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError(what + " must be an array");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(x, what + " entry"));
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const Json& j) {
  detail::reject_unknown(j, {"preset", "model", "kernel", "rho0", "run", "sde"}, "config");
  RunConfig c;
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("preset must be a string");
    c = preset(j["preset"].get<std::string>());
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    detail::reject_unknown(m, {"alpha", "beta", "k", "ell", "n"}, "model");
    if (m.contains("alpha")) c.model.alpha = detail::number(m["alpha"], "model.alpha");
    if (m.contains("beta")) c.model.beta = detail::number(m["beta"], "model.beta");
    if (m.contains("k")) c.model.k = static_cast<int>(detail::integer(m["k"], "model.k"));
    if (m.contains("ell")) c.model.ell = static_cast<int>(detail::integer(m["ell"], "model.ell"));
    if (m.contains("n")) c.model.n = detail::integer(m["n"], "model.n");
  }
  try {
    if (j.contains("kernel")) {
      const auto& k = j["kernel"];
      if (!k.is_array()) throw ConfigError("kernel must be an array of arrays");
      std::vector<std::vector<double>> rows;
      for (const auto& row : k) rows.push_back(detail::vector_of(row, "kernel row"));
      c.kernel = SiteKernel(rows);
    }
    if (j.contains("rho0")) c.rho0 = DensityVector(detail::vector_of(j["rho0"], "rho0"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("run")) {
    const auto& r = j["run"];
    detail::reject_unknown(r, {"horizon", "sample_dt", "replicas", "seed", "max_events", "mass_cap"}, "run");
    if (r.contains("horizon")) c.run.horizon = detail::number(r["horizon"], "run.horizon");
    if (r.contains("sample_dt")) c.run.sample_dt = detail::number(r["sample_dt"], "run.sample_dt");
    if (r.contains("replicas")) c.run.replicas = detail::unsigned_integer(r["replicas"], "run.replicas");
    if (r.contains("seed")) c.run.seed = detail::unsigned_integer(r["seed"], "run.seed");
    if (r.contains("max_events")) c.run.max_events = detail::unsigned_integer(r["max_events"], "run.max_events");
    if (r.contains("mass_cap")) c.run.mass_cap = detail::number(r["mass_cap"], "run.mass_cap");
  }
  if (j.contains("sde")) {
    const auto& s = j["sde"];
    detail::reject_unknown(s, {"dt"}, "sde");
    c.sde = SdeSettings{};
    if (s.contains("dt")) c.sde->dt = detail::number(s["dt"], "sde.dt");
  }
  c.validate();
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline Json to_json(const RunConfig& c) {
  Json j;
  if (c.preset) j["preset"] = *c.preset;
  j["model"] = Json{{"alpha", c.model.alpha}, {"beta", c.model.beta}, {"k", c.model.k},
                    {"ell", c.model.ell},     {"n", c.model.n}};
  Json kernel = Json::array();
  for (std::size_t x = 0; x < c.kernel.site_count(); ++x) {
    Json row = Json::array();
    for (std::size_t y = 0; y < c.kernel.site_count(); ++y) row.push_back(c.kernel.rate(x, y));
    kernel.push_back(row);
  }
  j["kernel"] = kernel;
  j["rho0"] = c.rho0.vector();
  Json run{{"horizon", c.run.horizon}, {"sample_dt", c.run.sample_dt}, {"replicas", c.run.replicas}};
  if (c.run.seed) run["seed"] = *c.run.seed;
  run["max_events"] = c.run.max_events;
  if (c.run.mass_cap) run["mass_cap"] = *c.run.mass_cap;
  j["run"] = run;
  if (c.sde) j["sde"] = Json{{"dt", c.sde->dt}};
  return j;
}

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rdlab::cli
