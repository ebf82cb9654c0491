#pragma once

// Flat key = value configuration files.
//
//   dimension        = 2 | 3
//   omega            = lo_1 hi_1 ... lo_d hi_d      (default: unit cube)
//   interval         = t0 t1                        (default: 0 1)
//   profile.kind     = step | bump | table          (default: step)
//   profile.height   = E after the step             (step, default 1)
//   profile.step_at  = step time                    (step, default t0)
//   profile.amplitude= bump amplitude               (bump, default 1)
//   profile.table    = CSV path "t,E" relative to the config file (table)
//   grid.nt, grid.nx = quadrature cells in time / per space axis (default 64)
//   solver.max_steps, solver.k0, solver.tolJ, solver.seed, solver.epsE, solver.theta
//
// '#' starts a comment; blank lines are ignored; unknown keys are errors.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "convint/constraint.hpp"
#include "convint/profile.hpp"
#include "convint/solver.hpp"
#include "convint/types.hpp"

namespace convint::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "dimension",     "omega",        "interval",    "profile.kind",     "profile.height", "profile.step_at",
      "profile.amplitude", "profile.table", "grid.nt", "grid.nx",          "solver.max_steps", "solver.k0",
      "solver.tolJ",   "solver.seed",  "solver.epsE", "solver.theta"};
  return keys;
}

struct Config {
  std::map<std::string, std::string> values;
  std::filesystem::path base_dir;

  bool has(const std::string& k) const { return values.count(k) > 0; }

  /// Canonical text: known keys in sorted order, one per line.
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values) os << k << " = " << v << '\n';
    return os.str();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
  return v;
}

inline long long to_int(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
  return v;
}

inline std::vector<double> numbers(const Config& c, const std::string& key, std::size_t count) {
  const auto w = words(c.values.at(key));
  if (w.size() != count)
    throw ConfigError("config key '" + key + "': expected " + std::to_string(count) + " numbers, got " + std::to_string(w.size()));
  std::vector<double> out;
  for (const auto& s : w) out.push_back(to_double(key, s));
  return out;
}

inline double number(const Config& c, const std::string& key, double fallback) {
  return c.has(key) ? numbers(c, key, 1)[0] : fallback;
}

inline long long integer(const Config& c, const std::string& key, long long fallback) {
  if (!c.has(key)) return fallback;
  const auto w = words(c.values.at(key));
  if (w.size() != 1) throw ConfigError("config key '" + key + "': expected one integer");
  return to_int(key, w[0]);
}

}  // namespace detail

inline Config parse(std::istream& in, std::filesystem::path base_dir = {}) {
  Config c;
  c.base_dir = std::move(base_dir);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    bool known = false;
    for (const auto& k : known_keys()) known = known || k == key;
    if (!known) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    if (c.has(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    c.values[key] = value;
  }
  if (!c.has("dimension")) throw ConfigError("config: missing required key 'dimension'");
  return c;
}

inline Config parse_string(const std::string& text, std::filesystem::path base_dir = {}) {
  std::istringstream in(text);
  return parse(in, std::move(base_dir));
}

inline Config load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  return parse(in, path.parent_path());
}

inline EnergyProfile make_profile(const Config& c, double t0, double t1) {
  const std::string kind = c.has("profile.kind") ? c.values.at("profile.kind") : "step";
  try {
    if (kind == "step")
      return EnergyProfile::step(t0, t1, detail::number(c, "profile.height", 1.0), detail::number(c, "profile.step_at", t0));
    if (kind == "bump") return EnergyProfile::bump(t0, t1, detail::number(c, "profile.amplitude", 1.0));
    if (kind == "table") {
      if (!c.has("profile.table")) throw ConfigError("config: table profile needs 'profile.table'");
      std::filesystem::path p = c.values.at("profile.table");
      if (p.is_relative()) p = c.base_dir / p;
      return EnergyProfile::table_from_csv_file(t0, t1, p.string());
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  throw ConfigError("config key 'profile.kind': unknown kind '" + kind + "'");
}

inline solver::SolverConfig to_solver_config(const Config& c) {
  const long long d = detail::integer(c, "dimension", 2);
  if (d != 2 && d != 3) throw ConfigError("config key 'dimension': must be 2 or 3");
  constraint::Box box = constraint::unit_box(static_cast<int>(d));
  if (c.has("omega")) {
    const auto v = detail::numbers(c, "omega", static_cast<std::size_t>(2 * d));
    for (int i = 0; i < d; ++i) {
      box.lo(i) = v[static_cast<std::size_t>(2 * i)];
      box.hi(i) = v[static_cast<std::size_t>(2 * i + 1)];
    }
  }
  double t0 = 0.0, t1 = 1.0;
  if (c.has("interval")) {
    const auto v = detail::numbers(c, "interval", 2);
    t0 = v[0];
    t1 = v[1];
  }
  solver::SolverConfig out = [&] {
    try {
      return solver::SolverConfig(constraint::ConstraintParams(static_cast<int>(d), box, make_profile(c, t0, t1)));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }();
  out.nt = static_cast<int>(detail::integer(c, "grid.nt", out.nt));
  out.nx = static_cast<int>(detail::integer(c, "grid.nx", out.nx));
  out.max_steps = static_cast<int>(detail::integer(c, "solver.max_steps", out.max_steps));
  out.k0 = static_cast<int>(detail::integer(c, "solver.k0", out.k0));
  out.tol_J = detail::number(c, "solver.tolJ", out.tol_J);
  const long long seed = detail::integer(c, "solver.seed", 0);
  if (seed < 0) throw ConfigError("config key 'solver.seed': must be non-negative");
  out.seed = static_cast<std::uint64_t>(seed);
  out.eps_E = detail::number(c, "solver.epsE", out.eps_E);
  out.theta = detail::number(c, "solver.theta", out.theta);
  try {
    out.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return out;
}

}  // namespace convint::config
