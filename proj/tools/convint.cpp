// convint command-line front end.
//
// Exit codes: 0 success, 1 configuration / input / verification failure,
// 2 solver stalled, 3 resolution limited.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "convint/convint.hpp"

namespace fs = std::filesystem;
using namespace convint;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kStalled = 2;
constexpr int kResolutionLimited = 3;

std::string num(double v) { return field::format_double(v); }

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes every file to a temporary sibling first and renames them only after
/// all writes succeeded, so a failed command leaves no partial outputs.
class AtomicOutputs {
 public:
  explicit AtomicOutputs(fs::path dir) : dir_(std::move(dir)) {}
  AtomicOutputs(const AtomicOutputs&) = delete;
  AtomicOutputs& operator=(const AtomicOutputs&) = delete;
  ~AtomicOutputs() {
    if (!committed_)
      for (const auto& [tmp, dst] : files_) {
        std::error_code ec;
        fs::remove(tmp, ec);
      }
  }

  void add(const std::string& name, const std::string& content) {
    fs::create_directories(dir_);
    const fs::path dst = dir_ / name;
    const fs::path tmp = dir_ / ("." + name + ".tmp");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.close();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    files_.emplace_back(tmp, dst);
  }

  void commit() {
    for (const auto& [tmp, dst] : files_) fs::rename(tmp, dst);
    committed_ = true;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.second.filename().string());
    return out;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, fs::path>> files_;
  bool committed_ = false;
};

std::string diagnostics_csv(const solver::RunDiagnostics& diag) {
  std::ostringstream os;
  os << "step,J,I,energy_gap,cover_size,captured,k,gamma,gain,delta,attempts\n";
  for (const auto& r : diag.rows)
    os << r.step << ',' << num(r.J) << ',' << num(r.I) << ',' << num(r.energy_gap) << ',' << r.cover_size << ','
       << num(r.captured) << ',' << r.k << ',' << num(r.gamma) << ',' << num(r.gain) << ',' << num(r.delta) << ','
       << r.attempts << '\n';
  return os.str();
}

std::string energy_csv(const field::CompositeField& f, const Quadrature& q) {
  std::ostringstream os;
  os << "t,E_target,E_actual,quad_error\n";
  for (const auto& r : field::energy_profile(f, field::time_nodes(q), q))
    os << num(r.t) << ',' << num(r.target) << ',' << num(r.actual) << ',' << num(r.error) << '\n';
  return os.str();
}

solver::SolverConfig load_solver_config(const std::string& path, std::optional<std::uint64_t> seed,
                                        config::Config* raw = nullptr) {
  auto cfg = config::load(path);
  if (seed) cfg.values["solver.seed"] = std::to_string(*seed);
  if (raw) *raw = cfg;
  return config::to_solver_config(cfg);
}

field::CompositeField load_field(const std::string& path, int expected_d) {
  std::ifstream in(path);
  if (!in) throw field::FormatError("cannot read field file '" + path + "'");
  return field::deserialize(in, expected_d);
}

// ---------------------------------------------------------------------------

int cmd_solve(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  const std::string started = utc_now();
  config::Config raw;
  solver::SolverConfig cfg = [&] { return load_solver_config(config_path, seed, &raw); }();

  std::cerr << "convint: solving d = " << cfg.params.d() << ", grid " << cfg.nt << " x " << cfg.nx << "^" << cfg.params.d()
            << ", seed " << cfg.seed << '\n';
  const auto res = solver::run(cfg, [](const solver::DiagnosticsRow& r) {
    std::cerr << "  step " << r.step << ": J = " << r.J << ", I = " << r.I << ", energy gap = " << r.energy_gap;
    if (r.step > 0) std::cerr << ", balls = " << r.cover_size << ", k = " << r.k << ", gamma = " << r.gamma;
    std::cerr << '\n';
  });
  const auto& diag = res.diagnostics;
  const Quadrature q(cfg.params, cfg.nt, cfg.nx);

  AtomicOutputs out(out_dir);
  out.add("field.waves", field::serialize(res.field));
  out.add("diagnostics.csv", diagnostics_csv(diag));
  out.add("energy.csv", energy_csv(res.field, q));

  nlohmann::ordered_json m;
  m["tool"] = "convint";
  m["version"] = CONVINT_VERSION;
  m["command"] = "solve";
  m["seed"] = cfg.seed;
  nlohmann::ordered_json c;
  for (const auto& [k, v] : raw.values) c[k] = v;
  m["config"] = c;
  m["inputs"] = {{"config", fs::absolute(config_path).string()}};
  m["outputs"] = {{"dir", fs::absolute(out_dir).string()}, {"files", out.names()}};
  m["status"] = solver::to_string(diag.status);
  m["message"] = diag.message;
  m["energy_constant"] = diag.energy_constant;
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  m["wall_seconds"] = diag.wall_seconds;
  std::vector<double> step_times;
  for (const auto& r : diag.rows) step_times.push_back(r.wall_seconds);
  m["step_wall_seconds"] = step_times;
  out.add("manifest.json", m.dump(2) + "\n");
  out.commit();

  std::cerr << "convint: " << solver::to_string(diag.status);
  if (!diag.message.empty()) std::cerr << " (" << diag.message << ")";
  std::cerr << "; outputs in " << out_dir << '\n';
  switch (diag.status) {
    case solver::Status::stalled: return kStalled;
    case solver::Status::resolution_limited: return kResolutionLimited;
    default: return kOk;
  }
}

int cmd_verify(const std::string& field_path, const std::string& config_path) {
  const auto cfg = load_solver_config(config_path, std::nullopt);
  const auto f = load_field(field_path, cfg.params.d());
  const auto rep = solver::verify(f, cfg);
  std::size_t width = 8;
  for (const auto& p : rep.properties) width = std::max(width, p.name.size());
  for (const auto& p : rep.properties) {
    std::cout << (p.pass ? "PASS  " : "FAIL  ") << p.name << std::string(width - p.name.size() + 2, ' ') << p.detail << '\n';
  }
  if (!rep.all_pass()) {
    std::cerr << "convint: verification failed: " << rep.first_failure() << '\n';
    return kConfigError;
  }
  return kOk;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    double v = 0.0;
    std::istringstream iv(item);
    if (!(iv >> v) || !(iv >> std::ws).eof()) throw config::ConfigError("bad number '" + item + "' in list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

struct WaveArgs {
  int d = 2;
  std::string zbar;
  std::string center;
  double radius = 0.5;
  int k = 4;
  int cells = 0;
  int slice_samples = 201;
};

int cmd_wave(const WaveArgs& a, const std::string& out_dir) {
  if (a.d != 2 && a.d != 3) throw config::ConfigError("--dim must be 2 or 3");
  const int n = 2 * a.d + 1;
  const auto zv = parse_list(a.zbar);
  if (static_cast<int>(zv.size()) != n)
    throw config::ConfigError("--zbar needs " + std::to_string(n) + " comma-separated values");
  StateVector zbar(n);
  for (int i = 0; i < n; ++i) zbar(i) = zv[static_cast<std::size_t>(i)];
  SpaceTimePoint y0 = SpaceTimePoint::Zero(a.d + 1);
  if (!a.center.empty()) {
    const auto cv = parse_list(a.center);
    if (static_cast<int>(cv.size()) != a.d + 1) throw config::ConfigError("--center needs d + 1 values");
    for (int i = 0; i <= a.d; ++i) y0(i) = cv[static_cast<std::size_t>(i)];
  }
  if (!(a.radius > 0.0) || a.k < 1) throw config::ConfigError("--radius must be positive and --k >= 1");

  const auto w = waves::make_wave(zbar, y0, a.radius, a.k, a.d);
  const int cells = a.cells > 0 ? a.cells : waves::min_resolution(w);
  const double mass = waves::l2_mass(w, cells);  // throws ResolutionError when under-resolved

  // Host domain: the bounding box of the ball, energy 1 throughout.
  constraint::Box box{Vector(a.d), Vector(a.d)};
  for (int i = 0; i < a.d; ++i) {
    box.lo(i) = y0(i + 1) - a.radius;
    box.hi(i) = y0(i + 1) + a.radius;
  }
  field::CompositeField f(constraint::ConstraintParams(a.d, box, EnergyProfile::constant(y0(0) - a.radius, y0(0) + a.radius, 1.0)));
  f.append(w);

  std::ostringstream slice;
  slice << "s,t";
  for (int i = 1; i <= a.d; ++i) slice << ",x" << i;
  slice << ",u";
  for (int i = 1; i <= a.d; ++i) slice << ",m" << i;
  for (int i = 1; i <= a.d; ++i) slice << ",b" << i;
  slice << '\n';
  for (int s = 0; s < a.slice_samples; ++s) {
    const double sv = -1.2 * a.radius + 2.4 * a.radius * s / std::max(1, a.slice_samples - 1);
    SpaceTimePoint y = y0;
    y(1) += sv;
    const StateVector z = waves::wave_eval(w, y);
    slice << num(sv);
    for (int i = 0; i <= a.d; ++i) slice << ',' << num(y(i));
    for (int i = 0; i < n; ++i) slice << ',' << num(z(i));
    slice << '\n';
  }

  const double h = 1e-3 * a.radius / a.k;
  SpaceTimePoint probe = y0;
  probe(0) += 0.31 * a.radius;
  probe(1) += 0.27 * a.radius;
  const auto [r1a, r2a] = waves::divergence_residual(w, probe, h);
  const auto [r1b, r2b] = waves::divergence_residual(w, probe, h / 2);
  const double center_error = (waves::wave_eval(w, y0) - zbar).norm();

  nlohmann::ordered_json rep;
  rep["branch"] = waves::to_string(w.branch);
  rep["k"] = w.k;
  rep["radius"] = w.radius;
  rep["cells"] = cells;
  rep["l2_mass"] = mass;
  rep["plateau_bound"] = waves::plateau_energy_bound(w);
  rep["energy_ratio"] = zbar.squaredNorm() > 0.0 ? mass / (zbar.squaredNorm() * ball_volume(a.d + 1, a.radius)) : 0.0;
  rep["center_error"] = center_error;
  rep["residual"] = {{"h", h}, {"continuity", {r1a, r1b}}, {"divergence", {r2a, r2b}}};

  AtomicOutputs out(out_dir);
  out.add("wave.waves", field::serialize(f));
  out.add("slice.csv", slice.str());
  out.add("report.json", rep.dump(2) + "\n");
  out.commit();
  std::cout << rep.dump(2) << '\n';
  return kOk;
}

int cmd_export(const std::string& field_path, const std::string& config_path, const std::string& what,
               const std::string& out_path, std::optional<double> t_slice) {
  const auto cfg = load_solver_config(config_path, std::nullopt);
  const auto f = load_field(field_path, cfg.params.d());
  const Quadrature q(cfg.params, cfg.nt, cfg.nx);
  const int d = f.d();
  std::ostringstream os;
  if (what == "energy") {
    os << energy_csv(f, q);
  } else if (what == "u" || what == "b") {
    const auto box = cfg.params.space_time_box();
    const double t = t_slice ? *t_slice : 0.5 * (box.lo(0) + box.hi(0));
    for (int i = 1; i <= d; ++i) os << 'x' << i << ',';
    os << (what == "u" ? "u" : "b_norm") << '\n';
    for (std::size_t s = 0; s < q.spatial_size(); ++s) {
      SpaceTimePoint y = q.node(s);
      y(0) = t;
      const StateVector z = f.eval(y);
      for (int i = 1; i <= d; ++i) os << num(y(i)) << ',';
      os << num(what == "u" ? z(0) : z.segment(1 + d, d).norm()) << '\n';
    }
  } else if (what == "dist") {
    os << 't';
    for (int i = 1; i <= d; ++i) os << ",x" << i;
    os << ",dist\n";
    for (std::size_t i = 0; i < q.size(); ++i) {
      const SpaceTimePoint y = q.node(i);
      os << num(y(0));
      for (int a = 1; a <= d; ++a) os << ',' << num(y(a));
      os << ',' << num(constraint::dist_to_K(f.eval(y), y, cfg.params)) << '\n';
    }
  } else {
    throw config::ConfigError("unknown export target '" + what + "' (expected energy, u, b or dist)");
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << os.str();
  } else {
    const fs::path p(out_path);
    AtomicOutputs out(p.has_parent_path() ? p.parent_path() : fs::path("."));
    out.add(p.filename().string(), os.str());
    out.commit();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convint: convex-integration subsolutions of the continuity equation with a prescribed energy profile"};
  app.set_version_flag("--version", std::string(CONVINT_VERSION));
  app.require_subcommand(1);

  std::string config_path, out_dir, field_path, what = "energy";
  std::optional<std::uint64_t> seed;
  std::optional<double> t_slice;

  auto* solve = app.add_subcommand("solve", "run the solver and write field, diagnostics, energy profile and manifest");
  solve->add_option("--config", config_path, "flat key = value config file")->required();
  solve->add_option("--out", out_dir, "output directory")->required();
  solve->add_option("--seed", seed, "override solver.seed");

  auto* verify = app.add_subcommand("verify", "recompute and check every property of a field file");
  verify->add_option("--field", field_path, ".waves field file")->required();
  verify->add_option("--config", config_path, "config the field was produced with")->required();

  WaveArgs wa;
  auto* wave = app.add_subcommand("wave", "build one localized plane wave and report its residual and L2 mass");
  wave->add_option("--dim", wa.d, "spatial dimension (2 or 3)");
  wave->add_option("--zbar", wa.zbar, "amplitude u,m_1..m_d,b_1..b_d")->required();
  wave->add_option("--center", wa.center, "ball center t,x_1..x_d (default origin)");
  wave->add_option("--radius", wa.radius, "ball radius");
  wave->add_option("--k", wa.k, "frequency multiplier");
  wave->add_option("--cells", wa.cells, "cells per axis for the L2 mass (default 16k)");
  wave->add_option("--samples", wa.slice_samples, "points on the slice through the center");
  wave->add_option("--out", out_dir, "output directory")->required();

  auto* exp = app.add_subcommand("export", "write CSV grids of u, |b|, dist or the energy profile");
  exp->add_option("--field", field_path, ".waves field file")->required();
  exp->add_option("--config", config_path, "config giving the grid")->required();
  exp->add_option("--what", what, "energy | u | b | dist");
  exp->add_option("--out", out_dir, "output file (default stdout)");
  exp->add_option("--t", t_slice, "time of the u / b slice (default interval midpoint)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*solve) return cmd_solve(config_path, out_dir, seed);
    if (*verify) return cmd_verify(field_path, config_path);
    if (*wave) return cmd_wave(wa, out_dir);
    if (*exp) return cmd_export(field_path, config_path, what, out_dir, t_slice);
  } catch (const waves::WaveConeError& e) {
    std::cerr << "convint: wave-cone violation: " << e.what() << '\n';
    return kConfigError;
  } catch (const ResolutionError& e) {
    std::cerr << "convint: resolution limited: " << e.what() << '\n';
    return kResolutionLimited;
  } catch (const DimensionError& e) {
    std::cerr << "convint: dimension mismatch: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "convint: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
