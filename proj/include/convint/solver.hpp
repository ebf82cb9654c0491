#pragma once

// Accept/reject iteration from the zero subsolution: each step packs a cover,
// tries the amplitude and frequency schedules, and keeps the first certified
// perturbation that lowers J.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "convint/constraint.hpp"
#include "convint/field.hpp"
#include "convint/perturbation.hpp"
#include "convint/quadrature.hpp"
#include "convint/types.hpp"
#include "convint/waves.hpp"

namespace convint::solver {

using constraint::ConstraintParams;
using field::CompositeField;

class EmptyActiveRegionError : public Error {
 public:
  using Error::Error;
};

struct SolverConfig {
  ConstraintParams params;
  /// Active-region floor; negative selects 1e-3 * max E.
  double eps_E = -1.0;
  int nt = 64;
  int nx = 64;
  int max_steps = 5;
  double tol_J = 1e-8;
  int k0 = 1;
  std::vector<double> gammas{1.0, 0.5, 0.25, 0.125};
  /// Number of k doublings tried after the whole gamma schedule fails.
  int k_escalations = 1;
  double theta = 0.1;
  std::uint64_t seed = 0;
  double node_margin = 1e-6;
  perturbation::Options step;

  explicit SolverConfig(ConstraintParams p) : params(std::move(p)), step(perturbation::default_options(params.d())) {}

  double energy_floor() const { return eps_E >= 0.0 ? eps_E : 1e-3 * params.profile().max_value(); }

  void validate() const {
    if (nt < 2 || nx < 2) throw Error("solver config: grid.nt and grid.nx must be >= 2");
    if (max_steps < 1) throw Error("solver config: solver.max_steps must be >= 1");
    if (!(tol_J >= 0.0)) throw Error("solver config: solver.tolJ must be >= 0");
    if (k0 < 1) throw Error("solver config: solver.k0 must be >= 1");
    if (gammas.empty()) throw Error("solver config: empty gamma schedule");
    for (double g : gammas)
      if (!(g > 0.0 && g <= 1.0)) throw Error("solver config: gamma values must lie in (0, 1]");
    if (!(theta > 0.0 && theta < 1.0)) throw Error("solver config: solver.theta must lie in (0, 1)");
    if (!(node_margin >= 0.0)) throw Error("solver config: node margin must be >= 0");
    if (!(energy_floor() > 0.0)) throw Error("solver config: energy floor must be positive");
  }
};

enum class Status { converged, max_steps, stalled, resolution_limited };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_steps: return "max_steps";
    case Status::stalled: return "stalled";
    case Status::resolution_limited: return "resolution_limited";
  }
  return "unknown";
}

struct DiagnosticsRow {
  int step = 0;
  double J = 0.0;
  double I = 0.0;
  double energy_gap = 0.0;  // integral over I of (E - energy)
  std::size_t cover_size = 0;
  double captured = 0.0;
  int k = 0;
  double gamma = 0.0;
  double gain = 0.0;
  double delta = 0.0;
  int attempts = 0;
  double wall_seconds = 0.0;
};

struct RunDiagnostics {
  std::vector<DiagnosticsRow> rows;
  Status status = Status::max_steps;
  std::string message;
  double energy_constant = 0.0;
  std::vector<perturbation::StepReport> reports;  // accepted steps only
  double wall_seconds = 0.0;
};

struct RunResult {
  CompositeField field;
  RunDiagnostics diagnostics;
};

/// Energy of every time slice from the node cache (same sums as field::energy_at).
inline std::vector<double> slice_energies(const perturbation::NodeState& nodes) {
  const auto& q = nodes.quadrature();
  const std::size_t S = q.spatial_size();
  std::vector<double> out(static_cast<std::size_t>(q.nt()));
  for (int it = 0; it < q.nt(); ++it) {
    const std::size_t base = static_cast<std::size_t>(it) * S;
    out[static_cast<std::size_t>(it)] =
        q.spatial_cell_volume() * parallel::blocked_sum(S, [&](std::size_t i) {
          const double u = nodes.z(base + i)(0);
          return u * u;
        });
  }
  return out;
}

inline double energy_gap(const perturbation::NodeState& nodes, const EnergyProfile& E) {
  const auto& q = nodes.quadrature();
  const auto en = slice_energies(nodes);
  double gap = 0.0;
  for (int it = 0; it < q.nt(); ++it) gap += (E(q.time_node(it)) - en[static_cast<std::size_t>(it)]) * q.widths()(0);
  return gap;
}

inline DiagnosticsRow make_row(int step, const perturbation::NodeState& nodes, const ConstraintParams& params) {
  DiagnosticsRow r;
  r.step = step;
  r.J = nodes.J();
  r.I = nodes.I();
  r.energy_gap = energy_gap(nodes, params.profile());
  return r;
}

inline RunResult run(const SolverConfig& config, const std::function<void(const DiagnosticsRow&)>& on_row = {}) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  config.validate();
  const auto& params = config.params;
  const int d = params.d();

  const constraint::ActiveRegion region(params, config.energy_floor());
  if (region.empty()) throw EmptyActiveRegionError("solver: the active region {E >= floor} is empty");
  const Quadrature q(params, config.nt, config.nx);

  // Largest ball the active region admits, probed on the quadrature nodes.
  double r_largest = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) r_largest = std::max(r_largest, region.admissible_radius(q.node(i)));
  const int k_cap = q.max_frequency(r_largest);
  if (k_cap < config.k0)
    throw ResolutionError("solver: the quadrature cannot resolve k0 = " + std::to_string(config.k0) +
                          " on any admissible ball (largest radius " + std::to_string(r_largest) + ")");

  RunResult res{CompositeField(params), {}};
  auto& diag = res.diagnostics;
  diag.energy_constant = perturbation::measure_energy_constant(d);
  constraint::SampleCache cache(d, config.step.sample_count);
  perturbation::NodeState nodes(res.field, q);

  auto push = [&](DiagnosticsRow row, clock::time_point t0) {
    row.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    diag.rows.push_back(row);
    if (on_row) on_row(diag.rows.back());
  };
  push(make_row(0, nodes, params), t_start);

  diag.status = Status::max_steps;
  for (int step = 1; step <= config.max_steps; ++step) {
    const auto t_step = clock::now();
    const double J = diag.rows.back().J;
    if (J <= config.tol_J) {
      diag.status = Status::converged;
      break;
    }
    perturbation::Options opts = config.step;
    opts.theta = config.theta;
    opts.node_margin = config.node_margin;
    opts.seed = mix_seed(config.seed + static_cast<std::uint64_t>(step));
    opts.segment.seed = mix_seed(opts.seed ^ 0x5eedULL);

    const auto cover = perturbation::select_cover(res.field, nodes, region, opts, cache);
    if (cover.balls.empty()) {
      diag.status = J <= config.tol_J ? Status::converged : Status::resolution_limited;
      diag.message = "no admissible ball of resolvable radius remains";
      break;
    }

    const long k_sched = std::min<long>(static_cast<long>(config.k0) << std::min(step - 1, 30), k_cap);
    bool accepted = false;
    bool at_cap = false;
    int attempts = 0;
    std::string last_reason;
    for (int esc = 0; esc <= config.k_escalations && !accepted; ++esc) {
      const long k_try = k_sched << esc;
      if (esc > 0 && (k_sched << (esc - 1)) >= k_cap) {
        at_cap = true;
        break;
      }
      const int k = static_cast<int>(std::min<long>(k_try, k_cap));
      if (k_try >= k_cap) at_cap = true;
      for (double gamma : config.gammas) {
        ++attempts;
        auto out = perturbation::perturb_step(res.field, cover, k, gamma, nodes, region, diag.energy_constant, opts, cache);
        if (out.accepted && out.report.J_after < J) {
          nodes.apply(out.updates);
          res.field = std::move(out.field);
          diag.reports.push_back(out.report);
          DiagnosticsRow row = make_row(step, nodes, params);
          row.cover_size = out.report.cover_size;
          row.captured = out.report.captured;
          row.k = out.report.k_used;
          row.gamma = gamma;
          row.gain = out.report.gain;
          row.delta = out.report.delta;
          row.attempts = attempts;
          push(row, t_step);
          accepted = true;
          break;
        }
        last_reason = out.accepted ? "J did not decrease" : out.reason;
      }
    }
    if (!accepted) {
      diag.status = at_cap ? Status::resolution_limited : Status::stalled;
      diag.message = "step " + std::to_string(step) + " rejected for every amplitude scale: " + last_reason;
      break;
    }
  }
  diag.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return res;
}

// ---------------------------------------------------------------------------
// Verification

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  QuadratureValue J;
  QuadratureValue I;
  double energy_gap = 0.0;
  bool all_pass() const {
    for (const auto& p : properties)
      if (!p.pass) return false;
    return true;
  }
  std::string first_failure() const {
    for (const auto& p : properties)
      if (!p.pass) return p.name;
    return {};
  }
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

/// Recomputes every property of a composite field on the configured grid.
inline VerifyReport verify(const CompositeField& f, const SolverConfig& config) {
  if (f.d() != config.params.d())
    throw DimensionError("verify: field has d = " + std::to_string(f.d()) + ", config has d = " +
                         std::to_string(config.params.d()));
  const auto& params = config.params;
  const int d = params.d();
  VerifyReport rep;
  auto add = [&](std::string name, bool pass, std::string detail) {
    rep.properties.push_back(PropertyResult{std::move(name), pass, std::move(detail)});
  };

  // Wave invariants.
  {
    std::string bad;
    for (std::size_t i = 0; i < f.size() && bad.empty(); ++i) {
      const auto v = waves::invariant_violations(f.waves()[i]);
      if (!v.empty()) bad = "wave " + std::to_string(i) + ": " + v.front();
    }
    add("wave_invariants", bad.empty(), bad.empty() ? std::to_string(f.size()) + " waves" : bad);
  }

  // Supports inside the active region.
  const constraint::ActiveRegion region(params, config.energy_floor());
  {
    std::string bad;
    for (std::size_t i = 0; i < f.size() && bad.empty(); ++i) {
      const auto& w = f.waves()[i];
      if (region.admissible_radius(w.center) < w.radius * (1.0 - 1e-12)) bad = "wave " + std::to_string(i);
    }
    add("support_in_active_region", bad.empty(), bad.empty() ? "ok" : bad + " leaves the active region");
  }

  // Resolution on the fine grid.
  const Quadrature q(params, config.nt, config.nx);
  {
    std::string bad;
    for (std::size_t i = 0; i < f.size() && bad.empty(); ++i)
      if (!q.resolves(f.waves()[i])) bad = "wave " + std::to_string(i);
    add("resolution", bad.empty(), bad.empty() ? "max k per radius within 8 cells per period" : bad + " is under-resolved");
    if (!bad.empty()) return rep;
  }

  // Exactly zero outside U.
  {
    const auto box = params.space_time_box();
    std::mt19937_64 rng(mix_seed(config.seed ^ 0x07ULL));
    std::uniform_real_distribution<double> unif(-0.5, 1.5);
    int tested = 0, nonzero = 0;
    while (tested < 4000) {
      SpaceTimePoint y(d + 1);
      for (int a = 0; a <= d; ++a) y(a) = box.lo(a) + unif(rng) * (box.hi(a) - box.lo(a));
      if (params.in_U(y)) continue;
      ++tested;
      if (f.eval(y).cwiseAbs().maxCoeff() != 0.0) ++nonzero;
    }
    add("zero_outside_U", nonzero == 0, std::to_string(nonzero) + " of " + std::to_string(tested) + " exterior samples nonzero");
  }

  // Subsolution at every active node.
  const perturbation::NodeState nodes(f, q);
  {
    constraint::SampleCache cache(d, config.step.sample_count);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < q.size(); ++i)
      if (nodes.dist2(i) > 0.0 && region.contains(q.node(i))) active.push_back(i);
    std::size_t failures = 0;
    std::size_t first = 0;
    std::vector<std::pair<double, bool>> zero_ok;  // untouched nodes depend only on f
    for (std::size_t i : active) {
      const double fl = nodes.f(i);
      bool ok = false;
      if (nodes.z(i).squaredNorm() == 0.0) {
        std::size_t c = 0;
        while (c < zero_ok.size() && zero_ok[c].first != fl) ++c;
        if (c == zero_ok.size())
          zero_ok.emplace_back(fl, constraint::in_U_certified_level(nodes.z(i), fl, d, config.node_margin, cache.get(fl)));
        ok = zero_ok[c].second;
      } else {
        ok = constraint::in_U_certified_level(nodes.z(i), fl, d, config.node_margin, cache.get(fl));
      }
      if (!ok) {
        if (failures++ == 0) first = i;
      }
    }
    add("subsolution", failures == 0,
        failures == 0 ? std::to_string(active.size()) + " active nodes certified"
                      : std::to_string(failures) + " nodes fail, first at index " + std::to_string(first));
  }

  // Functionals and the energy profile.
  rep.J = field::J_functional(f, q);
  rep.I = field::I_functional(f, q);
  add("J", std::isfinite(rep.J.value), "J = " + detail::fmt(rep.J.value) + " +- " + detail::fmt(rep.J.error));
  add("I", std::isfinite(rep.I.value), "I = " + detail::fmt(rep.I.value) + " +- " + detail::fmt(rep.I.error));
  {
    const auto rows = field::energy_profile(f, field::time_nodes(q), q);
    rep.energy_gap = field::energy_gap(rows, q.widths()(0));
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) worst = std::max(worst, r.actual - r.target - 1e-12 * std::max(1.0, r.target));
    add("energy_domination", worst <= 0.0,
        "max(energy - E) = " + detail::fmt(worst) + ", gap = " + detail::fmt(rep.energy_gap));
  }

  // Second-order decay of the divergence residual inside the wave balls.
  {
    std::mt19937_64 rng(mix_seed(config.seed ^ 0x2e5ULL));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    int checked = 0, bad = 0;
    for (std::size_t i = 0; i < f.size() && checked < 64; ++i) {
      const auto& w = f.waves()[i];
      for (int s = 0; s < 4; ++s) {
        SpaceTimePoint y(d + 1);
        do {
          for (int a = 0; a <= d; ++a) y(a) = unif(rng);
        } while (y.norm() >= 0.9);
        y = w.center + w.radius * y;
        const double h = 2e-3 * w.radius / w.k;
        const auto [a1, a2] = field::field_divergence_residual(f, y, h);
        const auto [b1, b2] = field::field_divergence_residual(f, y, h / 2);
        const double ra = std::hypot(a1, a2), rb = std::hypot(b1, b2);
        const double scale = w.zbar.norm() * 2.0 * std::numbers::pi * w.k / w.radius;
        if (ra < 1e-8 * scale) continue;  // no measurable truncation error here
        ++checked;
        const double ratio = ra / rb;
        if (!(ratio >= 3.5 && ratio <= 4.5)) ++bad;
      }
    }
    add("residual_order2", bad == 0, std::to_string(checked) + " points checked, " + std::to_string(bad) + " outside [3.5, 4.5]");
  }
  return rep;
}

}  // namespace convint::solver
