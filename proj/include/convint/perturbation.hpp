#pragma once

// One constructive perturbation step: pick amplitudes by the geometric lemma,
// find balls on which they stay admissible, pack disjoint balls that capture
// most of the constraint defect, and add one localized plane wave per ball.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "convint/constraint.hpp"
#include "convint/field.hpp"
#include "convint/geometry.hpp"
#include "convint/parallel.hpp"
#include "convint/quadrature.hpp"
#include "convint/types.hpp"
#include "convint/waves.hpp"

namespace convint::perturbation {

using constraint::ActiveRegion;
using constraint::ConstraintParams;
using constraint::SampleCache;
using field::CompositeField;

class CertificationError : public Error {
 public:
  CertificationError(const std::string& what, double ratio) : Error(what), achieved_ratio(ratio) {}
  double achieved_ratio;
};

struct Options {
  int sample_count = 64;
  /// d = 2 wave-cone nudge: |ubar| is raised to at least theta |zbar|.
  double theta = 0.1;
  geometry::SegmentOptions segment{};
  /// Interior radius every perturbed quadrature node must keep.
  double node_margin = 1e-6;
  /// Upper bound on ball radii.
  double r_max = std::numeric_limits<double>::infinity();
  /// Ratio of the geometric radius grid searched by stability_radius.
  double radius_ratio = 0.5;
  /// Fractions of the lemma amplitude tried, largest first, while |zbar| >= dist/(4n).
  std::vector<double> amplitude_scales{1.0, 0.5, 0.25, 0.125};
  int max_balls = 64;
  /// Budget of candidate centers for which (zbar, R, rho) are computed per cover.
  int max_candidate_evals = 512;
  /// Candidate centers sit on every `candidate_stride`-th node per axis.
  int candidate_stride = 4;
  /// Relative seeded jitter on candidate scores.
  double jitter = 0.05;
  std::uint64_t seed = 0;
};

inline Options default_options(int d) {
  Options o;
  o.sample_count = constraint::default_sample_count(d);
  if (d == 3) o.segment.max_pairs = 2048;
  return o;
}

// ---------------------------------------------------------------------------
// Per-node cache of the field on the quadrature grid

/// Field values, levels f and squared constraint distances at every node.
class NodeState {
 public:
  NodeState(const CompositeField& field, const Quadrature& q) : q_(q) {
    const auto& params = field.params();
    const std::size_t N = q.size();
    z_.resize(N);
    f_.resize(N);
    dist2_.resize(N);
    parallel::parallel_for(N, [&](std::size_t i) {
      const SpaceTimePoint y = q.node(i);
      z_[i] = field.eval(y);
      f_[i] = std::sqrt(params.F(y));
      const double dd = constraint::dist_to_K_level(z_[i], f_[i], params.d());
      dist2_[i] = dd * dd;
    });
  }

  const Quadrature& quadrature() const { return q_; }
  std::size_t size() const { return z_.size(); }
  const StateVector& z(std::size_t i) const { return z_[i]; }
  double f(std::size_t i) const { return f_[i]; }
  double dist2(std::size_t i) const { return dist2_[i]; }

  double J() const {
    return q_.cell_volume() * parallel::blocked_sum(dist2_.size(), [&](std::size_t i) { return dist2_[i]; });
  }
  double I() const {
    return q_.cell_volume() * parallel::blocked_sum(z_.size(), [&](std::size_t i) { return z_[i].squaredNorm(); });
  }

  struct Update {
    std::size_t index;
    StateVector z;
    double dist2;
  };

  void apply(const std::vector<Update>& updates) {
    for (const auto& u : updates) {
      z_[u.index] = u.z;
      dist2_[u.index] = u.dist2;
    }
  }

  /// J after applying `updates`, with the same reduction order as J().
  double J_with(const std::vector<Update>& updates) const {
    std::vector<double> d2 = dist2_;
    for (const auto& u : updates) d2[u.index] = u.dist2;
    return q_.cell_volume() * parallel::blocked_sum(d2.size(), [&](std::size_t i) { return d2[i]; });
  }

 private:
  Quadrature q_;
  std::vector<StateVector> z_;
  std::vector<double> f_;
  std::vector<double> dist2_;
};

// ---------------------------------------------------------------------------
// Step 1: amplitude

struct LocalDirection {
  StateVector zbar;
  double dist = 0.0;
  /// |zbar| * 4n / dist(z(y), K_y); >= 1 on success.
  double ratio = 0.0;
  double endpoint_margin = 0.0;
  bool nudged = false;
};

inline double min_endpoint_margin(const StateVector& z, const StateVector& zbar, const geometry::FacetHull& K) {
  const StateVector a = z + zbar, b = z - zbar;
  if (!geometry::in_hull(a, K) || !geometry::in_hull(b, K)) return 0.0;
  return std::min(geometry::interior_margin(a, K), geometry::interior_margin(b, K));
}

/// Amplitude zbar at the field value z with level f: segment certified in the
/// sampled hull, inside the wave cone, and |zbar| >= dist(z, K)/(4n).
inline LocalDirection local_direction_at(const StateVector& z, double f, int d, const Options& opts, SampleCache& cache) {
  const int n = 2 * d + 1;
  LocalDirection out;
  out.dist = constraint::dist_to_K_level(z, f, d);
  out.zbar = StateVector::Zero(n);
  if (out.dist == 0.0) return out;
  const auto& K = cache.get(f);
  if (!constraint::in_U_certified_level(z, f, d, 0.0, K) || geometry::interior_margin(z, K) <= 0.0)
    throw geometry::PreconditionError("local_direction: field value is not certified inside the hull");

  const auto seg = geometry::segment_direction(z, K, opts.segment);
  StateVector zbar = seg.zbar;
  double margin = seg.endpoint_margin;
  const double required = out.dist / (4.0 * n);

  if (d == 2 && std::abs(zbar(0)) < opts.theta * zbar.norm()) {
    out.nudged = true;
    margin = 0.0;
    for (int attempt = 0; attempt < 8 && zbar.norm() >= required; ++attempt) {
      StateVector trial = zbar;
      const double target = opts.theta * trial.norm();
      trial(0) = trial(0) < 0.0 ? -target : target;
      margin = min_endpoint_margin(z, trial, K);
      if (margin > 0.0 && trial.norm() >= required) {
        zbar = trial;
        break;
      }
      margin = 0.0;
      zbar *= 0.5;
    }
    if (margin <= 0.0)
      throw CertificationError("local_direction: wave-cone adjustment could not be certified",
                               zbar.norm() * 4.0 * n / out.dist);
  }
  out.zbar = zbar;
  out.endpoint_margin = margin;
  out.ratio = zbar.norm() * 4.0 * n / out.dist;
  if (out.ratio < 1.0)
    throw CertificationError("local_direction: amplitude below dist/(4n), achieved ratio " + std::to_string(out.ratio),
                             out.ratio);
  return out;
}

inline LocalDirection local_direction(const CompositeField& field, const SpaceTimePoint& y, const Options& opts,
                                      SampleCache& cache) {
  const auto& p = field.params();
  if (!p.in_U(y)) throw geometry::PreconditionError("local_direction: y is outside U");
  return local_direction_at(field.eval(y), std::sqrt(p.F(y)), p.d(), opts, cache);
}

// ---------------------------------------------------------------------------
// Stability radius

/// Fixed sample of the unit ball in R^D: lattice {-1,-1/2,0,1/2,1}^D scaled by
/// 0.98 and clipped to the ball, plus axis points at radius 0.98.
inline std::vector<Vector> unit_ball_samples(int D) {
  std::vector<Vector> pts;
  std::vector<int> idx(static_cast<std::size_t>(D), 0);
  while (true) {
    Vector p(D);
    for (int a = 0; a < D; ++a) p(a) = 0.98 * (idx[static_cast<std::size_t>(a)] - 2) * 0.5;
    if (p.norm() < 0.985) pts.push_back(p);
    int a = D - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == 5) idx[static_cast<std::size_t>(a--)] = 0;
    if (a < 0) break;
  }
  for (int a = 0; a < D; ++a) {
    for (double s : {-0.98, 0.98}) {
      Vector p = Vector::Zero(D);
      p(a) = s;
      pts.push_back(p);
    }
  }
  return pts;
}

struct Stability {
  double R = 0.0;
  double rho = 0.0;
};

/// Largest radius R on the grid {r_max, q r_max, q^2 r_max, ...} (q = radius_ratio)
/// at which every sample x of B_R(y) keeps [z(x) - zbar, z(x) + zbar] + B_rho
/// inside the sampled hull of K_x and dist(z(x), K_x) <= 2 dist(z(y), K_y).
/// With `nodes`, every quadrature node inside B_R(y) is checked as well.
/// Throws CertificationError if no radius >= r_min qualifies.
inline Stability stability_radius(const CompositeField& field, const SpaceTimePoint& y, const StateVector& zbar,
                                  double endpoint_margin, double r_max, double r_min, const Options& opts,
                                  SampleCache& cache, const NodeState* nodes = nullptr) {
  const auto& p = field.params();
  const int d = p.d();
  if (zbar.squaredNorm() == 0.0) throw geometry::PreconditionError("stability_radius: zero amplitude");
  Stability out;
  out.rho = 0.5 * endpoint_margin;
  if (!(out.rho > 0.0)) throw geometry::PreconditionError("stability_radius: amplitude has no certified margin");
  const double dist_y = constraint::dist_to_K(field.eval(y), y, p);
  static thread_local std::vector<Vector> samples_cache[6];
  auto& samples = samples_cache[d + 1];
  if (samples.empty()) samples = unit_ball_samples(d + 1);

  auto ok_value = [&](const StateVector& zx, double f) {
    if (!(f > 0.0)) return false;
    if (constraint::dist_to_K_level(zx, f, d) > 2.0 * dist_y) return false;
    const auto& K = cache.get(f);
    for (double s : {1.0, -1.0}) {
      const StateVector e = zx + s * zbar;
      if (!constraint::in_U_certified_level(e, f, d, out.rho, K)) return false;
    }
    return true;
  };
  auto ok_at = [&](const SpaceTimePoint& x) { return p.in_U(x) && ok_value(field.eval(x), std::sqrt(p.F(x))); };

  for (double R = r_max; R >= r_min * (1.0 - 1e-12); R *= opts.radius_ratio) {
    bool ok = true;
    for (const auto& s : samples) {
      if (!ok_at(SpaceTimePoint(y + R * s))) {
        ok = false;
        break;
      }
    }
    if (ok && nodes) {
      for (std::size_t i : nodes->quadrature().nodes_in_ball(y, R)) {
        if (!ok_value(nodes->z(i), nodes->f(i))) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      out.R = R;
      return out;
    }
  }
  throw CertificationError("stability_radius: no admissible radius above the resolution floor (degenerate geometry)", 0.0);
}

// ---------------------------------------------------------------------------
// Step 2: disjoint cover

struct CoverBall {
  SpaceTimePoint center;
  double radius = 0.0;
  StateVector zbar;
  double rho = 0.0;
  double dist = 0.0;  // dist(z(y), K_y) at the center
  double mass = 0.0;  // quadrature mass of dist^2 inside the ball
};

struct Cover {
  std::vector<CoverBall> balls;
  double epsilon = 0.0;   // J before the step
  double captured = 0.0;  // sum of ball masses
  bool complete = false;  // captured > epsilon / 2
  int evaluations = 0;
  int rejected_candidates = 0;
};

inline double ball_mass(const NodeState& nodes, const SpaceTimePoint& c, double r) {
  double m = 0.0;
  for (std::size_t i : nodes.quadrature().nodes_in_ball(c, r)) m += nodes.dist2(i);
  return m * nodes.quadrature().cell_volume();
}

/// Smallest ball radius the quadrature can resolve (8 cells per period at k = 1).
inline double resolvable_radius(const Quadrature& q) { return 8.0 * q.max_width(); }

/// Greedy packing of disjoint admissible balls ranked by captured dist^2 mass
/// (lazy evaluation; ties broken by seeded jitter, then node index).
inline Cover select_cover(const CompositeField& field, const NodeState& nodes, const ActiveRegion& region,
                          const Options& opts, SampleCache& cache) {
  const auto& q = nodes.quadrature();
  const int d = field.d();
  const int D = d + 1;
  const double r_min = resolvable_radius(q);
  Cover cover;
  cover.epsilon = nodes.J();
  if (!(cover.epsilon > 0.0)) return cover;

  struct Candidate {
    std::size_t node;
    SpaceTimePoint y;
    double jitter;
    double r_cap;  // min(r_max, admissible radius)
    bool evaluated = false;
    bool failed = false;
    StateVector zbar;
    double rho = 0.0;
    double R = 0.0;
    double dist = 0.0;
  };
  std::vector<Candidate> cands;
  const int stride = std::max(1, opts.candidate_stride);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto c = q.coords(i);
    bool on_lattice = true;
    for (int a = 0; a < D; ++a)
      if (c[static_cast<std::size_t>(a)] % stride != stride / 2) on_lattice = false;
    if (!on_lattice || nodes.dist2(i) <= 0.0) continue;
    const SpaceTimePoint y = q.node(i);
    const double r_cap = std::min(opts.r_max, region.admissible_radius(y));
    if (r_cap < r_min) continue;
    const std::uint64_t h = mix_seed(opts.seed ^ mix_seed(static_cast<std::uint64_t>(i)));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    cands.push_back(Candidate{i, y, 1.0 + opts.jitter * u, r_cap});
  }

  auto gap = [&](const SpaceTimePoint& y) {
    double g = std::numeric_limits<double>::infinity();
    for (const auto& b : cover.balls) g = std::min(g, (y - b.center).norm() - b.radius);
    return g;
  };

  using Entry = std::pair<double, std::size_t>;  // (score, candidate index)
  auto cmp = [](const Entry& a, const Entry& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const double r = cands[c].r_cap;
    heap.emplace(nodes.dist2(cands[c].node) * ball_volume(D, r) * cands[c].jitter, c);
  }

  while (!heap.empty() && static_cast<int>(cover.balls.size()) < opts.max_balls && !cover.complete) {
    const auto [score, ci] = heap.top();
    heap.pop();
    auto& cand = cands[ci];
    if (cand.failed) continue;
    const double r_free = std::min(cand.r_cap, gap(cand.y));
    if (r_free < r_min) continue;
    if (!cand.evaluated) {
      if (cover.evaluations >= opts.max_candidate_evals) continue;
      ++cover.evaluations;
      cand.evaluated = true;
      try {
        const auto ld = local_direction_at(nodes.z(cand.node), nodes.f(cand.node), d, opts, cache);
        if (ld.zbar.squaredNorm() == 0.0) {
          cand.failed = true;
          continue;
        }
        // Smaller amplitudes leave more room for the field to vary across the ball.
        const int n = 2 * d + 1;
        const auto& K = cache.get(nodes.f(cand.node));
        bool found = false;
        for (double lambda : opts.amplitude_scales) {
          const StateVector zb = lambda * ld.zbar;
          if (zb.norm() * 4.0 * n < ld.dist) break;
          const double margin = lambda == 1.0 ? ld.endpoint_margin : min_endpoint_margin(nodes.z(cand.node), zb, K);
          if (!(margin > 0.0)) continue;
          try {
            const auto st = stability_radius(field, cand.y, zb, margin, cand.r_cap, r_min, opts, cache, &nodes);
            cand.zbar = zb;
            cand.rho = st.rho;
            cand.R = st.R;
            cand.dist = ld.dist;
            found = true;
            break;
          } catch (const CertificationError&) {
          }
        }
        if (!found) throw CertificationError("select_cover: no stable amplitude", 0.0);
      } catch (const Error&) {
        cand.failed = true;
        ++cover.rejected_candidates;
        continue;
      }
    }
    const double r = std::min(cand.R, r_free);
    if (r < r_min) continue;
    const double mass = ball_mass(nodes, cand.y, r);
    if (!(mass > 0.0)) continue;
    const double real = mass * cand.jitter;
    if (!heap.empty() && real < heap.top().first) {
      heap.emplace(real, ci);
      continue;
    }
    cover.balls.push_back(CoverBall{cand.y, r, cand.zbar, cand.rho, cand.dist, mass});
    cover.captured += mass;
    cover.complete = cover.captured > 0.5 * cover.epsilon;
    cand.failed = true;  // consumed
  }
  return cover;
}

// ---------------------------------------------------------------------------
// The step

struct StepReport {
  double epsilon = 0.0;  // J before
  double J_after = 0.0;
  double gain = 0.0;     // integral of |z_new - z|^2
  double delta = 0.0;    // (C / (64 n^2)) * captured * gamma^2
  double energy_constant = 0.0;
  std::size_t cover_size = 0;
  double captured = 0.0;
  bool cover_complete = false;
  int k = 0;       // requested frequency multiplier
  int k_used = 0;  // largest multiplier actually used (capped per ball by resolution)
  double gamma = 0.0;
  std::size_t certified_nodes = 0;
};

struct StepOutcome {
  bool accepted = false;
  std::string reason;
  CompositeField field;
  StepReport report;
  std::vector<NodeState::Update> updates;
};

/// Plateau energy constant measured on reference waves: the minimum over a
/// fixed amplitude set and small k of  integral |w|^2 / (|zbar|^2 vol(B_1)).
inline double measure_energy_constant(int d) {
  const int n = 2 * d + 1;
  std::vector<StateVector> amps;
  StateVector a = StateVector::Zero(n);
  a(0) = 1.0;
  amps.push_back(a);
  a = StateVector::Zero(n);
  a(0) = 1.0;
  a(1) = 1.0;
  a(1 + d) = 1.0;
  amps.push_back(a);
  a = StateVector::Zero(n);
  a(0) = 1.0;
  a(1) = 1.0;
  a(2 + d) = 1.0;
  amps.push_back(a);
  a = StateVector::Zero(n);
  a(0) = 0.5;
  a(2) = -1.0;
  a(1 + d) = 0.7;
  a(2 + d) = 0.2;
  amps.push_back(a);
  double c = std::numeric_limits<double>::infinity();
  const std::vector<int> ks = d == 2 ? std::vector<int>{1, 2, 4} : std::vector<int>{1, 2};
  for (int k : ks) {
    for (const auto& z : amps) {
      const auto w = waves::make_wave(z, SpaceTimePoint::Zero(d + 1), 1.0, k, d);
      c = std::min(c, waves::energy_ratio(w, std::max(d == 2 ? 48 : 32, waves::min_resolution(w))));
    }
  }
  return c;
}

/// Adds one wave per cover ball with amplitude gamma * zbar and frequency
/// min(k, resolvable maximum for that ball); re-certifies every quadrature node
/// inside the balls.
inline StepOutcome perturb_step(const CompositeField& field, const Cover& cover, int k, double gamma,
                                const NodeState& nodes, const ActiveRegion& region, double energy_constant,
                                const Options& opts, SampleCache& cache) {
  const auto& q = nodes.quadrature();
  const int d = field.d();
  const int n = 2 * d + 1;
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("perturb_step: gamma must lie in [0, 1]");
  if (k < 1) throw Error("perturb_step: k must be >= 1");

  StepOutcome out{false, {}, field, {}, {}};
  auto& rep = out.report;
  rep.epsilon = cover.epsilon;
  rep.energy_constant = energy_constant;
  rep.cover_size = cover.balls.size();
  rep.captured = cover.captured;
  rep.cover_complete = cover.complete;
  rep.k = k;
  rep.gamma = gamma;

  if (gamma == 0.0 || cover.balls.empty()) {
    rep.J_after = nodes.J();
    out.accepted = true;
    return out;
  }

  std::vector<waves::WaveSpec> added;
  for (const auto& b : cover.balls) {
    if (region.admissible_radius(b.center) < b.radius * (1.0 - 1e-12))
      throw Error("perturb_step: cover ball leaves the active region");
    const int kb = std::min(k, q.max_frequency(b.radius));
    if (kb < 1) throw ResolutionError("perturb_step: cover ball is below the resolvable radius");
    rep.k_used = std::max(rep.k_used, kb);
    added.push_back(waves::make_wave(StateVector(gamma * b.zbar), b.center, b.radius, kb, d));
  }
  for (const auto& w : added) out.field.append(w);

  // Nodes inside the new balls; balls are disjoint so each node meets at most one wave.
  std::vector<std::pair<std::size_t, std::size_t>> touched;  // (node, wave)
  for (std::size_t wi = 0; wi < added.size(); ++wi)
    for (std::size_t i : q.nodes_in_ball(added[wi].center, added[wi].radius)) touched.emplace_back(i, wi);
  std::sort(touched.begin(), touched.end());

  out.updates.resize(touched.size());
  std::vector<double> gain_terms(touched.size());
  parallel::parallel_for(touched.size(), [&](std::size_t j) {
    const auto [i, wi] = touched[j];
    const StateVector dz = waves::wave_eval(added[wi], q.node(i));
    const StateVector z = nodes.z(i) + dz;
    const double dd = constraint::dist_to_K_level(z, nodes.f(i), d);
    out.updates[j] = NodeState::Update{i, z, dd * dd};
    gain_terms[j] = dz.squaredNorm();
  });

  // Clouds are fetched serially; the cache itself is not thread-safe.
  std::vector<std::pair<double, geometry::FacetHull>> clouds;
  std::vector<std::size_t> cloud_of(touched.size());
  for (std::size_t j = 0; j < touched.size(); ++j) {
    const double f = nodes.f(touched[j].first);
    std::size_t c = 0;
    while (c < clouds.size() && clouds[c].first != f) ++c;
    if (c == clouds.size() && f > 0.0) clouds.emplace_back(f, cache.get(f));
    cloud_of[j] = c;
  }

  // Cheap strided pass first so systematic failures are caught early.
  auto certified = [&](std::size_t j) {
    const auto& u = out.updates[j];
    const double f = nodes.f(u.index);
    if (!(f > 0.0)) return false;
    return constraint::in_U_certified_level(u.z, f, d, opts.node_margin, clouds[cloud_of[j]].second);
  };
  constexpr std::size_t kProbe = 17;
  for (std::size_t j = 0; j < touched.size(); j += kProbe) {
    if (!certified(j)) {
      out.reason = "certification failed at node " + std::to_string(out.updates[j].index);
      return out;
    }
  }
  if (!parallel::all_of(touched.size(), [&](std::size_t j) { return j % kProbe == 0 || certified(j); })) {
    out.reason = "certification failed inside a cover ball";
    return out;
  }
  rep.certified_nodes = touched.size();

  double gain = 0.0;
  for (double g : gain_terms) gain += g;
  rep.gain = gain * q.cell_volume();
  rep.delta = energy_constant / (64.0 * n * n) * cover.captured * gamma * gamma;
  rep.J_after = nodes.J_with(out.updates);
  if (rep.gain < rep.delta) {
    out.reason = "gain below the quantitative bound";
    return out;
  }
  out.accepted = true;
  return out;
}

}  // namespace convint::perturbation
