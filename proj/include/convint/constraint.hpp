#pragma once

// The constraint family y -> K_y for the continuity equation written as a
// first-order system in z = (u, m, b):
//
//   K_y = { (u, m, b) : m = u b, |b| = 1, u^2 = F(y) }   for y in U = I x Omega,
//   K_y = { 0 }                                          otherwise,
//
// with F(t, x) = E(t) / |Omega| on Omega.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <tuple>
#include <utility>
#include <vector>

#include "convint/geometry.hpp"
#include "convint/profile.hpp"
#include "convint/types.hpp"

namespace convint::constraint {

class DegenerateConstraintError : public Error {
 public:
  using Error::Error;
};

/// Axis-aligned open box.
struct Box {
  Vector lo;
  Vector hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const { return (hi - lo).prod(); }
  bool contains(const Vector& x) const {
    for (int i = 0; i < dim(); ++i)
      if (!(x(i) > lo(i) && x(i) < hi(i))) return false;
    return true;
  }
  /// Distance from an interior point to the boundary.
  double inner_distance(const Vector& x) const {
    double r = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim(); ++i) r = std::min({r, x(i) - lo(i), hi(i) - x(i)});
    return r;
  }
  bool operator==(const Box& o) const { return lo == o.lo && hi == o.hi; }
};

inline Box unit_box(int d) { return Box{Vector::Zero(d), Vector::Ones(d)}; }

class ConstraintParams {
 public:
  ConstraintParams(int d, Box omega, EnergyProfile profile)
      : d_(d), omega_(std::move(omega)), profile_(std::move(profile)) {
    if (d_ < 2 || d_ > 3) throw DimensionError("constraint: spatial dimension must be 2 or 3");
    if (omega_.lo.size() != d_ || omega_.hi.size() != d_) throw DimensionError("constraint: Omega dimension mismatch");
    for (int i = 0; i < d_; ++i)
      if (!(omega_.hi(i) > omega_.lo(i))) throw Error("constraint: Omega is degenerate");
    volume_ = omega_.volume();
  }

  int d() const { return d_; }
  int n() const { return 2 * d_ + 1; }
  const Box& omega() const { return omega_; }
  const EnergyProfile& profile() const { return profile_; }
  double omega_volume() const { return volume_; }
  StateLayout layout() const { return StateLayout{d_}; }

  /// Space-time box U = I x Omega.
  Box space_time_box() const {
    Box b{Vector(d_ + 1), Vector(d_ + 1)};
    b.lo(0) = profile_.t0();
    b.hi(0) = profile_.t1();
    b.lo.tail(d_) = omega_.lo;
    b.hi.tail(d_) = omega_.hi;
    return b;
  }

  bool in_U(const SpaceTimePoint& y) const {
    if (!(y(0) > profile_.t0() && y(0) < profile_.t1())) return false;
    return omega_.contains(y.tail(d_));
  }

  /// F(y) = E(t) / |Omega| on U, zero outside.
  double F(const SpaceTimePoint& y) const { return in_U(y) ? profile_(y(0)) / volume_ : 0.0; }

  bool operator==(const ConstraintParams& o) const {
    return d_ == o.d_ && omega_ == o.omega_ && profile_ == o.profile_;
  }

 private:
  int d_;
  Box omega_;
  EnergyProfile profile_;
  double volume_ = 1.0;
};

inline void require_point(const SpaceTimePoint& y, const ConstraintParams& p) {
  if (y.size() != p.d() + 1) throw DimensionError("space-time point has wrong dimension");
}

inline void require_state(const StateVector& z, const ConstraintParams& p) {
  if (z.size() != p.n()) throw DimensionError("state vector has wrong dimension");
}

/// f(y) = sqrt(F(y)).
inline double f_value(const ConstraintParams& params, const SpaceTimePoint& y) {
  require_point(y, params);
  return std::sqrt(params.F(y));
}

/// Exact distance from z to K_y for a given level f:
///   min over sigma of sqrt((u - sigma f)^2 + |m|^2 + f^2 + |b|^2 + 1 - 2 |sigma f m + b|).
inline double dist_to_K_level(const StateVector& z, double f, int d) {
  const double u = z(0);
  const auto m = z.segment(1, d);
  const auto b = z.segment(1 + d, d);
  const double base = m.squaredNorm() + f * f + b.squaredNorm() + 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (double sigma : {1.0, -1.0}) {
    const double v = (sigma * f * m + b).norm();
    const double du = u - sigma * f;
    best = std::min(best, du * du + base - 2.0 * v);
  }
  return std::sqrt(std::max(0.0, best));
}

inline double dist_to_K(const StateVector& z, const SpaceTimePoint& y, const ConstraintParams& params) {
  require_state(z, params);
  require_point(y, params);
  if (!params.in_U(y)) return z.norm();
  return dist_to_K_level(z, std::sqrt(params.F(y)), params.d());
}

/// Quasi-uniform unit directions: equispaced on the circle, Fibonacci lattice on the sphere.
inline std::vector<Vector> unit_directions(int d, int count) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  if (d == 2) {
    for (int i = 0; i < count; ++i) {
      const double th = 2.0 * std::numbers::pi * i / count;
      Vector v(2);
      v << std::cos(th), std::sin(th);
      out.push_back(v);
    }
  } else if (d == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double zc = 1.0 - (2.0 * i + 1.0) / count;
      const double rc = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      const double ph = golden * i;
      Vector v(3);
      v << rc * std::cos(ph), rc * std::sin(ph), zc;
      out.push_back(v);
    }
  } else {
    throw DimensionError("unit_directions: only d = 2, 3 are supported");
  }
  return out;
}

inline int default_sample_count(int d) { return d == 2 ? 64 : 256; }

/// Samples of K at level f: (sigma f, sigma f beta, beta) for sigma = +-1 and count/2 directions beta.
inline geometry::PointCloud sample_K_level(double f, int d, int count) {
  if (count < 2 * (d + 1)) throw geometry::PreconditionError("sample_K: count must be at least 2(d+1)");
  if (!(f > 0.0)) throw DegenerateConstraintError("sample_K: degenerate constraint (f = 0)");
  const auto dirs = unit_directions(d, count / 2);
  const StateLayout L{d};
  std::vector<Vector> pts;
  pts.reserve(dirs.size() * 2);
  for (double sigma : {1.0, -1.0})
    for (const auto& beta : dirs) pts.push_back(L.make(sigma * f, Vector(sigma * f * beta), beta));
  return geometry::PointCloud(std::move(pts));
}

inline geometry::PointCloud sample_K(const SpaceTimePoint& y, const ConstraintParams& params, int count) {
  require_point(y, params);
  if (!params.in_U(y)) throw geometry::PreconditionError("sample_K: y is outside U");
  return sample_K_level(std::sqrt(params.F(y)), params.d(), count);
}

/// Necessary condition for z in conv K_y with margin: |u| <= f, |m| <= f, |b| <= 1.
inline bool within_hull_box(const StateVector& z, double f, int d, double margin) {
  if (std::abs(z(0)) > f - margin) return false;
  if (z.segment(1, d).norm() > f - margin) return false;
  if (z.segment(1 + d, d).norm() > 1.0 - margin) return false;
  return true;
}

/// Facets {a . x <= c} of the polytope spanned by unit_directions(d, count), by
/// brute-force enumeration (cached; count is small).
inline const std::vector<std::pair<Vector, double>>& direction_facets(int d, int count) {
  static std::vector<std::tuple<int, int, std::vector<std::pair<Vector, double>>>> memo;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  for (const auto& [md, mc, f] : memo)
    if (md == d && mc == count) return f;
  const auto B = unit_directions(d, count);
  const auto N = B.size();
  std::vector<std::pair<Vector, double>> out;
  auto facet = [&](Vector nrm, const Vector& p0) {
    const double len = nrm.norm();
    if (len < 1e-12) return;
    nrm /= len;
    double off = nrm.dot(p0);
    if (off < 0.0) {
      nrm = -nrm;
      off = -off;
    }
    for (const auto& q : B)
      if (nrm.dot(q) > off + 1e-12) return;
    for (const auto& [a, c] : out)
      if ((a - nrm).norm() < 1e-12) return;
    out.emplace_back(nrm, off);
  };
  if (d == 2) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j) {
        Vector nrm(2);
        nrm << B[j](1) - B[i](1), B[i](0) - B[j](0);
        facet(nrm, B[i]);
      }
  } else {
    // Points lie on the sphere, so a plane through three of them is a facet iff
    // no other point is strictly beyond it; test with plain arrays.
    std::vector<std::array<double, 3>> P(N);
    for (std::size_t i = 0; i < N; ++i) P[i] = {B[i](0), B[i](1), B[i](2)};
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j)
        for (std::size_t k = j + 1; k < N; ++k) {
          const double a0 = P[j][0] - P[i][0], a1 = P[j][1] - P[i][1], a2 = P[j][2] - P[i][2];
          const double c0 = P[k][0] - P[i][0], c1 = P[k][1] - P[i][1], c2 = P[k][2] - P[i][2];
          double n0 = a1 * c2 - a2 * c1, n1 = a2 * c0 - a0 * c2, n2 = a0 * c1 - a1 * c0;
          const double len = std::sqrt(n0 * n0 + n1 * n1 + n2 * n2);
          if (len < 1e-12) continue;
          double off = (n0 * P[i][0] + n1 * P[i][1] + n2 * P[i][2]) / len;
          if (off < 0.0) {
            n0 = -n0, n1 = -n1, n2 = -n2, off = -off;
          }
          bool beyond = false;
          for (std::size_t q = 0; q < N && !beyond; ++q)
            beyond = (n0 * P[q][0] + n1 * P[q][1] + n2 * P[q][2]) / len > off + 1e-12;
          if (beyond) continue;
          Vector nrm(3);
          nrm << n0, n1, n2;
          facet(nrm, B[i]);
        }
  }
  memo.emplace_back(d, count, std::move(out));
  return std::get<2>(memo.back());
}

/// Exact facet description of conv(sample_K_level(f, d, count)).
///
/// In the coordinates u' = u/f, p = (m/f + b)/2, q = (b - m/f)/2 the sigma = +1
/// samples are (1, beta, 0) and the sigma = -1 samples are (-1, 0, beta), so the
/// hull is { p in lambda P, q in (1 - lambda) P : lambda = (1 + u')/2 } with P the
/// hull of the directions. Each facet a . x <= c of P yields two linear rows.
inline geometry::FacetHull sampled_hull(double f, int d, int count) {
  auto cloud = sample_K_level(f, d, count);
  const auto& P = direction_facets(d, count / 2);
  const int n = 2 * d + 1;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(2 * P.size() + 2), n);
  Eigen::VectorXd c(A.rows());
  A.setZero();
  Eigen::Index r = 0;
  for (const auto& [a, off] : P) {
    A(r, 0) = -off / (2.0 * f);
    A.block(r, 1, 1, d) = (a / (2.0 * f)).transpose();
    A.block(r, 1 + d, 1, d) = (a / 2.0).transpose();
    c(r++) = off / 2.0;
    A(r, 0) = off / (2.0 * f);
    A.block(r, 1, 1, d) = (-a / (2.0 * f)).transpose();
    A.block(r, 1 + d, 1, d) = (a / 2.0).transpose();
    c(r++) = off / 2.0;
  }
  A(r, 0) = 1.0;
  c(r++) = f;
  A(r, 0) = -1.0;
  c(r++) = f;
  return geometry::FacetHull(std::move(cloud), std::move(A), std::move(c));
}

/// Sound test of "z in int conv K_y with interior radius >= margin" on the sampled hull.
inline bool in_U_certified_level(const StateVector& z, double f, int d, double margin, const geometry::FacetHull& H) {
  if (!within_hull_box(z, f, d, margin)) return false;
  return geometry::has_margin(z, H, std::max(margin, 1e-12));
}

/// LP form of the same test on a bare point cloud (cross-polytope certificate).
inline bool in_U_certified_level(const StateVector& z, double f, int d, double margin, const geometry::PointCloud& K) {
  if (!within_hull_box(z, f, d, margin)) return false;
  return geometry::has_margin(z, K, margin);
}

inline bool in_U_certified(const StateVector& z, const SpaceTimePoint& y, const ConstraintParams& params, double margin,
                           int count) {
  require_state(z, params);
  if (!params.in_U(y)) throw geometry::PreconditionError("in_U_certified: y is outside U");
  const double f = std::sqrt(params.F(y));
  return in_U_certified_level(z, f, params.d(), margin, sampled_hull(f, params.d(), count));
}

/// (d_H of the matched samples, 2 |f(y) - f(y2)|).
inline std::pair<double, double> hausdorff_continuity_bound(const SpaceTimePoint& y, const SpaceTimePoint& y2,
                                                            const ConstraintParams& params, int count) {
  const auto A = sample_K(y, params, count);
  const auto B = sample_K(y2, params, count);
  return {geometry::hausdorff_distance(A, B), 2.0 * std::abs(f_value(params, y) - f_value(params, y2))};
}

/// Caches sampled clouds per level f; the solver revisits the same few levels constantly.
class SampleCache {
 public:
  SampleCache(int d, int count) : d_(d), count_(count) {}

  const geometry::FacetHull& get(double f) {
    for (const auto& [level, hull] : entries_)
      if (level == f) return hull;
    if (entries_.size() >= kCapacity) entries_.erase(entries_.begin());
    entries_.emplace_back(f, sampled_hull(f, d_, count_));
    return entries_.back().second;
  }

  int d() const { return d_; }
  int count() const { return count_; }

 private:
  static constexpr std::size_t kCapacity = 512;
  int d_;
  int count_;
  std::vector<std::pair<double, geometry::FacetHull>> entries_;
};

/// Times with E(t) >= floor, as a sorted list of open intervals inside (t0, t1).
class ActiveRegion {
 public:
  ActiveRegion(const ConstraintParams& params, double energy_floor, int scan_resolution = 4096)
      : omega_(params.omega()), d_(params.d()), floor_(energy_floor) {
    const auto& E = params.profile();
    const double t0 = E.t0(), t1 = E.t1();
    const double dt = (t1 - t0) / scan_resolution;
    auto active = [&](double t) { return E(t) >= floor_ && E(t) > 0.0; };
    auto refine = [&](double a, double b) {  // active(a) != active(b)
      const bool fa = active(a);
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        (active(mid) == fa ? a : b) = mid;
      }
      return fa ? a : b;  // innermost active endpoint
    };
    bool inside = false;
    double start = t0;
    double prev = t0 + 0.5 * dt;
    if (active(prev)) {
      inside = true;
      start = t0;
    }
    for (int i = 1; i < scan_resolution; ++i) {
      const double t = t0 + (i + 0.5) * dt;
      const bool a = active(t);
      if (a && !inside) {
        start = refine(prev, t);
        inside = true;
      } else if (!a && inside) {
        intervals_.emplace_back(start, refine(prev, t));
        inside = false;
      }
      prev = t;
    }
    if (inside) intervals_.emplace_back(start, t1);
  }

  const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  double floor() const { return floor_; }

  bool contains(const SpaceTimePoint& y) const { return admissible_radius(y) > 0.0; }

  /// Largest r with B_r(y) inside the active region (0 if y is not active).
  double admissible_radius(const SpaceTimePoint& y) const {
    if (!omega_.contains(y.tail(d_))) return 0.0;
    const double rx = omega_.inner_distance(y.tail(d_));
    for (const auto& [a, b] : intervals_) {
      if (y(0) > a && y(0) < b) return std::min({rx, y(0) - a, b - y(0)});
    }
    return 0.0;
  }

 private:
  Box omega_;
  int d_;
  double floor_;
  std::vector<std::pair<double, double>> intervals_;
};

}  // namespace convint::constraint
