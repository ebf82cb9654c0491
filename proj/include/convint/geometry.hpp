#pragma once

// Convex-hull and Hausdorff kernels over finite point clouds in R^n.
//
// A compact set is represented by a finite inner sample, so every "inside"
// certificate produced here is sound for the true set while "outside" answers
// are only as good as the sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "convint/lp.hpp"
#include "convint/types.hpp"

namespace convint::geometry {

class IndeterminateError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Raised when no candidate direction reaches |zbar| >= dist(z,K)/(2n).
class SegmentBoundError : public Error {
 public:
  SegmentBoundError(const std::string& what, double ratio) : Error(what), achieved_ratio(ratio) {}
  double achieved_ratio;
};

class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(std::vector<Vector> points) : points_(std::move(points)) {
    if (points_.empty()) throw PreconditionError("point cloud must be non-empty");
    const auto n = points_.front().size();
    for (const auto& p : points_) {
      if (p.size() != n) throw DimensionError("point cloud has mixed dimensions");
      if (!p.allFinite()) throw PreconditionError("point cloud contains a non-finite point");
    }
    matrix_.resize(n, static_cast<Eigen::Index>(points_.size()));
    for (std::size_t j = 0; j < points_.size(); ++j) matrix_.col(static_cast<Eigen::Index>(j)) = points_[j];
  }

  int dim() const { return static_cast<int>(matrix_.rows()); }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vector& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  const std::vector<Vector>& points() const { return points_; }
  /// Points as columns.
  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  std::vector<Vector> points_;
  Eigen::MatrixXd matrix_;
};

/// Convex hull of a point cloud whose facet description {x : normals x <= offsets}
/// is known in closed form. Rows are normalized to unit length, so membership,
/// reach along a ray and the distance to the boundary are exact.
class FacetHull {
 public:
  FacetHull(PointCloud points, Eigen::MatrixXd normals, Eigen::VectorXd offsets)
      : cloud_(std::move(points)), normals_(std::move(normals)), offsets_(std::move(offsets)) {
    if (normals_.cols() != cloud_.dim() || normals_.rows() != offsets_.size() || normals_.rows() == 0)
      throw DimensionError("FacetHull: facet matrix does not match the cloud");
    for (Eigen::Index r = 0; r < normals_.rows(); ++r) {
      const double len = normals_.row(r).norm();
      if (!(len > 0.0)) throw PreconditionError("FacetHull: zero facet normal");
      normals_.row(r) /= len;
      offsets_(r) /= len;
    }
  }

  const PointCloud& cloud() const { return cloud_; }
  int dim() const { return cloud_.dim(); }
  std::size_t facets() const { return static_cast<std::size_t>(normals_.rows()); }
  const Eigen::MatrixXd& normals() const { return normals_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }

  /// Signed distance to the boundary: positive inside, negative outside (then a lower bound).
  double depth(const Vector& z) const {
    if (z.size() != dim()) throw DimensionError("FacetHull: vector dimension mismatch");
    return (offsets_ - normals_ * Eigen::VectorXd(z)).minCoeff();
  }

 private:
  PointCloud cloud_;
  Eigen::MatrixXd normals_;
  Eigen::VectorXd offsets_;
};

struct HullCertificate {
  std::vector<double> weights;  // aligned with `support`
  std::vector<int> support;
};

inline constexpr double kFeasibilityTol = 1e-9;

namespace detail {

inline void require_nonempty(const PointCloud& K) {
  if (K.empty()) throw PreconditionError("empty point cloud");
}

inline void require_dim(const Vector& z, const PointCloud& K) {
  require_nonempty(K);
  if (z.size() != K.dim()) throw DimensionError("vector and point cloud dimensions differ");
}

// [P ; 1^T] with optional extra trailing column.
inline Eigen::MatrixXd hull_system(const PointCloud& K, int extra_cols) {
  const int n = K.dim();
  const auto N = static_cast<Eigen::Index>(K.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, N + extra_cols);
  A.topLeftCorner(n, N) = K.matrix();
  A.row(n).head(N).setOnes();
  return A;
}

inline Eigen::VectorXd hull_rhs(const Vector& z) {
  Eigen::VectorXd b(z.size() + 1);
  b.head(z.size()) = z;
  b(z.size()) = 1.0;
  return b;
}

inline lp::Options hull_lp_options(std::size_t points, double tol) {
  lp::Options o;
  o.feasibility_tol = tol;
  o.max_iterations = static_cast<int>(std::max<std::size_t>(10 * points, 64));
  return o;
}

}  // namespace detail

/// Euclidean distance from z to the nearest cloud point.
inline double distance_to_cloud(const Vector& z, const PointCloud& K) {
  detail::require_dim(z, K);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : K) best = std::min(best, (p - z).squaredNorm());
  return std::sqrt(best);
}

inline double hausdorff_distance(const PointCloud& A, const PointCloud& B) {
  detail::require_nonempty(A);
  detail::require_nonempty(B);
  if (A.dim() != B.dim()) throw DimensionError("hausdorff_distance: dimension mismatch");
  auto directed = [](const PointCloud& X, const PointCloud& Y) {
    double worst = 0.0;
    for (const auto& x : X) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : Y) best = std::min(best, (x - y).squaredNorm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::sqrt(std::max(directed(A, B), directed(B, A)));
}

/// Barycentric certificate for z in conv(K), or nullopt when the l1 residual
/// of the best convex combination exceeds `tol`.
inline std::optional<HullCertificate> hull_membership(const Vector& z, const PointCloud& K,
                                                      double tol = kFeasibilityTol) {
  detail::require_dim(z, K);
  if (tol < 0.0) throw PreconditionError("hull_membership: negative tolerance");
  auto opts = detail::hull_lp_options(K.size(), tol);
  opts.feasibility_only = true;
  const auto res = lp::solve(detail::hull_system(K, 0), detail::hull_rhs(z), Eigen::VectorXd(), opts);
  if (res.status == lp::Status::iteration_limit)
    throw IndeterminateError("hull_membership: feasibility iteration cap reached");
  if (res.status != lp::Status::optimal) return std::nullopt;

  HullCertificate cert;
  double total = 0.0;
  for (std::size_t j = 0; j < res.x.size(); ++j) total += res.x[j];
  if (total <= 0.0) return std::nullopt;
  Vector recon = Vector::Zero(z.size());
  for (std::size_t j = 0; j < res.x.size(); ++j) {
    if (res.x[j] <= 0.0) continue;
    cert.support.push_back(static_cast<int>(j));
    cert.weights.push_back(res.x[j] / total);
    recon += cert.weights.back() * K[j];
  }
  if ((recon - z).norm() > std::max(tol, 1e-12)) return std::nullopt;
  return cert;
}

inline bool in_hull(const Vector& z, const PointCloud& K, double tol = kFeasibilityTol) {
  return hull_membership(z, K, tol).has_value();
}

/// Largest t >= 0 with z + t*dir in conv(K); nullopt when z itself is outside.
inline std::optional<double> ray_reach(const Vector& z, const PointCloud& K, const Vector& dir,
                                       double tol = kFeasibilityTol) {
  detail::require_dim(z, K);
  if (dir.size() != z.size()) throw DimensionError("ray_reach: direction dimension mismatch");
  if (dir.squaredNorm() == 0.0) throw PreconditionError("ray_reach: zero direction");
  const int n = K.dim();
  const auto N = static_cast<Eigen::Index>(K.size());
  Eigen::MatrixXd A = detail::hull_system(K, 1);
  A.col(N).head(n) = -dir;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(N + 1);
  c(N) = -1.0;
  auto opts = detail::hull_lp_options(K.size(), tol);
  const auto res = lp::solve(A, detail::hull_rhs(z), c, opts);
  switch (res.status) {
    case lp::Status::optimal:
      return std::max(0.0, res.x[static_cast<std::size_t>(N)]);
    case lp::Status::infeasible:
      return std::nullopt;
    case lp::Status::unbounded:
      throw PreconditionError("ray_reach: unbounded ray (degenerate cloud)");
    case lp::Status::iteration_limit:
      break;
  }
  throw IndeterminateError("ray_reach: iteration cap reached");
}

inline bool in_hull(const Vector& z, const FacetHull& H, double tol = kFeasibilityTol) { return H.depth(z) >= -tol; }

inline std::optional<double> ray_reach(const Vector& z, const FacetHull& H, const Vector& dir,
                                       double tol = kFeasibilityTol) {
  if (dir.size() != z.size()) throw DimensionError("ray_reach: direction dimension mismatch");
  if (dir.squaredNorm() == 0.0) throw PreconditionError("ray_reach: zero direction");
  if (!in_hull(z, H, tol)) return std::nullopt;
  const Eigen::VectorXd slack = H.offsets() - H.normals() * Eigen::VectorXd(z);
  const Eigen::VectorXd rate = H.normals() * Eigen::VectorXd(dir);
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < rate.size(); ++r)
    if (rate(r) > 0.0) t = std::min(t, std::max(0.0, slack(r) + tol) / rate(r));
  if (!std::isfinite(t)) throw PreconditionError("ray_reach: unbounded ray (degenerate hull)");
  return t;
}

/// Exact radius of the largest ball around z inside the hull (0 on or outside the boundary).
inline double interior_margin(const Vector& z, const FacetHull& H) {
  const double d = H.depth(z);
  return d < 1e-12 ? 0.0 : d;
}

inline bool has_margin(const Vector& z, const FacetHull& H, double margin) {
  return margin <= 0.0 ? in_hull(z, H) : H.depth(z) >= margin;
}

/// Certified radius r with B_r(z) inside conv(K): the cross-polytope z +- s e_j
/// fits, so the ball of radius s/sqrt(n) does.
inline double interior_margin(const Vector& z, const PointCloud& K) {
  detail::require_dim(z, K);
  const int n = K.dim();
  double s = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n && s > 0.0; ++j) {
    for (double sign : {1.0, -1.0}) {
      Vector e = Vector::Zero(n);
      e(j) = sign;
      const auto t = ray_reach(z, K, e);
      if (!t) throw PreconditionError("interior_margin: point is not in the hull");
      s = std::min(s, *t);
    }
  }
  if (s < 1e-12) return 0.0;
  return s / std::sqrt(static_cast<double>(n));
}

/// Threshold form of interior_margin(z, K) >= margin, using feasibility only.
inline bool has_margin(const Vector& z, const PointCloud& K, double margin) {
  detail::require_dim(z, K);
  const int n = K.dim();
  const double s = margin * std::sqrt(static_cast<double>(n));
  if (s <= 0.0) return in_hull(z, K);
  Vector p = z;
  for (int j = 0; j < n; ++j) {
    for (double sign : {1.0, -1.0}) {
      p(j) = z(j) + sign * s;
      if (!in_hull(p, K)) return false;
    }
    p(j) = z(j);
  }
  return true;
}

struct SegmentOptions {
  /// zbar = interior_factor * (maximal reach) keeps the endpoints strictly inside.
  double interior_factor = 0.9;
  int random_directions = 16;
  std::uint64_t seed = 0;
  /// Cap on pairwise-difference candidates (0 = all), taken with a fixed stride.
  std::size_t max_pairs = 0;
};

struct SegmentResult {
  Vector zbar;
  /// |zbar| * 2n / dist(z, K); >= 1 on success.
  double ratio = 0.0;
  double endpoint_margin = 0.0;
};

namespace detail {

template <class Hull>
SegmentResult segment_direction_impl(const Vector& z, const Hull& H, const PointCloud& K, const SegmentOptions& opts) {
  const int n = K.dim();
  if (z.size() != n) throw DimensionError("segment_direction: vector and point cloud dimensions differ");
  if (interior_margin(z, H) <= 0.0) throw PreconditionError("segment_direction: z is not an interior point");

  double best_len = -1.0;
  Vector best_dir;
  double best_t = 0.0;
  auto consider = [&](const Vector& d) {
    const double norm = d.norm();
    if (norm < 1e-14) return;
    const auto tp = ray_reach(z, H, d);
    const auto tm = ray_reach(z, H, Vector(-d));
    if (!tp || !tm) return;
    const double t = std::min(*tp, *tm);
    if (t * norm > best_len * (1.0 + 1e-9)) {  // near-ties keep the earlier candidate
      best_len = t * norm;
      best_dir = d;
      best_t = t;
    }
  };

  const std::size_t N = K.size();
  const std::size_t pairs = N * (N - 1) / 2;
  const std::size_t stride = (opts.max_pairs > 0 && pairs > opts.max_pairs) ? (pairs + opts.max_pairs - 1) / opts.max_pairs : 1;
  std::size_t pair_index = 0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j, ++pair_index) {
      if (pair_index % stride != 0) continue;
      consider(Vector(K[j] - K[i]));
    }
  }
  for (int j = 0; j < n; ++j) {
    Vector e = Vector::Zero(n);
    e(j) = 1.0;
    consider(e);
  }
  std::mt19937_64 rng(mix_seed(opts.seed));
  std::normal_distribution<double> normal;
  for (int r = 0; r < opts.random_directions; ++r) {
    Vector d(n);
    for (int j = 0; j < n; ++j) d(j) = normal(rng);
    consider(d);
  }

  const double dist = distance_to_cloud(z, K);
  if (best_len <= 0.0) throw SegmentBoundError("segment_direction: no candidate direction has positive reach", 0.0);

  SegmentResult out;
  out.zbar = opts.interior_factor * best_t * best_dir;
  const double len = out.zbar.norm();
  out.ratio = dist > 0.0 ? len * 2.0 * n / dist : std::numeric_limits<double>::infinity();
  const double m_plus = interior_margin(Vector(z + out.zbar), H);
  const double m_minus = interior_margin(Vector(z - out.zbar), H);
  out.endpoint_margin = std::min(m_plus, m_minus);
  if (out.endpoint_margin <= 0.0)
    throw SegmentBoundError("segment_direction: endpoints could not be certified interior", out.ratio);
  if (out.ratio < 1.0)
    throw SegmentBoundError("segment_direction: |zbar| below dist(z,K)/(2n), achieved ratio " + std::to_string(out.ratio),
                            out.ratio);
  return out;
}

}  // namespace detail

/// Finds zbar with [z - zbar, z + zbar] inside int conv(K) and |zbar| >= dist(z,K)/(2n).
///
/// Candidates are scanned in a fixed order (pairwise differences in index
/// order, then the coordinate axes, then seeded random unit vectors) and the
/// first one with the largest symmetric reach wins.
inline SegmentResult segment_direction(const Vector& z, const PointCloud& K, const SegmentOptions& opts = {}) {
  detail::require_dim(z, K);
  return detail::segment_direction_impl(z, K, K, opts);
}

/// Same search with exact reach and margins from a facet description.
inline SegmentResult segment_direction(const Vector& z, const FacetHull& H, const SegmentOptions& opts = {}) {
  return detail::segment_direction_impl(z, H, H.cloud(), opts);
}

/// True iff every point of C keeps a positive interior margin in conv(K2).
/// Precondition: every point of C is interior to conv(K).
inline bool hull_stability_check(const PointCloud& C, const PointCloud& K, const PointCloud& K2) {
  if (C.dim() != K.dim() || K.dim() != K2.dim()) throw DimensionError("hull_stability_check: dimension mismatch");
  for (const auto& c : C) {
    if (!in_hull(c, K) || interior_margin(c, K) <= 0.0)
      throw PreconditionError("hull_stability_check: C is not inside int conv K");
  }
  for (const auto& c : C) {
    if (!in_hull(c, K2)) return false;
    if (interior_margin(c, K2) <= 0.0) return false;
  }
  return true;
}

}  // namespace convint::geometry
