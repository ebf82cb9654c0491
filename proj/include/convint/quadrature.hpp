#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "convint/constraint.hpp"
#include "convint/types.hpp"
#include "convint/waves.hpp"

namespace convint {

/// Value of a midpoint-rule integral with a Richardson error estimate
/// |Q_h - Q_2h| / 3 from one coarsening.
struct QuadratureValue {
  double value = 0.0;
  double error = 0.0;
};

/// Uniform midpoint tensor grid over U = I x Omega with nt x nx^d cells.
class Quadrature {
 public:
  Quadrature(const constraint::ConstraintParams& params, int nt, int nx) : d_(params.d()), nt_(nt), nx_(nx) {
    if (nt < 1 || nx < 1) throw Error("quadrature: resolutions must be positive");
    const auto box = params.space_time_box();
    lo_ = box.lo;
    width_ = Vector(d_ + 1);
    width_(0) = (box.hi(0) - box.lo(0)) / nt;
    for (int i = 1; i <= d_; ++i) width_(i) = (box.hi(i) - box.lo(i)) / nx;
    cell_volume_ = width_.prod();
    spatial_cells_ = 1;
    for (int i = 0; i < d_; ++i) spatial_cells_ *= static_cast<std::size_t>(nx);
  }

  int d() const { return d_; }
  int nt() const { return nt_; }
  int nx() const { return nx_; }
  std::size_t size() const { return static_cast<std::size_t>(nt_) * spatial_cells_; }
  std::size_t spatial_size() const { return spatial_cells_; }
  double cell_volume() const { return cell_volume_; }
  double spatial_cell_volume() const { return cell_volume_ / width_(0); }
  const Vector& widths() const { return width_; }
  double max_width() const { return width_.maxCoeff(); }

  double time_node(int it) const { return lo_(0) + (it + 0.5) * width_(0); }

  /// Node index = it * nx^d + spatial index; spatial index is row-major in x_1..x_d.
  SpaceTimePoint node(std::size_t index) const {
    SpaceTimePoint y(d_ + 1);
    std::size_t rest = index % spatial_cells_;
    y(0) = time_node(static_cast<int>(index / spatial_cells_));
    for (int i = d_; i >= 1; --i) {
      const auto ix = rest % static_cast<std::size_t>(nx_);
      rest /= static_cast<std::size_t>(nx_);
      y(i) = lo_(i) + (static_cast<double>(ix) + 0.5) * width_(i);
    }
    return y;
  }

  /// Integer coordinates (it, ix_1, ..., ix_d) of a node.
  std::vector<int> coords(std::size_t index) const {
    std::vector<int> c(static_cast<std::size_t>(d_ + 1));
    std::size_t rest = index % spatial_cells_;
    c[0] = static_cast<int>(index / spatial_cells_);
    for (int i = d_; i >= 1; --i) {
      c[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(nx_));
      rest /= static_cast<std::size_t>(nx_);
    }
    return c;
  }

  std::size_t index_of(const std::vector<int>& c) const {
    std::size_t s = 0;
    for (int i = 1; i <= d_; ++i) s = s * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(c[static_cast<std::size_t>(i)]);
    return static_cast<std::size_t>(c[0]) * spatial_cells_ + s;
  }

  /// Grid with half the cells per axis (at least one), used for error estimates.
  Quadrature coarsened(const constraint::ConstraintParams& params) const {
    return Quadrature(params, std::max(1, nt_ / 2), std::max(1, nx_ / 2));
  }

  /// Largest k that keeps 8 cells per period on a wave of radius r.
  int max_frequency(double r) const { return static_cast<int>(std::floor(r / (8.0 * max_width()) + 1e-9)); }

  bool resolves(const waves::WaveSpec& w) const { return w.k <= max_frequency(w.radius); }

  template <class Range>
  void require_resolves(const Range& wave_list, const char* who) const {
    for (const auto& w : wave_list) {
      if (!resolves(w))
        throw ResolutionError(std::string(who) + ": grid does not resolve a wave with r = " + std::to_string(w.radius) +
                              ", k = " + std::to_string(w.k));
    }
  }

  /// Node indices whose points lie inside the open ball B_r(c).
  std::vector<std::size_t> nodes_in_ball(const SpaceTimePoint& c, double r) const {
    std::vector<std::size_t> out;
    std::vector<int> lo(static_cast<std::size_t>(d_ + 1)), hi(static_cast<std::size_t>(d_ + 1));
    for (int a = 0; a <= d_; ++a) {
      const int n = a == 0 ? nt_ : nx_;
      lo[static_cast<std::size_t>(a)] = std::max(0, static_cast<int>(std::floor((c(a) - r - lo_(a)) / width_(a) - 0.5)));
      hi[static_cast<std::size_t>(a)] = std::min(n - 1, static_cast<int>(std::ceil((c(a) + r - lo_(a)) / width_(a) - 0.5)));
      if (lo[static_cast<std::size_t>(a)] > hi[static_cast<std::size_t>(a)]) return out;
    }
    std::vector<int> idx = lo;
    SpaceTimePoint y(d_ + 1);
    while (true) {
      double r2 = 0.0;
      for (int a = 0; a <= d_; ++a) {
        y(a) = lo_(a) + (idx[static_cast<std::size_t>(a)] + 0.5) * width_(a);
        r2 += (y(a) - c(a)) * (y(a) - c(a));
      }
      if (r2 < r * r) out.push_back(index_of(idx));
      int a = d_;
      while (a >= 0 && ++idx[static_cast<std::size_t>(a)] > hi[static_cast<std::size_t>(a)]) {
        idx[static_cast<std::size_t>(a)] = lo[static_cast<std::size_t>(a)];
        --a;
      }
      if (a < 0) break;
    }
    return out;
  }

 private:
  int d_;
  int nt_;
  int nx_;
  Vector lo_;
  Vector width_;
  double cell_volume_ = 1.0;
  std::size_t spatial_cells_ = 1;
};

}  // namespace convint
