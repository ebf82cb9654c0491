#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace convint {

/// Small dense vector; the fixed upper bound keeps hot loops free of heap traffic.
inline constexpr int kMaxDim = 16;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// Point y = (t, x_1, ..., x_d) of space-time.
using SpaceTimePoint = Vector;

/// Unknowns z = (u, m, b) of the linear system, n = 2d + 1 entries.
using StateVector = Vector;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A quadrature grid is too coarse for the requested oscillation frequency.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

inline int state_dim(int d) { return 2 * d + 1; }

/// Index helpers for the (u, m, b) layout.
struct StateLayout {
  int d;

  int n() const { return 2 * d + 1; }
  static constexpr int u() { return 0; }
  int m(int i) const { return 1 + i; }
  int b(int i) const { return 1 + d + i; }

  StateVector make(double u, const Vector& m, const Vector& b) const {
    StateVector z(n());
    z(0) = u;
    z.segment(1, d) = m;
    z.segment(1 + d, d) = b;
    return z;
  }
  Vector m_of(const StateVector& z) const { return z.segment(1, d); }
  Vector b_of(const StateVector& z) const { return z.segment(1 + d, d); }
};

/// Volume of the unit ball in R^dim.
inline double unit_ball_volume(int dim) {
  return std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

inline double ball_volume(int dim, double r) { return unit_ball_volume(dim) * std::pow(r, dim); }

/// splitmix64 mixing; used to derive independent streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace convint
