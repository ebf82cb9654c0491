#pragma once

// Independent reference computations used by the tests. None of these call the
// library routine they are compared against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <cstdint>
#include <string>
#include <vector>

#include "convint/types.hpp"

namespace oracle {

using convint::StateVector;
using convint::Vector;

/// Golden-section minimum of a unimodal g on [a, b].
inline double golden_min(const std::function<double(double)>& g, double a, double b, int iters = 120) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double gc = g(c), gd = g(d);
  for (int i = 0; i < iters; ++i) {
    if (gc < gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - r * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + r * (b - a);
      gd = g(d);
    }
  }
  return 0.5 * (a + b);
}

/// |z - (sigma f, sigma f beta, beta)|^2.
inline double point_dist2(const StateVector& z, double f, int d, double sigma, const Vector& beta) {
  double s = (z(0) - sigma * f) * (z(0) - sigma * f);
  for (int i = 0; i < d; ++i) {
    const double dm = z(1 + i) - sigma * f * beta(i);
    const double db = z(1 + d + i) - beta(i);
    s += dm * dm + db * db;
  }
  return s;
}

/// Distance to K at level f by sampling (sigma, beta) on a grid and refining the
/// best grid point with golden-section searches in tangent coordinates.
inline double dist_to_K_bruteforce(const StateVector& z, double f, int d) {
  double best = std::numeric_limits<double>::infinity();
  for (double sigma : {1.0, -1.0}) {
    if (d == 2) {
      const int N = 720;
      double th_best = 0.0, v_best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < N; ++i) {
        const double th = 2.0 * std::numbers::pi * i / N;
        Vector b(2);
        b << std::cos(th), std::sin(th);
        const double v = point_dist2(z, f, d, sigma, b);
        if (v < v_best) {
          v_best = v;
          th_best = th;
        }
      }
      const double h = 2.0 * std::numbers::pi / N;
      auto g = [&](double th) {
        Vector b(2);
        b << std::cos(th), std::sin(th);
        return point_dist2(z, f, d, sigma, b);
      };
      const double th = golden_min(g, th_best - h, th_best + h);
      best = std::min({best, v_best, g(th)});
    } else {
      const int NT = 90, NP = 180;
      Vector b_best(3);
      double v_best = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= NT; ++i) {
        const double th = std::numbers::pi * i / NT;
        for (int j = 0; j < NP; ++j) {
          const double ph = 2.0 * std::numbers::pi * j / NP;
          Vector b(3);
          b << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
          const double v = point_dist2(z, f, d, sigma, b);
          if (v < v_best) {
            v_best = v;
            b_best = b;
          }
        }
      }
      // Coordinate golden searches in the tangent plane at the current point.
      double span = 0.1;
      for (int round = 0; round < 40; ++round) {
        Vector e1 = (std::abs(b_best(0)) < 0.9 ? Vector::Unit(3, 0) : Vector::Unit(3, 1));
        e1 -= e1.dot(b_best) * b_best;
        e1.normalize();
        Vector e2(3);
        e2 << b_best(1) * e1(2) - b_best(2) * e1(1), b_best(2) * e1(0) - b_best(0) * e1(2),
            b_best(0) * e1(1) - b_best(1) * e1(0);
        for (const Vector& e : {e1, e2}) {
          auto g = [&](double s) { return point_dist2(z, f, d, sigma, Vector((b_best + s * e).normalized())); };
          const double s = golden_min(g, -span, span, 80);
          const Vector cand = (b_best + s * e).normalized();
          const double v = point_dist2(z, f, d, sigma, cand);
          if (v < v_best) {
            v_best = v;
            b_best = cand;
          }
        }
        span *= 0.6;
      }
      best = std::min(best, v_best);
    }
  }
  return std::sqrt(std::max(0.0, best));
}

/// Hausdorff distance between two finite point sets by exhaustive search.
inline double hausdorff(const std::vector<Vector>& A, const std::vector<Vector>& B) {
  auto directed = [](const std::vector<Vector>& X, const std::vector<Vector>& Y) {
    double h = 0.0;
    for (const auto& x : X) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& y : Y) m = std::min(m, (x - y).norm());
      h = std::max(h, m);
    }
    return h;
  };
  return std::max(directed(A, B), directed(B, A));
}

/// Largest t in [0, hi] with pred(z + t dir) true, by bisection (pred monotone along the ray).
inline double bisect_reach(const std::function<bool(const Vector&)>& pred, const Vector& z, const Vector& dir, double hi,
                           int iters = 80) {
  double lo = 0.0;
  if (pred(z + hi * dir)) return hi;
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pred(z + mid * dir) ? lo : hi) = mid;
  }
  return lo;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// FNV-1a 64-bit hash of a byte string.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace oracle
