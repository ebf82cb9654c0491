#pragma once

// Localized plane waves for the system
//
//   d_t u + div_x m = 0,   div_x b = 0,
//
// built from potentials so that both equations hold identically. A wave is
// defined on the unit ball and then translated/scaled onto B_r(y0); scaling
// preserves the (first-order, homogeneous) linear system.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "convint/types.hpp"

namespace convint::waves {

class WaveConeError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Cutoff

struct CutoffValue {
  double value = 0.0;
  Vector gradient;
};

namespace detail {

inline double flat_exp(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
inline double flat_exp_prime(double s) { return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0; }

}  // namespace detail

/// Radial profile of the cutoff and its derivative in rho = |y|.
/// 1 on [0, 1/2], 0 on [1, inf), and the C-infinity smooth step
/// g(1 - x) / (g(1 - x) + g(x)), x = 2 rho - 1, g(s) = exp(-1/s), in between.
inline std::pair<double, double> cutoff_radial(double rho) {
  if (rho <= 0.5) return {1.0, 0.0};
  if (rho >= 1.0) return {0.0, 0.0};
  const double x = 2.0 * rho - 1.0;
  const double ga = detail::flat_exp(1.0 - x);
  const double gb = detail::flat_exp(x);
  const double den = ga + gb;
  const double value = ga / den;
  // d/dx [ga / (ga + gb)] = -(g'(1-x) gb + ga g'(x)) / den^2
  const double dx = -(detail::flat_exp_prime(1.0 - x) * gb + ga * detail::flat_exp_prime(x)) / (den * den);
  return {value, 2.0 * dx};
}

inline CutoffValue cutoff_eval(const Vector& y) {
  CutoffValue out;
  out.gradient = Vector::Zero(y.size());
  const double rho = y.norm();
  const auto [v, dv] = cutoff_radial(rho);
  out.value = v;
  if (dv != 0.0 && rho > 0.0) out.gradient = (dv / rho) * y;
  return out;
}

// ---------------------------------------------------------------------------
// Wave specification

enum class Branch { general_d, planar };

inline const char* to_string(Branch b) { return b == Branch::general_d ? "general_d" : "planar"; }

struct WaveSpec {
  int d = 2;
  Branch branch = Branch::planar;
  SpaceTimePoint center;
  double radius = 1.0;
  int k = 1;
  StateVector zbar;
  /// Oscillation normal in space-time coordinates (t, x). Unit (0, n) for
  /// general_d; (n_t, n_x), generally not unit, for planar.
  Vector normal;
  /// Planar only: vector potential A in R^3 with normal x A = (ubar, mbar).
  Vector potential;
  /// Planar only: false when bbar = 0 and the b-potential is dropped.
  bool b_active = true;

  int n() const { return 2 * d + 1; }
  double angular_frequency() const { return 2.0 * std::numbers::pi * k; }
};

namespace detail {

inline Vector cross3(const Vector& a, const Vector& b) {
  Vector c(3);
  c << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0);
  return c;
}

inline void validate_common(const StateVector& zbar, const SpaceTimePoint& y0, double r, int k, int d) {
  if (d < 2) throw DimensionError("make_wave: d must be >= 2");
  if (zbar.size() != 2 * d + 1) throw DimensionError("make_wave: amplitude has wrong dimension");
  if (y0.size() != d + 1) throw DimensionError("make_wave: center has wrong dimension");
  if (!(r > 0.0) || !std::isfinite(r)) throw Error("make_wave: radius must be positive");
  if (k < 1) throw Error("make_wave: frequency multiplier must be >= 1");
  if (!zbar.allFinite() || !y0.allFinite()) throw Error("make_wave: non-finite input");
}

}  // namespace detail

/// Builds the wave with amplitude zbar on B_r(y0) and frequency multiplier k.
inline WaveSpec make_wave(const StateVector& zbar, const SpaceTimePoint& y0, double r, int k, int d) {
  detail::validate_common(zbar, y0, r, k, d);
  WaveSpec w;
  w.d = d;
  w.center = y0;
  w.radius = r;
  w.k = k;
  w.zbar = zbar;
  const StateLayout L{d};
  const Vector mbar = L.m_of(zbar);
  const Vector bbar = L.b_of(zbar);

  if (d > 2) {
    w.branch = Branch::general_d;
    // Orthonormal basis of span{mbar, bbar}.
    std::vector<Vector> basis;
    for (const Vector* v : {&mbar, &bbar}) {
      Vector q = *v;
      for (const auto& e : basis) q -= q.dot(e) * e;
      if (q.norm() > 1e-12 * std::max(1.0, v->norm())) basis.push_back(q.normalized());
    }
    // First coordinate direction with a large component off the span; the
    // complement has dimension >= d - 2 >= 1, so some residual exceeds 1/sqrt(d).
    Vector n;
    for (int j = 0; j < d; ++j) {
      Vector e = Vector::Zero(d);
      e(j) = 1.0;
      Vector q = e;
      for (const auto& b : basis) q -= q.dot(b) * b;
      if (q.norm() >= 1.0 / std::sqrt(static_cast<double>(d)) - 1e-12) {
        for (const auto& b : basis) q -= q.dot(b) * b;  // second pass for orthogonality
        n = q.normalized();
        break;
      }
    }
    if (n.size() == 0) throw Error("make_wave: failed to find a normal orthogonal to mbar and bbar");
    w.normal = Vector::Zero(d + 1);
    w.normal.tail(d) = n;
    w.b_active = true;
    return w;
  }

  // d == 2
  w.branch = Branch::planar;
  const double ubar = zbar(0);
  Vector a(3);
  a << ubar, mbar(0), mbar(1);
  const double scale = std::max(1.0, a.norm());
  const bool u_zero = std::abs(ubar) <= 1e-12 * scale;
  if (u_zero && mbar.norm() > 0.0)
    throw WaveConeError("make_wave: planar waves need ubar != 0 when mbar != 0 (amplitude outside the wave cone)");

  Vector nx(2);
  if (bbar.norm() > 1e-14) {
    nx << bbar(1), -bbar(0);  // -bbar^perp with perp(a, b) = (-b, a)
    w.b_active = true;
  } else {
    nx << 1.0, 0.0;
    w.b_active = false;
  }
  const double nt = u_zero ? 0.0 : -nx.dot(mbar) / ubar;
  w.normal = Vector(3);
  w.normal << nt, nx(0), nx(1);
  w.potential = detail::cross3(a, w.normal) / w.normal.squaredNorm();
  return w;
}

/// Names of violated structural invariants (empty when consistent).
inline std::vector<std::string> invariant_violations(const WaveSpec& w, double tol = 1e-9) {
  std::vector<std::string> bad;
  const int d = w.d;
  if (w.zbar.size() != 2 * d + 1 || w.center.size() != d + 1 || w.normal.size() != d + 1) {
    bad.emplace_back("dimensions");
    return bad;
  }
  if (!(w.radius > 0.0)) bad.emplace_back("positive_radius");
  if (w.k < 1) bad.emplace_back("frequency");
  const StateLayout L{d};
  const Vector mbar = L.m_of(w.zbar);
  const Vector bbar = L.b_of(w.zbar);
  const double scale = std::max(1.0, w.zbar.norm());
  if (w.branch == Branch::general_d) {
    if (d <= 2) bad.emplace_back("branch_dimension");
    if (std::abs(w.normal.norm() - 1.0) > tol) bad.emplace_back("unit_normal");
    if (std::abs(w.normal(0)) > tol) bad.emplace_back("spatial_normal");
    const Vector n = w.normal.tail(d);
    if (std::abs(n.dot(mbar)) > tol * scale || std::abs(n.dot(bbar)) > tol * scale)
      bad.emplace_back("normal_orthogonality");
  } else {
    if (d != 2) bad.emplace_back("branch_dimension");
    if (w.potential.size() != 3) {
      bad.emplace_back("planar_potential");
      return bad;
    }
    Vector a(3);
    a << w.zbar(0), mbar(0), mbar(1);
    if (std::abs(w.normal.dot(a)) > tol * scale * std::max(1.0, w.normal.norm())) bad.emplace_back("normal_orthogonality");
    if (w.b_active) {
      Vector nx_expected(2);
      nx_expected << bbar(1), -bbar(0);
      if ((w.normal.tail(2) - nx_expected).norm() > tol * scale) bad.emplace_back("planar_b_normal");
    } else if (bbar.norm() > tol) {
      bad.emplace_back("planar_b_normal");
    }
    if ((detail::cross3(w.normal, w.potential) - a).norm() > tol * scale) bad.emplace_back("planar_potential");
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Evaluation

inline bool in_support(const WaveSpec& w, const SpaceTimePoint& y) {
  return (y - w.center).squaredNorm() < w.radius * w.radius;
}

/// w((y - y0) / r); identically zero outside the open ball B_r(y0).
inline StateVector wave_eval(const WaveSpec& w, const SpaceTimePoint& y) {
  const int d = w.d;
  StateVector z = StateVector::Zero(2 * d + 1);
  const Vector yh = (y - w.center) / w.radius;
  const double rho = yh.norm();
  if (rho >= 1.0) return z;
  if (rho == 0.0) return w.zbar;

  const auto [phi, dphi] = cutoff_radial(rho);
  const double kappa = w.angular_frequency();
  const StateLayout L{d};

  if (w.branch == Branch::general_d) {
    const Vector& nh = w.normal;  // unit, time component zero
    const double theta = kappa * nh.dot(yh);
    const double S = std::sin(theta) / kappa;
    const double C = std::cos(theta);
    // grad(phi * Pi_k)
    Vector g = (phi * C) * nh;
    if (dphi != 0.0) g += (S * dphi / rho) * yh;
    const double ng = nh.dot(g);
    Vector abar(d + 1);
    abar(0) = w.zbar(0);
    abar.tail(d) = L.m_of(w.zbar);
    const Vector a = abar * ng - nh * abar.dot(g);
    const Vector bbar = L.b_of(w.zbar);
    const Vector gx = g.tail(d);
    const Vector n = nh.tail(d);
    const Vector b = bbar * n.dot(gx) - n * bbar.dot(gx);
    z(0) = a(0);
    z.segment(1, d) = a.tail(d);
    z.segment(1 + d, d) = b;
    return z;
  }

  // planar: psi = phi |n| sin(kappa nu . y) / kappa with nu = n / |n|
  const double nn = w.normal.norm();
  const double theta = kappa * w.normal.dot(yh) / nn;
  const double S = std::sin(theta) / kappa;
  const double C = std::cos(theta);
  Vector g = (phi * C) * w.normal;
  if (dphi != 0.0) g += (nn * S * dphi / rho) * yh;
  const Vector a = detail::cross3(g, w.potential);
  z(0) = a(0);
  z(1) = a(1);
  z(2) = a(2);
  if (w.b_active) {
    z(3) = -g(2);
    z(4) = g(1);
  }
  return z;
}

/// Central-difference (d_t u + div_x m, div_x b) at y.
inline std::pair<double, double> divergence_residual(const WaveSpec& w, const SpaceTimePoint& y, double h) {
  if (!(h > 0.0)) throw Error("divergence_residual: h must be positive");
  const int d = w.d;
  double r1 = 0.0;
  double r2 = 0.0;
  SpaceTimePoint yp = y, ym = y;
  for (int i = 0; i <= d; ++i) {
    yp(i) = y(i) + h;
    ym(i) = y(i) - h;
    const StateVector zp = wave_eval(w, yp);
    const StateVector zm = wave_eval(w, ym);
    // component i of (u, m) is d/dy_i-paired; b pairs with x_i for i >= 1
    r1 += (zp(i) - zm(i)) / (2.0 * h);
    if (i >= 1) r2 += (zp(d + i) - zm(d + i)) / (2.0 * h);
    yp(i) = y(i);
    ym(i) = y(i);
  }
  return {r1, r2};
}

// ---------------------------------------------------------------------------
// Integrals over the wave's support

/// Cells per axis needed on the bounding box [y0 - r, y0 + r]^(d+1) for 8 cells per period.
inline int min_resolution(const WaveSpec& w) { return 16 * w.k; }

namespace detail {

template <class Fn>
double box_midpoint_sum(const WaveSpec& w, int cells, Fn&& integrand) {
  const int D = w.d + 1;
  const double h = 2.0 * w.radius / cells;
  const double cell_volume = std::pow(h, D);
  std::vector<int> idx(static_cast<std::size_t>(D), 0);
  SpaceTimePoint y(D);
  double total = 0.0;
  while (true) {
    for (int a = 0; a < D; ++a) y(a) = w.center(a) - w.radius + (idx[static_cast<std::size_t>(a)] + 0.5) * h;
    if (in_support(w, y)) total += integrand(y);
    int a = D - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == cells) idx[static_cast<std::size_t>(a--)] = 0;
    if (a < 0) break;
  }
  return total * cell_volume;
}

inline void require_resolution(const WaveSpec& w, int cells, const char* who) {
  if (cells < min_resolution(w))
    throw ResolutionError(std::string(who) + ": quadrature does not resolve k = " + std::to_string(w.k) + " (need " +
                          std::to_string(min_resolution(w)) + " cells per axis, got " + std::to_string(cells) + ")");
}

}  // namespace detail

/// Midpoint-rule integral of |w|^2 over B_r(y0) with `cells` cells per axis.
inline double l2_mass(const WaveSpec& w, int cells) {
  detail::require_resolution(w, cells, "l2_mass");
  return detail::box_midpoint_sum(w, cells, [&](const SpaceTimePoint& y) { return wave_eval(w, y).squaredNorm(); });
}

using TestFunction = std::function<StateVector(const SpaceTimePoint&)>;

/// Midpoint-rule pairing  integral of w . psi.
inline double weak_pairing(const WaveSpec& w, const TestFunction& psi, int cells) {
  detail::require_resolution(w, cells, "weak_pairing");
  return detail::box_midpoint_sum(w, cells, [&](const SpaceTimePoint& y) { return wave_eval(w, y).dot(psi(y)); });
}

/// Energy ratio  integral |w|^2 / (|zbar|^2 vol(B_r)).
inline double energy_ratio(const WaveSpec& w, int cells) {
  const double z2 = w.zbar.squaredNorm();
  if (z2 == 0.0) return 0.0;
  return l2_mass(w, cells) / (z2 * ball_volume(w.d + 1, w.radius));
}

/// Lower bound guaranteed by the plateau: (|zbar|^2 / 4) vol(B_{r/2}).
inline double plateau_energy_bound(const WaveSpec& w) {
  return 0.25 * w.zbar.squaredNorm() * ball_volume(w.d + 1, 0.5 * w.radius);
}

}  // namespace convint::waves
