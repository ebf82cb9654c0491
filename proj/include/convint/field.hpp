#pragma once

// Composite subsolution: the zero field plus a finite list of localized plane
// waves. Every such field solves the linear system exactly; only the pointwise
// constraint has to be measured.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "convint/constraint.hpp"
#include "convint/parallel.hpp"
#include "convint/quadrature.hpp"
#include "convint/types.hpp"
#include "convint/waves.hpp"

namespace convint::field {

using constraint::ConstraintParams;
using waves::WaveSpec;

class CompositeField {
 public:
  explicit CompositeField(ConstraintParams params) : params_(std::move(params)) {}

  const ConstraintParams& params() const { return params_; }
  int d() const { return params_.d(); }
  int n() const { return params_.n(); }
  const std::vector<WaveSpec>& waves() const { return waves_; }
  std::size_t size() const { return waves_.size(); }
  bool empty() const { return waves_.empty(); }

  void append(WaveSpec w) {
    if (w.d != d()) throw DimensionError("CompositeField: wave dimension does not match the field");
    waves_.push_back(std::move(w));
  }

  /// Sum of the waves whose ball contains y, in list order.
  StateVector eval(const SpaceTimePoint& y) const {
    StateVector z = StateVector::Zero(n());
    for (const auto& w : waves_)
      if (waves::in_support(w, y)) z += waves::wave_eval(w, y);
    return z;
  }

 private:
  ConstraintParams params_;
  std::vector<WaveSpec> waves_;
};

inline StateVector field_eval(const CompositeField& f, const SpaceTimePoint& y) { return f.eval(y); }

// ---------------------------------------------------------------------------
// Functionals

namespace detail {

template <class Integrand>
double grid_sum(const CompositeField& field, const Quadrature& q, Integrand&& integrand) {
  const auto& params = field.params();
  return q.cell_volume() * parallel::blocked_sum(q.size(), [&](std::size_t i) {
           const SpaceTimePoint y = q.node(i);
           return integrand(field.eval(y), y, params);
         });
}

template <class Integrand>
QuadratureValue richardson(const CompositeField& field, const Quadrature& q, Integrand&& integrand, const char* who) {
  q.require_resolves(field.waves(), who);
  QuadratureValue out;
  out.value = grid_sum(field, q, integrand);
  const Quadrature coarse = q.coarsened(field.params());
  out.error = std::abs(out.value - grid_sum(field, coarse, integrand)) / 3.0;
  return out;
}

}  // namespace detail

/// J(z) = integral over U of dist^2(z(y), K_y).
inline QuadratureValue J_functional(const CompositeField& field, const Quadrature& q) {
  return detail::richardson(
      field, q,
      [](const StateVector& z, const SpaceTimePoint& y, const ConstraintParams& p) {
        const double d = constraint::dist_to_K(z, y, p);
        return d * d;
      },
      "J_functional");
}

/// I(z) = integral over U of |z(y)|^2.
inline QuadratureValue I_functional(const CompositeField& field, const Quadrature& q) {
  return detail::richardson(
      field, q, [](const StateVector& z, const SpaceTimePoint&, const ConstraintParams&) { return z.squaredNorm(); },
      "I_functional");
}

struct EnergySample {
  double t = 0.0;
  double target = 0.0;  // E(t)
  double actual = 0.0;  // integral over Omega of u^2(t, x)
  double error = 0.0;
};

/// Energy integral over Omega of u^2(t, .) on an nx^d midpoint grid.
inline double energy_at(const CompositeField& field, double t, int nx) {
  const int d = field.d();
  const auto& omega = field.params().omega();
  Vector h(d);
  for (int i = 0; i < d; ++i) h(i) = (omega.hi(i) - omega.lo(i)) / nx;
  std::size_t cells = 1;
  for (int i = 0; i < d; ++i) cells *= static_cast<std::size_t>(nx);
  const double cell = h.prod();
  // Skip waves whose ball misses the time slice.
  std::vector<WaveSpec> active;
  for (const auto& w : field.waves())
    if (std::abs(w.center(0) - t) < w.radius) active.push_back(w);
  if (active.empty()) return 0.0;
  CompositeField slice(field.params());
  for (auto& w : active) slice.append(std::move(w));
  return cell * parallel::blocked_sum(cells, [&](std::size_t idx) {
           SpaceTimePoint y(d + 1);
           y(0) = t;
           std::size_t rest = idx;
           for (int i = d; i >= 1; --i) {
             y(i) = omega.lo(i - 1) + (static_cast<double>(rest % static_cast<std::size_t>(nx)) + 0.5) * h(i - 1);
             rest /= static_cast<std::size_t>(nx);
           }
           const double u = slice.eval(y)(0);
           return u * u;
         });
}

inline std::vector<EnergySample> energy_profile(const CompositeField& field, const std::vector<double>& t_samples,
                                                const Quadrature& q) {
  q.require_resolves(field.waves(), "energy_profile");
  std::vector<EnergySample> rows;
  rows.reserve(t_samples.size());
  for (double t : t_samples) {
    EnergySample s;
    s.t = t;
    s.target = field.params().profile()(t);
    s.actual = energy_at(field, t, q.nx());
    s.error = std::abs(s.actual - energy_at(field, t, std::max(1, q.nx() / 2))) / 3.0;
    rows.push_back(s);
  }
  return rows;
}

/// Time nodes of the quadrature grid.
inline std::vector<double> time_nodes(const Quadrature& q) {
  std::vector<double> ts;
  for (int it = 0; it < q.nt(); ++it) ts.push_back(q.time_node(it));
  return ts;
}

/// Integral over I of (E - energy), by the midpoint rule on the samples.
inline double energy_gap(const std::vector<EnergySample>& rows, double dt) {
  double gap = 0.0;
  for (const auto& r : rows) gap += (r.target - r.actual) * dt;
  return gap;
}

/// Central-difference residuals of both linear equations for the whole field.
inline std::pair<double, double> field_divergence_residual(const CompositeField& field, const SpaceTimePoint& y, double h) {
  const int d = field.d();
  double r1 = 0.0, r2 = 0.0;
  SpaceTimePoint yp = y, ym = y;
  for (int i = 0; i <= d; ++i) {
    yp(i) = y(i) + h;
    ym(i) = y(i) - h;
    const StateVector zp = field.eval(yp), zm = field.eval(ym);
    r1 += (zp(i) - zm(i)) / (2.0 * h);
    if (i >= 1) r2 += (zp(d + i) - zm(d + i)) / (2.0 * h);
    yp(i) = y(i);
    ym(i) = y(i);
  }
  return {r1, r2};
}

/// Max |residual| of each equation over `samples` seeded random points of U.
inline std::pair<double, double> pde_residual(const CompositeField& field, int samples, double h, std::uint64_t seed) {
  if (!(h > 0.0)) throw Error("pde_residual: h must be positive");
  const auto box = field.params().space_time_box();
  std::mt19937_64 rng(mix_seed(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double m1 = 0.0, m2 = 0.0;
  for (int s = 0; s < samples; ++s) {
    SpaceTimePoint y(field.d() + 1);
    for (int a = 0; a <= field.d(); ++a) y(a) = box.lo(a) + unif(rng) * (box.hi(a) - box.lo(a));
    const auto [r1, r2] = field_divergence_residual(field, y, h);
    m1 = std::max(m1, std::abs(r1));
    m2 = std::max(m2, std::abs(r2));
  }
  return {m1, m2};
}

// ---------------------------------------------------------------------------
// Serialization: versioned line-oriented text (".waves").
//
//   convint-waves 1
//   d <d>
//   omega <lo_1> <hi_1> ... <lo_d> <hi_d>
//   interval <t0> <t1>
//   profile step <height> <step_at> | bump <amplitude> | table <M> <t_1> <E_1> ... <t_M> <E_M>
//   waves <N>
//   wave <branch> <center[d+1]> <r> <k> <zbar[2d+1]> <normal[d+1]> [<A[3]> <b_active>]
//   end

inline constexpr int kFormatVersion = 1;

class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError(where + ": bad number '" + std::string(s) + "'");
  return v;
}

inline long parse_int(std::string_view s, const std::string& where) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError(where + ": bad integer '" + std::string(s) + "'");
  return v;
}

namespace detail {

inline void put_vec(std::ostream& os, const Vector& v) {
  for (int i = 0; i < v.size(); ++i) os << ' ' << format_double(v(i));
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t j = line.find(' ', i);
    const std::size_t end = j == std::string_view::npos ? line.size() : j;
    if (end > i) out.push_back(line.substr(i, end - i));
    i = end;
  }
  return out;
}

}  // namespace detail

inline void write_profile(std::ostream& os, const EnergyProfile& p) {
  os << "interval " << format_double(p.t0()) << ' ' << format_double(p.t1()) << '\n';
  os << "profile " << to_string(p.kind());
  switch (p.kind()) {
    case ProfileKind::step:
      os << ' ' << format_double(p.height()) << ' ' << format_double(p.step_at());
      break;
    case ProfileKind::bump:
      os << ' ' << format_double(p.height());
      break;
    case ProfileKind::table:
      os << ' ' << p.table_t().size();
      for (std::size_t i = 0; i < p.table_t().size(); ++i)
        os << ' ' << format_double(p.table_t()[i]) << ' ' << format_double(p.table_e()[i]);
      break;
  }
  os << '\n';
}

inline void serialize(const CompositeField& f, std::ostream& os) {
  const auto& p = f.params();
  os << "convint-waves " << kFormatVersion << '\n';
  os << "d " << p.d() << '\n';
  os << "omega";
  for (int i = 0; i < p.d(); ++i) os << ' ' << format_double(p.omega().lo(i)) << ' ' << format_double(p.omega().hi(i));
  os << '\n';
  write_profile(os, p.profile());
  os << "waves " << f.size() << '\n';
  for (const auto& w : f.waves()) {
    os << "wave " << waves::to_string(w.branch);
    detail::put_vec(os, w.center);
    os << ' ' << format_double(w.radius) << ' ' << w.k;
    detail::put_vec(os, w.zbar);
    detail::put_vec(os, w.normal);
    if (w.branch == waves::Branch::planar) {
      detail::put_vec(os, w.potential);
      os << ' ' << (w.b_active ? 1 : 0);
    }
    os << '\n';
  }
  os << "end\n";
}

inline std::string serialize(const CompositeField& f) {
  std::ostringstream os;
  serialize(f, os);
  return os.str();
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::vector<std::string> expect(std::string_view key, const std::string& what) {
    if (!std::getline(in_, line_)) throw FormatError(what + ": unexpected end of stream");
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    const auto views = detail::split(line_);
    if (views.empty() || views[0] != key) throw FormatError(what + ": expected '" + std::string(key) + "' record");
    return {views.begin(), views.end()};
  }

 private:
  std::istream& in_;
  std::string line_;
};

inline EnergyProfile read_profile(const std::vector<std::string>& interval, const std::vector<std::string>& prof) {
  if (interval.size() != 3) throw FormatError("interval record: expected 2 values");
  const double t0 = parse_double(interval[1], "interval record");
  const double t1 = parse_double(interval[2], "interval record");
  const std::string where = "profile record";
  if (prof.size() < 2) throw FormatError(where + ": missing kind");
  try {
    if (prof[1] == "step") {
      if (prof.size() != 4) throw FormatError(where + ": step expects height and step_at");
      return EnergyProfile::step(t0, t1, parse_double(prof[2], where), parse_double(prof[3], where));
    }
    if (prof[1] == "bump") {
      if (prof.size() != 3) throw FormatError(where + ": bump expects amplitude");
      return EnergyProfile::bump(t0, t1, parse_double(prof[2], where));
    }
    if (prof[1] == "table") {
      if (prof.size() < 3) throw FormatError(where + ": table expects a row count");
      const long m = parse_int(prof[2], where);
      if (m < 0 || prof.size() != static_cast<std::size_t>(3 + 2 * m)) throw FormatError(where + ": table row count mismatch");
      std::vector<double> ts, es;
      for (long i = 0; i < m; ++i) {
        ts.push_back(parse_double(prof[static_cast<std::size_t>(3 + 2 * i)], where));
        es.push_back(parse_double(prof[static_cast<std::size_t>(4 + 2 * i)], where));
      }
      return EnergyProfile::table(t0, t1, std::move(ts), std::move(es));
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(where + ": " + e.what());
  }
  throw FormatError(where + ": unknown kind '" + prof[1] + "'");
}

/// Parses a field; `expected_d` > 0 additionally enforces the spatial dimension.
inline CompositeField deserialize(std::istream& in, int expected_d = 0) {
  Reader r(in);
  const auto head = r.expect("convint-waves", "header");
  if (head.size() != 2) throw FormatError("header: malformed");
  const long version = parse_int(head[1], "header");
  if (version != kFormatVersion)
    throw VersionError("header: unsupported format version " + std::to_string(version) + " (expected " +
                       std::to_string(kFormatVersion) + ")");
  const auto drec = r.expect("d", "dimension record");
  if (drec.size() != 2) throw FormatError("dimension record: malformed");
  const int d = static_cast<int>(parse_int(drec[1], "dimension record"));
  if (d < 2 || d > 3) throw DimensionError("dimension record: unsupported d = " + std::to_string(d));
  if (expected_d > 0 && d != expected_d)
    throw DimensionError("dimension mismatch: field has d = " + std::to_string(d) + ", expected " + std::to_string(expected_d));
  const auto om = r.expect("omega", "omega record");
  if (om.size() != static_cast<std::size_t>(1 + 2 * d)) throw FormatError("omega record: expected " + std::to_string(2 * d) + " values");
  constraint::Box box{Vector(d), Vector(d)};
  for (int i = 0; i < d; ++i) {
    box.lo(i) = parse_double(om[static_cast<std::size_t>(1 + 2 * i)], "omega record");
    box.hi(i) = parse_double(om[static_cast<std::size_t>(2 + 2 * i)], "omega record");
  }
  const auto interval = r.expect("interval", "interval record");
  const auto prof = r.expect("profile", "profile record");
  CompositeField field(ConstraintParams(d, box, read_profile(interval, prof)));

  const auto wrec = r.expect("waves", "wave count record");
  if (wrec.size() != 2) throw FormatError("wave count record: malformed");
  const long count = parse_int(wrec[1], "wave count record");
  if (count < 0) throw FormatError("wave count record: negative count");
  const int D = d + 1, n = 2 * d + 1;
  for (long i = 0; i < count; ++i) {
    const std::string where = "wave record " + std::to_string(i);
    const auto t = r.expect("wave", where);
    if (t.size() < 2) throw FormatError(where + ": missing branch");
    WaveSpec w;
    w.d = d;
    if (t[1] == "general_d") {
      w.branch = waves::Branch::general_d;
    } else if (t[1] == "planar") {
      w.branch = waves::Branch::planar;
    } else {
      throw FormatError(where + ": unknown branch '" + t[1] + "'");
    }
    const std::size_t expected = 2 + D + 2 + n + D + (w.branch == waves::Branch::planar ? 4 : 0);
    if (t.size() != expected)
      throw FormatError(where + ": expected " + std::to_string(expected - 1) + " fields, got " + std::to_string(t.size() - 1));
    std::size_t pos = 2;
    auto vec = [&](int len) {
      Vector v(len);
      for (int j = 0; j < len; ++j) v(j) = parse_double(t[pos++], where);
      return v;
    };
    w.center = vec(D);
    w.radius = parse_double(t[pos++], where);
    const long k = parse_int(t[pos++], where);
    if (k < 1 || k > 1'000'000) throw FormatError(where + ": frequency out of range");
    w.k = static_cast<int>(k);
    w.zbar = vec(n);
    w.normal = vec(D);
    if (w.branch == waves::Branch::planar) {
      w.potential = vec(3);
      const long flag = parse_int(t[pos++], where);
      if (flag != 0 && flag != 1) throw FormatError(where + ": b_active must be 0 or 1");
      w.b_active = flag == 1;
    }
    if (!(w.radius > 0.0)) throw FormatError(where + ": radius must be positive");
    if (w.branch == waves::Branch::planar && d != 2) throw FormatError(where + ": planar branch requires d = 2");
    if (w.branch == waves::Branch::general_d && d < 3) throw FormatError(where + ": general_d branch requires d > 2");
    field.append(std::move(w));
  }
  r.expect("end", "trailer");
  return field;
}

inline CompositeField deserialize(const std::string& text, int expected_d = 0) {
  std::istringstream in(text);
  return deserialize(in, expected_d);
}

}  // namespace convint::field
