#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "convint/types.hpp"

namespace convint {

enum class ProfileKind { step, bump, table };

inline const char* to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::step: return "step";
    case ProfileKind::bump: return "bump";
    case ProfileKind::table: return "table";
  }
  return "?";
}

/// Prescribed energy E(t): non-negative, bounded, zero outside the open interval (t0, t1).
class EnergyProfile {
 public:
  /// E = height for step_at < t < t1, zero elsewhere. step_at <= t0 gives a constant profile.
  static EnergyProfile step(double t0, double t1, double height, double step_at) {
    EnergyProfile p(ProfileKind::step, t0, t1);
    if (!(height >= 0.0) || !std::isfinite(height)) throw Error("step profile: height must be finite and >= 0");
    p.height_ = height;
    p.step_at_ = step_at;
    return p;
  }

  static EnergyProfile constant(double t0, double t1, double height) { return step(t0, t1, height, t0); }

  /// E(t) = amplitude * sin^2(pi (t - t0) / (t1 - t0)).
  static EnergyProfile bump(double t0, double t1, double amplitude) {
    EnergyProfile p(ProfileKind::bump, t0, t1);
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw Error("bump profile: amplitude must be finite and >= 0");
    p.height_ = amplitude;
    return p;
  }

  /// Piecewise-linear table; zero outside its t-range and outside (t0, t1).
  static EnergyProfile table(double t0, double t1, std::vector<double> ts, std::vector<double> es) {
    EnergyProfile p(ProfileKind::table, t0, t1);
    if (ts.size() != es.size() || ts.size() < 2) throw Error("table profile: need at least two (t, E) rows");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (!std::isfinite(ts[i]) || !std::isfinite(es[i])) throw Error("table profile: non-finite entry");
      if (es[i] < 0.0) throw Error("table profile: negative energy at row " + std::to_string(i));
      if (i > 0 && !(ts[i] > ts[i - 1])) throw Error("table profile: t must be strictly increasing (row " + std::to_string(i) + ")");
    }
    p.ts_ = std::move(ts);
    p.es_ = std::move(es);
    return p;
  }

  /// Two-column CSV (t, E); a non-numeric first line is treated as a header.
  static EnergyProfile table_from_csv(double t0, double t1, std::istream& in) {
    std::vector<double> ts, es;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double t = 0.0, e = 0.0;
      if (!(row >> t >> e)) {
        if (ts.empty() && lineno == 1) continue;
        throw Error("table profile: malformed CSV line " + std::to_string(lineno));
      }
      ts.push_back(t);
      es.push_back(e);
    }
    return table(t0, t1, std::move(ts), std::move(es));
  }

  static EnergyProfile table_from_csv_file(double t0, double t1, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("table profile: cannot open " + path);
    return table_from_csv(t0, t1, in);
  }

  double operator()(double t) const {
    if (!(t > t0_ && t < t1_)) return 0.0;
    switch (kind_) {
      case ProfileKind::step:
        return t > step_at_ ? height_ : 0.0;
      case ProfileKind::bump: {
        const double s = std::sin(std::numbers::pi * (t - t0_) / (t1_ - t0_));
        return height_ * s * s;
      }
      case ProfileKind::table: {
        if (t < ts_.front() || t > ts_.back()) return 0.0;
        const auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
        if (it == ts_.end()) return es_.back();
        const auto i = static_cast<std::size_t>(it - ts_.begin());
        const double w = (t - ts_[i - 1]) / (ts_[i] - ts_[i - 1]);
        return (1.0 - w) * es_[i - 1] + w * es_[i];
      }
    }
    return 0.0;
  }

  double max_value() const {
    if (kind_ == ProfileKind::table) return *std::max_element(es_.begin(), es_.end());
    if (kind_ == ProfileKind::step && step_at_ >= t1_) return 0.0;
    return height_;
  }

  ProfileKind kind() const { return kind_; }
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  double height() const { return height_; }
  double step_at() const { return step_at_; }
  const std::vector<double>& table_t() const { return ts_; }
  const std::vector<double>& table_e() const { return es_; }

  bool operator==(const EnergyProfile&) const = default;

 private:
  EnergyProfile(ProfileKind kind, double t0, double t1) : kind_(kind), t0_(t0), t1_(t1) {
    if (!std::isfinite(t0) || !std::isfinite(t1) || !(t1 > t0)) throw Error("energy profile: interval must satisfy t0 < t1");
  }

  ProfileKind kind_ = ProfileKind::step;
  double t0_ = 0.0;
  double t1_ = 1.0;
  double height_ = 0.0;
  double step_at_ = 0.0;
  std::vector<double> ts_;
  std::vector<double> es_;
};

}  // namespace convint
