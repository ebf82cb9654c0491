#include <gtest/gtest.h>

#include "convint/config.hpp"
#include "convint/solver.hpp"

using namespace convint;
using constraint::ConstraintParams;

namespace {

solver::SolverConfig small_config(EnergyProfile p, int steps = 2) {
  solver::SolverConfig cfg(ConstraintParams(2, constraint::unit_box(2), std::move(p)));
  cfg.nt = 48;
  cfg.nx = 48;
  cfg.max_steps = steps;
  return cfg;
}

}  // namespace

TEST(Solver, AcceptedStepsDecreaseJAndVerify) {
  const auto cfg = small_config(EnergyProfile::constant(0.0, 1.0, 1.0));
  const auto res = solver::run(cfg);
  const auto& rows = res.diagnostics.rows;
  ASSERT_GE(rows.size(), 2u);
  EXPECT_NEAR(rows[0].J, 3.0, 1e-12);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i].J, rows[i - 1].J);
    EXPECT_GE(rows[i].gain, rows[i].delta);
    EXPECT_GT(rows[i].cover_size, 0u);
  }
  std::size_t waves = 0;
  for (const auto& r : rows) waves += r.cover_size;
  EXPECT_EQ(waves, res.field.size());
  const auto rep = solver::verify(res.field, cfg);
  EXPECT_TRUE(rep.all_pass()) << rep.first_failure();
  EXPECT_NEAR(rep.J.value, rows.back().J, 1e-12);
}

TEST(Solver, SameSeedIsByteIdentical) {
  auto cfg = small_config(EnergyProfile::bump(0.0, 1.0, 1.0), 1);
  cfg.seed = 9;
  const auto a = solver::run(cfg), b = solver::run(cfg);
  EXPECT_EQ(field::serialize(a.field), field::serialize(b.field));
  cfg.seed = 10;
  EXPECT_NE(field::serialize(solver::run(cfg).field), field::serialize(a.field));
}

TEST(Solver, StopsAtResolutionLimit) {
  // On a coarse grid only a few balls are resolvable; the run ends early and says why.
  auto cfg = small_config(EnergyProfile::constant(0.0, 1.0, 1.0), 20);
  cfg.nt = cfg.nx = 24;
  const auto res = solver::run(cfg);
  EXPECT_EQ(res.diagnostics.status, solver::Status::resolution_limited);
  EXPECT_FALSE(res.diagnostics.message.empty());
  EXPECT_TRUE(solver::verify(res.field, cfg).all_pass());
}

TEST(Solver, RejectsImpossibleSetups) {
  auto cfg = small_config(EnergyProfile::constant(0.0, 1.0, 1.0));
  cfg.eps_E = 2.0;
  EXPECT_THROW(solver::run(cfg), solver::EmptyActiveRegionError);
  cfg = small_config(EnergyProfile::constant(0.0, 1.0, 1.0));
  cfg.nt = cfg.nx = 4;
  EXPECT_THROW(solver::run(cfg), ResolutionError);
  cfg = small_config(EnergyProfile::constant(0.0, 1.0, 1.0));
  cfg.theta = 1.5;
  EXPECT_THROW(solver::run(cfg), Error);
}

TEST(Verify, DetectsViolations) {
  const auto cfg = small_config(EnergyProfile::constant(0.0, 1.0, 1.0));
  field::CompositeField f(cfg.params);
  SpaceTimePoint c(3);
  c << 0.5, 0.5, 0.5;
  StateVector big(5);
  big << 3.0, 0.0, 0.0, 0.0, 0.0;  // |u| > f: outside the hull
  f.append(waves::make_wave(big, c, 0.3, 1, 2));
  const auto rep = solver::verify(f, cfg);
  EXPECT_FALSE(rep.all_pass());
  EXPECT_NE(rep.first_failure().find("subsolution"), std::string::npos);

  field::CompositeField leaky(cfg.params);
  c << 0.5, 0.9, 0.5;  // ball crosses the spatial boundary
  StateVector small(5);
  small << 0.1, 0.0, 0.0, 0.0, 0.0;
  leaky.append(waves::make_wave(small, c, 0.3, 1, 2));
  const auto rep2 = solver::verify(leaky, cfg);
  EXPECT_FALSE(rep2.all_pass());
  EXPECT_NE(rep2.first_failure().find("support_in_active_region"), std::string::npos);
}

TEST(Verify, DimensionMismatch) {
  const auto cfg = small_config(EnergyProfile::constant(0.0, 1.0, 1.0));
  const field::CompositeField f3(ConstraintParams(3, constraint::unit_box(3), EnergyProfile::constant(0.0, 1.0, 1.0)));
  EXPECT_THROW(solver::verify(f3, cfg), DimensionError);
}

TEST(Config, ParsesAllKeys) {
  const auto c = config::parse_string(
      "# comment\n"
      "dimension = 2\n"
      "omega = 0 2 -1 1   # trailing comment\n"
      "interval = -1 1\n"
      "profile.kind = step\n"
      "profile.height = 2\n"
      "profile.step_at = 0\n"
      "grid.nt = 40\n"
      "grid.nx = 36\n"
      "solver.max_steps = 3\n"
      "solver.k0 = 2\n"
      "solver.tolJ = 1e-6\n"
      "solver.seed = 17\n"
      "solver.epsE = 0.01\n"
      "solver.theta = 0.2\n");
  const auto s = config::to_solver_config(c);
  EXPECT_EQ(s.params.d(), 2);
  EXPECT_EQ(s.params.omega().hi(0), 2.0);
  EXPECT_EQ(s.params.omega().lo(1), -1.0);
  EXPECT_EQ(s.params.profile()(0.5), 2.0);
  EXPECT_EQ(s.params.profile()(-0.5), 0.0);
  EXPECT_EQ(s.nt, 40);
  EXPECT_EQ(s.nx, 36);
  EXPECT_EQ(s.max_steps, 3);
  EXPECT_EQ(s.k0, 2);
  EXPECT_EQ(s.tol_J, 1e-6);
  EXPECT_EQ(s.seed, 17u);
  EXPECT_EQ(s.eps_E, 0.01);
  EXPECT_EQ(s.theta, 0.2);
}

TEST(Config, Errors) {
  EXPECT_THROW(config::parse_string("omega = 0 1 0 1\n"), config::ConfigError);
  EXPECT_THROW(config::parse_string("dimension = 2\nbogus = 1\n"), config::ConfigError);
  EXPECT_THROW(config::parse_string("dimension = 2\ndimension = 3\n"), config::ConfigError);
  EXPECT_THROW(config::parse_string("dimension = 2\ngrid.nt\n"), config::ConfigError);
  EXPECT_THROW(config::to_solver_config(config::parse_string("dimension = 4\n")), config::ConfigError);
  EXPECT_THROW(config::to_solver_config(config::parse_string("dimension = 2\ngrid.nt = 3x\n")), config::ConfigError);
  EXPECT_THROW(config::to_solver_config(config::parse_string("dimension = 2\nomega = 0 1\n")), config::ConfigError);
  EXPECT_THROW(config::to_solver_config(config::parse_string("dimension = 2\nprofile.kind = wobble\n")), config::ConfigError);
  EXPECT_THROW(config::to_solver_config(config::parse_string("dimension = 2\nsolver.seed = -1\n")), config::ConfigError);
  EXPECT_THROW(config::to_solver_config(config::parse_string("dimension = 2\nprofile.kind = table\n")), config::ConfigError);
}
