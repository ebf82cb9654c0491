// Two solver steps on the constant-energy fixture, printing the diagnostics.

#include <iostream>

#include "convint/convint.hpp"

using namespace convint;

int main() {
  const int d = 2;
  solver::SolverConfig cfg(constraint::ConstraintParams(d, constraint::unit_box(d), EnergyProfile::constant(0.0, 1.0, 1.0)));
  cfg.nt = 32;
  cfg.nx = 32;
  cfg.max_steps = 2;

  const auto res = solver::run(cfg, [](const solver::DiagnosticsRow& r) {
    std::cout << "step " << r.step << "  J = " << r.J << "  I = " << r.I << "  gap = " << r.energy_gap
              << "  waves so far: " << r.cover_size << '\n';
  });
  std::cout << "status: " << solver::to_string(res.diagnostics.status) << ", " << res.field.size() << " waves\n";

  const Quadrature q(cfg.params, cfg.nt, cfg.nx);
  for (const auto& s : field::energy_profile(res.field, {0.25, 0.5, 0.75}, q))
    std::cout << "t = " << s.t << "  E = " << s.target << "  energy = " << s.actual << '\n';
}
