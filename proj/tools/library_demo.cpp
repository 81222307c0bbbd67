// Using the headers directly: synthetic tables, one min-fuel solve and a few
// reach attempts, without any files.
//
//   library_demo [attempts]

#include <rlv/reach.hpp>
#include <rlv/synthetic_aero.hpp>

#include <cstdio>
#include <cstdlib>
#include <memory>

int main(int argc, char** argv) {
  using namespace rlv;
  const int attempts = argc > 1 ? std::atoi(argv[1]) : 5;

  VehicleModel model;
  model.aero = std::make_shared<AeroDatabase>(build_database(generate_sweep_rows(SyntheticAero{})));
  auto tr = std::make_shared<Transcription>(model, DiscretizationConfig{});

  ProblemSpec spec;
  spec.bc.x_init << 19516.0, 500.0, 2500.0, 15000.0, 0.0, -150.0, -350.0, -0.98, 0.0, 0.0, 0.0;

  ScpSolver solver(tr, spec, ScpParams{});
  const ScpResult fuel = solver.solve(solver.zero_control_guess(45.0, 45.0), Objective::min_fuel(),
                                      [](const ReportRow& r) {
                                        std::printf("  iter %3d  cost %12.6f  rho %8.3f  w %9.3g %s\n", r.iter, r.cost,
                                                    r.rho, r.prox_weight, r.accepted ? "" : "rejected");
                                      });
  const DilatedTime d = tr->dilation_seconds(fuel.best.traj);
  std::printf("min-fuel: %s, %d iterations, flight %.2f s, final mass %.1f kg\n", to_string(fuel.report.status),
              fuel.report.iterations, d.tau_a + d.tau_p, fuel.best.traj.X.back()[kIdxM] * tr->config().scales.mass);
  if (fuel.report.status != SolveStatus::Converged) return 3;

  ReachParams rp;
  rp.iters = attempts;
  ReachRunner runner(tr, spec, rp);
  ReachState st = runner.init_polytope(fuel);
  runner.run(st, rp.iters, {}, [](const ReachState& s, const ExpansionAttempt& a) {
    std::printf("attempt %lld: %s, mu %.1f m, volume %.4g m^3\n", static_cast<long long>(a.index),
                to_string(a.status), a.mu_m, s.hull.volume());
  });
  for (const auto& v : st.hull.vertices())
    std::printf("vertex %lld: (%.1f, %.1f, %.1f) m\n", static_cast<long long>(v.key), v.p[0], v.p[1], v.p[2]);
  return 0;
}
