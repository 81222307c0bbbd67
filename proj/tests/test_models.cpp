// Environment, aero tables, dynamics and transcription.

#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace rlv {
namespace {

using testing::synthetic_db;

// ---------------------------------------------------------------------------
// Atmosphere and gravity

TEST(Isa, SeaLevelAndTropopause) {
  const auto s0 = isa::at_geopotential(0.0);
  EXPECT_NEAR(s0.density, 1.225, 1e-3);
  EXPECT_NEAR(s0.pressure, 101325.0, 1e-9);
  EXPECT_NEAR(s0.speed_of_sound, 340.294, 1e-3);
  const auto s11 = isa::at_geopotential(11000.0);
  EXPECT_NEAR(s11.density, 0.3639, 1e-3);
  EXPECT_NEAR(s11.temperature, 216.65, 1e-9);
}

TEST(Isa, ContinuousAcrossLayerBases) {
  for (const auto& L : isa::layers()) {
    if (L.base_height == 0.0) continue;
    const auto a = isa::at_geopotential(L.base_height - 1e-6);
    const auto b = isa::at_geopotential(L.base_height + 1e-6);
    EXPECT_NEAR(a.pressure / b.pressure, 1.0, 1e-9) << L.base_height;
    EXPECT_NEAR(a.temperature, b.temperature, 1e-6) << L.base_height;
  }
}

TEST(Isa, ZeroDensityAboveCeiling) {
  EXPECT_EQ(isa::at_geopotential(isa::kCeiling + 1.0).density, 0.0);
  EXPECT_GT(isa::at_geopotential(isa::kCeiling - 1.0).density, 0.0);
}

TEST(Atmosphere, AltitudeScaleCompressesLayers) {
  EnvParams env;
  const Vec3d r(0.0, 0.0, 11000.0 / env.altitude_scale);
  EXPECT_NEAR(atmosphere(r, env).density, isa::at_geopotential(11000.0).density, 1e-12);
  EXPECT_THROW(atmosphere(Vec3d(0, 0, std::nan("")), env), InvalidInput);
}

TEST(Gravity, PointsToCentreWithInverseSquareMagnitude) {
  EnvParams env;
  const Vec3d r(300.0, -200.0, 5000.0);
  const Vec3d g = gravity_accel<double>(r, env);
  const Vec3d d = env.r_center - r;
  EXPECT_NEAR(g.norm(), env.mu / d.squaredNorm(), 1e-12);
  EXPECT_NEAR(g.normalized().dot(d.normalized()), 1.0, 1e-15);
  EXPECT_THROW(gravity_accel<double>(env.r_center, env), SingularityError);
}

TEST(FrameAccels, RotatingFrameSigns) {
  EnvParams env;
  env.omega_planet = Vec3d(0.0, 0.0, 1e-3);
  const Vec3d v(10.0, 0.0, 0.0);
  const Vec3d r = env.r_center + Vec3d(100.0, 0.0, 0.0);
  const auto fa = frame_accels<double>(r, v, env);
  EXPECT_TRUE(fa.coriolis.isApprox(Vec3d(0.0, -2e-2, 0.0), 1e-14));
  // Centrifugal points away from the spin axis.
  EXPECT_TRUE(fa.centrifugal.isApprox(Vec3d(1e-4, 0.0, 0.0), 1e-14));
}

// ---------------------------------------------------------------------------
// Aero tables

TEST(AeroTables, InterpolationHitsNodesAndClamps) {
  Grid2 g;
  g.alpha = {0.0, 10.0, 20.0};
  g.mach = {0.5, 1.0};
  g.values.resize(3, 2);
  g.values << 0, 1, 2, 3, 4, 5;
  EXPECT_EQ(interp2(g, 10.0, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(interp2(g, 15.0, 0.75), 0.5 * (2 + 3 + 4 + 5) / 2.0);
  EXPECT_EQ(interp2(g, 50.0, 9.0), 5.0);
  EXPECT_EQ(interp2(g, -1.0, 0.1), 0.0);
  EXPECT_THROW(interp2(g, std::nan(""), 0.5), InvalidInput);
}

TEST(AeroTables, ModifiedTableExactZeroRow) {
  Grid2 raw;
  raw.alpha = {2.0, 10.0};
  raw.mach = {0.5, 1.0};
  raw.values.resize(2, 2);
  raw.values << 0.1, 0.2, 0.5, 0.6;
  const Grid2 mod = build_modified_table(raw);
  ASSERT_EQ(mod.alpha.front(), 0.0);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_EQ(mod.values(0, j), 0.0);
  EXPECT_NEAR(mod.values(2, 1) * std::sin(10.0 * kDegToRad), 0.6, 1e-15);
  raw.alpha = {0.0, 10.0};
  EXPECT_THROW(build_modified_table(raw), DataError);
}

TEST(AeroTables, BreakpointValidation) {
  Grid1 g{{0.5, 0.5}, {1.0, 2.0}};
  EXPECT_THROW(g.validate(), DataError);
}

TEST(AeroDatabase, BodyTablesReproduceGenerator) {
  const SyntheticAero gen;
  const auto& db = *synthetic_db();
  const SyntheticGrid grid;
  for (double m : grid.body_mach)
    for (double a : grid.body_alpha) {
      EXPECT_NEAR(interp2(db.cd_body, a, m), gen.drag(a, m), 1e-12 * std::abs(gen.drag(a, m)) + 1e-13);
      EXPECT_NEAR(interp2(db.cl_mod, a, m) * std::sin(a * kDegToRad), gen.lift(a, m), 1e-12);
    }
}

TEST(AeroDatabase, FinBoundsBracketZero) {
  const auto& db = *synthetic_db();
  for (double m : {0.3, 0.9, 1.3})
    for (double a1 : {-30.0, 0.0, 17.0})
      for (double a2 : {-8.0, 0.0, 33.0}) {
        const auto b = fin_bounds(db, m, a1, a2);
        for (int i = 0; i < 2; ++i) {
          EXPECT_LE(b.lo[i], 0.0);
          EXPECT_GE(b.hi[i], 0.0);
        }
      }
}

TEST(AeroDatabase, FinScaleMatchesGenerator) {
  const SyntheticAero gen;
  const auto& db = *synthetic_db();
  // Increments are symmetric in the command at the zero own-plane angle.
  for (double m : {0.5, 1.1, 2.0})
    for (double a2 : {-25.0, 4.0}) {
      const double s = interp3(db.fin_lift_scale[0], m, 0.0, a2);
      EXPECT_NEAR(s, gen.fin_scale(m, a2), 1e-9 * gen.fin_scale(m, a2));
    }
}

TEST(DragPolar, RecoversGeneratorCoefficients) {
  const SyntheticAero gen;
  const auto& db = *synthetic_db();
  ASSERT_FALSE(db.polar_lin.mach.empty());
  for (std::size_t i = 0; i < db.polar_lin.mach.size(); ++i) {
    const double m = db.polar_lin.mach[i];
    EXPECT_NEAR(db.polar_lin.values[i], gen.polar_lin(m), 1e-9 * gen.polar_lin(m));
    EXPECT_NEAR(db.polar_cst.values[i], gen.polar_cst(m), 1e-9 * gen.polar_cst(m));
  }
}

TEST(DragPolar, RejectsDegenerateBins) {
  std::vector<PolarSample> s{{0.9, 0, 0, 1, 0, 1}, {0.9, 0, 0, 2, 0, 4}};
  EXPECT_THROW(fit_drag_polar(s), DataError);
  // Lift in one plane at zero angles only: the two regressors coincide.
  s.push_back({0.9, 0, 0, 3, 0, 9});
  EXPECT_THROW(fit_drag_polar(s), DataError);
  std::vector<PolarSample> zero{{0.9, 0, 0, 0, 0, 1}, {0.9, 5, 0, 0, 0, 1}, {0.9, 0, 5, 0, 0, 1}};
  EXPECT_THROW(fit_drag_polar(zero), DataError);
}

TEST(SweepCsv, RoundTripAndRejections) {
  const auto rows = generate_sweep_rows(SyntheticAero{});
  std::stringstream ss;
  write_sweep_csv(ss, rows);
  std::string text = ss.str();
  text += "0.5,1,0,0,0,nan,0,0,0,0,0\n";
  text += "0.5,1,0,2.0,0,1,0,0,0,0,0\n";
  std::istringstream in(text);
  IngestReport rep;
  const auto back = parse_sweep_csv(in, rep);
  ASSERT_EQ(back.size(), rows.size());
  EXPECT_EQ(rep.rejected.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); i += 97) {
    EXPECT_EQ(back[i].fx, rows[i].fx);
    EXPECT_EQ(back[i].my, rows[i].my);
  }
  std::istringstream bad("mach,alpha\n1,2\n");
  EXPECT_THROW(parse_sweep_csv(bad, rep), DataError);
}

TEST(SweepCsv, DuplicateGridPointIsAnError) {
  std::stringstream ss;
  ss << kSweepHeader << "\n0.5,1,0,0,0,1,0,0,0,0,0\n0.5,1,0,0,0,2,0,0,0,0,0\n";
  IngestReport rep;
  EXPECT_THROW(parse_sweep_csv(ss, rep), DataError);
}

TEST(AeroDatabase, JsonRoundTripIsExact) {
  const auto dir = testing::scratch_dir("aerodb");
  const auto path = (dir / "db.json").string();
  save_aero_database(*synthetic_db(), path);
  const AeroDatabase back = load_aero_database(path);
  EXPECT_EQ(back.cl_mod.values, synthetic_db()->cl_mod.values);
  EXPECT_EQ(back.fin_bound_hi[1].values, synthetic_db()->fin_bound_hi[1].values);
  EXPECT_EQ(back.polar_lin.values, synthetic_db()->polar_lin.values);
}

// ---------------------------------------------------------------------------
// Geometry

TEST(Geometry, AngleOfAttackConstructedCase) {
  const double a = 5.0 * kDegToRad;
  const Vec3d v = Vec3d(0.0, -std::sin(a), -std::cos(a)) * 100.0;
  const auto aoa = angle_of_attack<double>(v, Vec2d(0.0, 0.0));
  EXPECT_NEAR(aoa.alpha, a, 1e-9);
  // The tilt lies in the B_y-B_z plane under this labeling.
  EXPECT_NEAR(aoa.alpha2, a, 1e-9);
  EXPECT_NEAR(aoa.alpha1, 0.0, 1e-12);
  EXPECT_THROW(angle_of_attack<double>(Vec3d::Zero(), Vec2d(0.0, 0.0)), SingularityError);
}

TEST(Geometry, SmallAngleComponentsAddInQuadrature) {
  const Vec3d v(-0.02, 0.015, -1.0);
  const auto aoa = angle_of_attack<double>(v, Vec2d(0.0, 0.0));
  EXPECT_NEAR(aoa.alpha * aoa.alpha, aoa.alpha1 * aoa.alpha1 + aoa.alpha2 * aoa.alpha2, 1e-6);
}

TEST(Geometry, WindRotationIsProperAndMapsAxis) {
  for (const Vec3d v : {Vec3d(1, 2, -3), Vec3d(0.3, -0.1, -0.2), Vec3d(5, 0, 1)}) {
    const Mat3d R = wind_rotation<double>(v);
    EXPECT_TRUE((R * R.transpose()).isApprox(Mat3d::Identity(), 1e-14));
    EXPECT_NEAR(R.determinant(), 1.0, 1e-14);
    EXPECT_TRUE((R * Vec3d(0, 0, -1)).isApprox(v.normalized(), 1e-14));
  }
  EXPECT_THROW(wind_rotation<double>(Vec3d(0, 0, 1)), SingularityError);
}

TEST(Geometry, AttitudeDomain) {
  EXPECT_THROW(attitude_matrix<double>(Vec2d(kPi / 2, 0.0)), DomainError);
  const Mat3d T = attitude_matrix<double>(Vec2d(0.3, -0.2));
  EXPECT_TRUE((T.transpose() * T).isApprox(Mat3d::Identity(), 1e-15));
}

// ---------------------------------------------------------------------------
// Dynamics

TEST(Dynamics, MassFlowFollowsRocketEquation) {
  VehicleModel m = testing::reference_model();
  VehicleState s{15000.0, Vec3d(0, 0, 3000), Vec3d(0, -10, -100), Vec2d(0.1, 0.0), Vec2d::Zero()};
  ControlInput c{Vec3d(1e4, 0.0, 5e5), Vec2d::Zero()};
  const StateVecd xd = state_derivative(s, c, Phase::Propulsive, m);
  EXPECT_NEAR(xd[kIdxM], -c.u_thrust_B.norm() / (m.vehicle.g0 * m.vehicle.isp), 1e-12);
  // Thrust is ignored in the aerodynamic phase.
  EXPECT_EQ(state_derivative(s, c, Phase::Aerodynamic, m)[kIdxM], 0.0);
}

TEST(Dynamics, VacuumBallisticMatchesGravityAndFrameTerms) {
  VehicleModel m = testing::reference_model();
  m.aero_enabled = false;
  VehicleState s{15000.0, Vec3d(100, 50, 4000), Vec3d(20, -5, -200), Vec2d(0.2, -0.1), Vec2d(0.01, -0.02)};
  const StateVecd xd = state_derivative(s, ControlInput{}, Phase::Aerodynamic, m);
  const auto fa = frame_accels<double>(s.r, s.v, m.env);
  const Vec3d g = gravity_accel<double>(s.r, m.env) + fa.coriolis + fa.centrifugal;
  EXPECT_TRUE(xd.segment<3>(kIdxV).isApprox(g, 1e-14));
  EXPECT_TRUE(xd.segment<3>(kIdxR).isApprox(s.v, 0.0));
  EXPECT_TRUE(xd.segment<2>(kIdxAtt).isApprox(s.omega, 0.0));
  // No torque: rates decay at the damping constant.
  EXPECT_TRUE(xd.segment<2>(kIdxW).isApprox(-m.vehicle.c_damp * s.omega, 1e-14));
}

TEST(Dynamics, InertiaInterpolatesWetToDry) {
  const VehicleParams p;
  EXPECT_TRUE(interpolated_inertia<double>(p.m_dry, p).isApprox(p.J_dry, 1e-15));
  EXPECT_TRUE(interpolated_inertia<double>(p.m_wet, p).isApprox(p.J_wet, 1e-15));
  const Vec3d mid = interpolated_inertia<double>(0.5 * (p.m_dry + p.m_wet), p);
  EXPECT_TRUE(mid.isApprox(0.5 * (p.J_dry + p.J_wet), 1e-15));
}

TEST(Dynamics, GimballedThrustTorqueSign) {
  VehicleModel m = testing::reference_model();
  m.aero_enabled = false;
  m.gravity_enabled = false;
  VehicleState s{15000.0, Vec3d(0, 0, 3000), Vec3d(0, 0, -50), Vec2d::Zero(), Vec2d::Zero()};
  ControlInput c{Vec3d(0.0, 1e4, 4e5), Vec2d::Zero()};
  const StateVecd xd = state_derivative(s, c, Phase::Propulsive, m);
  // Engine below the centre of mass: lateral thrust along +y gives r x T along +x.
  const Vec3d M = m.vehicle.r_engine_B.cross(c.u_thrust_B);
  const Vec3d J = interpolated_inertia<double>(s.m, m.vehicle);
  EXPECT_NEAR(xd[kIdxW], M[0] / J[0], 1e-12);
  EXPECT_NEAR(xd[kIdxW + 1], M[1] / J[1], 1e-12);
}

TEST(Dynamics, RejectsNonPositiveMass) {
  const VehicleModel m = testing::reference_model();
  VehicleState s{0.0, Vec3d(0, 0, 3000), Vec3d(0, 0, -50), Vec2d::Zero(), Vec2d::Zero()};
  EXPECT_THROW(state_derivative(s, ControlInput{}, Phase::Aerodynamic, m), InvalidInput);
}

// ---------------------------------------------------------------------------
// Integration and transcription

TEST(Ode, Dopri5MatchesExponential) {
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  OdeOptions o;
  o.rtol = 1e-12;
  o.atol = 1e-14;
  dopri5([](double, const Eigen::VectorXd& x, Eigen::VectorXd& d) { d = -0.7 * x; }, 0.0, 3.0, y, o);
  EXPECT_NEAR(y[0], std::exp(-2.1), 1e-11);
  EXPECT_NEAR(y[1], 2.0 * std::exp(-2.1), 1e-11);
}

TEST(Ode, NonFiniteStateThrows) {
  Eigen::VectorXd y(1);
  y << 1.0;
  OdeOptions o;
  EXPECT_THROW(dopri5([](double, const Eigen::VectorXd& x, Eigen::VectorXd& d) { d = x.array().square() * 1e3; },
                      0.0, 10.0, y, o, 3),
               PropagationError);
}

TEST(TimeMap, NodesAndPhaseBoundary) {
  const DilatedTime d{40.0, 60.0};
  const int N = 41;
  for (int k = 0; k < N; ++k) {
    const double tau = static_cast<double>(k) / (N - 1);
    const double expect = tau < 0.5 ? 40.0 * tau : 20.0 + 60.0 * (tau - 0.5);
    EXPECT_NEAR(time_map(tau, d), expect, 1e-14);
  }
  EXPECT_EQ(time_map(0.5, d), 20.0);
  EXPECT_EQ(time_map(1.0, d), 50.0);
  EXPECT_THROW(time_map(1.5, d), DomainError);
}

TEST(FohControl, NodesMidpointsAndCoastPhase) {
  std::vector<ControlVecd> nodes;
  for (int k = 0; k < 5; ++k) nodes.push_back(ControlVecd::Constant(k + 1.0));
  for (int k = 0; k < 5; ++k) {
    const ControlVecd u = foh_control(k / 4.0, nodes);
    EXPECT_NEAR(u[kIdxFin], k + 1.0, 1e-14);
    if (k < 2) EXPECT_TRUE(u.segment<3>(kIdxThrust).isZero(0.0));
    else EXPECT_NEAR(u[kIdxThrust], k + 1.0, 1e-14);
  }
  EXPECT_NEAR(foh_control(0.625, nodes)[kIdxThrust], 3.5, 1e-14);
  EXPECT_TRUE(foh_control(0.49, nodes).segment<3>(kIdxThrust).isZero(0.0));
  EXPECT_THROW(foh_control(-0.1, nodes), DomainError);
}

TEST(Transcription, NondimensionalRoundTrip) {
  const Scales s;
  StateVecd x;
  x << 19516.0, 500.0, 2500.0, 15000.0, 0.0, -150.0, -350.0, -0.98, 0.0, 0.01, -0.02;
  EXPECT_TRUE(dimensionalize(nondimensionalize(x, s), s).isApprox(x, 1e-15));
}

TEST(Transcription, SensitivitiesMatchCentralDifferences) {
  const auto tr = testing::reference_transcription();
  const Scales& sc = tr->config().scales;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    const int k = trial == 0 ? 5 : 25 + trial;
    StateVecd x;
    x << 17000.0 + 1000 * U(rng), 300 * U(rng), 1500 + 300 * U(rng), 6000 + 1000 * U(rng), 10 * U(rng),
        -100 + 10 * U(rng), -250 + 20 * U(rng), -0.6 + 0.1 * U(rng), 0.05 * U(rng), 0.02 * U(rng), 0.02 * U(rng);
    ControlVecd u0, u1;
    u0 << 2e4 * U(rng), 2e4 * U(rng), 5e5, 0.2 * U(rng), 0.2 * U(rng);
    u1 << 2e4 * U(rng), 2e4 * U(rng), 5.5e5, 0.2 * U(rng), 0.2 * U(rng);
    const StateVecd xn = nondimensionalize(x, sc);
    const ControlVecd u0n = nondimensionalize(u0, sc), u1n = nondimensionalize(u1, sc);
    const double sig = 1.2;
    const auto r = tr->propagate_segment(k, xn, u0n, u1n, sig, true);

    Eigen::Matrix<double, kNy, kNz> J, Jfd;
    J << r.d_x0, r.d_u0, r.d_u1, r.d_sigma;
    Eigen::Matrix<double, kNz, 1> z;
    z << xn, u0n, u1n, sig;
    for (int i = 0; i < kNz; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[i]));
      auto eval = [&](double dz) {
        Eigen::Matrix<double, kNz, 1> zz = z;
        zz[i] += dz;
        return tr->propagate_segment(k, zz.head<kNx>(), zz.segment<kNu>(kNx), zz.segment<kNu>(kNx + kNu),
                                     zz[kNz - 1], false).y_end;
      };
      Jfd.col(i) = (eval(h) - eval(-h)) / (2 * h);
    }
    const double rel = (J - Jfd).norm() / J.norm();
    EXPECT_LE(rel, 1e-5) << "segment " << k;
  }
}

TEST(Transcription, CoastSegmentsIgnoreThrustNodes) {
  const auto tr = testing::reference_transcription();
  const Scales& sc = tr->config().scales;
  StateVecd x;
  x << 19000.0, 400.0, 2000.0, 12000.0, 0.0, -140.0, -330.0, -0.9, 0.0, 0.0, 0.0;
  ControlVecd u = ControlVecd::Zero();
  const auto a = tr->propagate_segment(2, nondimensionalize(x, sc), u, u, 1.0, false);
  u.segment<3>(kIdxThrust) << 1.0, 2.0, 3.0;
  const auto b = tr->propagate_segment(2, nondimensionalize(x, sc), u, u, 1.0, false);
  EXPECT_EQ(a.y_end, b.y_end);
  const auto s = tr->propagate_segment(2, nondimensionalize(x, sc), u, u, 1.0, true);
  EXPECT_TRUE(s.d_u0.leftCols<3>().isZero(0.0));
  EXPECT_TRUE(s.d_u1.leftCols<3>().isZero(0.0));
}

}  // namespace
}  // namespace rlv
