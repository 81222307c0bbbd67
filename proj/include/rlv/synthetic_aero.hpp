#pragma once

// Analytic aerodynamic model used to produce the bundled sweep fixture.
// It stands in for wind-tunnel or CFD sweeps: a slender cylinder with a
// transonic axial-force bump, a crossflow normal-force term, four grid fins
// whose authority sags transonically and saturates asymmetrically with the
// local angle of attack, and a quadratic induced-drag polar.

#include <rlv/aero_io.hpp>
#include <rlv/geometry.hpp>

namespace rlv {

struct SyntheticAero {
  double rho0 = 1.225;
  double area = 4.9087;    // body reference area, m^2
  double length = 2.5;     // moment reference length, m
  double fin_area = 1.2;   // fin reference area, m^2
  Vec3d r_fins{0.0, 0.0, 9.2};

  double axial(double mach) const {
    const double d = (mach - 1.05) / 0.25;
    return 0.75 + 0.35 * std::exp(-d * d);
  }
  double normal(double alpha_rad, double mach) const {
    const double d = (mach - 1.1) / 0.4;
    const double k = 1.0 + 0.15 * std::exp(-d * d);
    const double s = std::sin(alpha_rad);
    return k * (std::sin(2.0 * alpha_rad) + 1.2 * s * s);
  }

  // Dimensional table values (see aerotables.hpp header note).
  double lift(double alpha_deg, double mach) const {
    const double a = alpha_deg * kDegToRad;
    return rho0 * area * (normal(a, mach) * std::cos(a) - axial(mach) * std::sin(a));
  }
  double drag(double alpha_deg, double mach) const {
    const double a = alpha_deg * kDegToRad;
    return rho0 * area * (normal(a, mach) * std::sin(a) + axial(mach) * std::cos(a));
  }
  double moment(double alpha_deg, double mach) const {
    return -0.6 * rho0 * area * length * normal(alpha_deg * kDegToRad, mach);
  }

  double fin_coefficient(double mach) const {
    const double d = (mach - 1.05) / 0.2;
    return 1.5 - 0.5 * std::exp(-d * d) - 0.15 * std::max(0.0, mach - 1.2);
  }
  double fin_scale(double mach, double alpha_other_deg) const {
    const double r = alpha_other_deg / 40.0;
    return rho0 * fin_area * fin_coefficient(mach) * (1.0 - 0.1 * r * r);
  }
  // Lift increment per unit scale for a command at the fin's own-plane angle.
  static double fin_shape(double cmd, double alpha_own_deg) {
    if (cmd == 0.0) return 0.0;
    const double sg = cmd > 0.0 ? 1.0 : -1.0;
    return cmd * (1.0 - 0.3 * (alpha_own_deg / 40.0) * sg);
  }
  double polar_lin(double mach) const { return 0.04 * (1.0 + 0.2 * mach) / (rho0 * fin_area); }
  double polar_cst(double /*mach*/) const { return 0.02 / (rho0 * fin_area); }

  // Body force and moment over q at a (alpha1, alpha2) flow direction, wind axes.
  void body_wind(double a1_deg, double a2_deg, double mach, Vec3d& f, Vec3d& m) const {
    Vec3d w(std::tan(a1_deg * kDegToRad), std::tan(a2_deg * kDegToRad), 1.0);
    w.normalize();
    const Vec3d vhat = -w;
    const Vec3d b(0, 0, 1);
    const double alpha = std::acos(std::clamp(w[2], -1.0, 1.0));
    const Mat3d rw = wind_rotation<double>(vhat);
    Vec3d force = -drag(alpha * kRadToDeg, mach) * vhat;
    Vec3d mom = Vec3d::Zero();
    const Vec3d bxv = b.cross(vhat);
    if (bxv.norm() > 0.0) {
      const Vec3d dl = vhat.cross(bxv).normalized();
      force += lift(alpha * kRadToDeg, mach) * dl;
      mom = moment(alpha * kRadToDeg, mach) * bxv.normalized();
    }
    f = rw.transpose() * force;
    m = rw.transpose() * mom;
  }
};

struct SyntheticGrid {
  std::vector<double> body_mach{0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> body_alpha{1, 2, 3, 5, 7.5, 10, 12.5, 15, 20, 25, 30, 35, 40, 45};
  std::vector<double> fin_mach{0.1, 0.5, 0.8, 0.9, 1.0, 1.1, 1.2, 1.5, 2.0, 3.0};
  std::vector<double> fin_alpha{-40, -25, -12, -4, 4, 12, 25, 40};
  std::vector<double> commands{-1.0, -0.5, 0.5, 1.0};
};

inline std::vector<SweepRow> generate_sweep_rows(const SyntheticAero& model,
                                                 const SyntheticGrid& grid = {}) {
  std::vector<SweepRow> rows;
  for (double m : grid.body_mach)
    for (double a : grid.body_alpha) {
      Vec3d f, mo;
      model.body_wind(a, 0.0, m, f, mo);
      rows.push_back({m, a, 0.0, 0.0, 0.0, f[0], f[1], f[2], mo[0], mo[1], mo[2]});
    }
  auto fin_row = [&](double m, double a1, double a2, double c1, double c2) {
    Vec3d f, mo;
    model.body_wind(a1, a2, m, f, mo);
    const double l1 = model.fin_scale(m, a2) * SyntheticAero::fin_shape(c1, a1);
    const double l2 = model.fin_scale(m, a1) * SyntheticAero::fin_shape(c2, a2);
    const double d = model.polar_lin(m) * (std::cos(a2 * kDegToRad) * l1 * l1 +
                                           std::cos(a1 * kDegToRad) * l2 * l2) +
                     model.polar_cst(m) * (l1 * l1 + l2 * l2);
    const Vec3d df(l1, l2, d);
    // Fin moment about the centre of mass, expressed in wind axes.
    Vec3d w(std::tan(a1 * kDegToRad), std::tan(a2 * kDegToRad), 1.0);
    w.normalize();
    const Mat3d rw = wind_rotation<double>(Vec3d(-w));
    const Vec3d dm = rw.transpose() * model.r_fins.cross(rw * df);
    f += df;
    mo += dm;
    rows.push_back({m, a1, a2, c1, c2, f[0], f[1], f[2], mo[0], mo[1], mo[2]});
  };
  for (double m : grid.fin_mach)
    for (double a1 : grid.fin_alpha)
      for (double a2 : grid.fin_alpha) {
        fin_row(m, a1, a2, 0.0, 0.0);
        for (double c : grid.commands) {
          fin_row(m, a1, a2, c, 0.0);
          fin_row(m, a1, a2, 0.0, c);
        }
        for (double c1 : {-0.5, 0.5})
          for (double c2 : {-0.5, 0.5}) fin_row(m, a1, a2, c1, c2);
      }
  return rows;
}

}  // namespace rlv
