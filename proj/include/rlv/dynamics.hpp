#pragma once

// 5DOF equations of motion: translation, two tilt angles with rates, and mass.

#include <rlv/aerotables.hpp>
#include <rlv/env.hpp>
#include <rlv/geometry.hpp>

#include <memory>

namespace rlv {

struct VehicleParams {
  double m_dry = 10088.0;
  double m_wet = 19516.0;
  Vec3d J_dry{4.4e5, 4.4e5, 0.040e5};
  Vec3d J_wet{5.6e5, 5.6e5, 0.053e5};
  double isp = 300.0;
  double g0 = 9.80665;
  double u_max = 936.0e3;
  double u_min = 0.25 * 936.0e3;
  Vec3d r_engine_B{0.0, 0.0, -4.1};
  Vec3d r_fins_B{0.0, 0.0, 9.2};
  double gimbal_max = 10.5 * kDegToRad;
  double omega_max = 15.0 * kDegToRad;
  double c_damp = 10.0;
  double alpha_max = 45.0 * kDegToRad;
  double q_max = 8.0e4;
  double chi_max = 1.0e6 * kDegToRad;  // Pa*rad
  double v_small = 100.0;

  void validate() const {
    if (!(m_dry > 0.0 && m_dry < m_wet)) throw ConfigError("vehicle: need 0 < m_dry < m_wet");
    if (!(u_min >= 0.0 && u_min < u_max)) throw ConfigError("vehicle: need 0 <= u_min < u_max");
    if ((J_dry.array() <= 0.0).any() || (J_wet.array() <= 0.0).any())
      throw ConfigError("vehicle: inertia entries must be positive");
    if (!(gimbal_max > 0.0 && gimbal_max < kPi / 2))
      throw ConfigError("vehicle: gimbal_max must lie in (0, pi/2)");
    if (!(isp > 0.0 && g0 > 0.0)) throw ConfigError("vehicle: isp and g0 must be positive");
    if (!(omega_max > 0.0 && alpha_max > 0.0 && q_max > 0.0 && chi_max > 0.0 && v_small > 0.0))
      throw ConfigError("vehicle: constraint limits must be positive");
    if (!(c_damp >= 0.0)) throw ConfigError("vehicle: c_damp must be non-negative");
  }
};

// State and control vector layouts.
inline constexpr int kNx = 11;
inline constexpr int kNu = 5;
inline constexpr int kIdxM = 0;
inline constexpr int kIdxR = 1;
inline constexpr int kIdxV = 4;
inline constexpr int kIdxAtt = 7;
inline constexpr int kIdxW = 9;
inline constexpr int kIdxThrust = 0;
inline constexpr int kIdxFin = 3;

template <class T> using StateVec = Eigen::Matrix<T, kNx, 1>;
template <class T> using ControlVec = Eigen::Matrix<T, kNu, 1>;
using StateVecd = StateVec<double>;
using ControlVecd = ControlVec<double>;

struct VehicleState {
  double m = 0;
  Vec3d r = Vec3d::Zero();
  Vec3d v = Vec3d::Zero();
  Vec2d att = Vec2d::Zero();
  Vec2d omega = Vec2d::Zero();

  StateVecd pack() const {
    StateVecd x;
    x << m, r, v, att, omega;
    return x;
  }
  static VehicleState unpack(const StateVecd& x) {
    return {x[kIdxM], x.segment<3>(kIdxR), x.segment<3>(kIdxV), x.segment<2>(kIdxAtt),
            x.segment<2>(kIdxW)};
  }
};

struct ControlInput {
  Vec3d u_thrust_B = Vec3d::Zero();
  Vec2d u_fin = Vec2d::Zero();

  ControlVecd pack() const {
    ControlVecd u;
    u << u_thrust_B, u_fin;
    return u;
  }
  static ControlInput unpack(const ControlVecd& u) {
    return {u.segment<3>(kIdxThrust), u.segment<2>(kIdxFin)};
  }
};

enum class Phase { Aerodynamic, Propulsive };

// Everything the equations of motion need, shared read-only.
struct VehicleModel {
  VehicleParams vehicle;
  EnvParams env;
  std::shared_ptr<const AeroDatabase> aero;
  // Test switches; production code leaves both on.
  bool aero_enabled = true;
  bool gravity_enabled = true;
};

template <class T> struct ForceMoment {
  Vec3<T> force;
  Vec3<T> moment;
};

// Quantities shared by the equations of motion and the path constraints.
template <class T> struct FlightCondition {
  T speed;
  T rho_r;       // density ratio rho/rho0
  T q;           // dynamic pressure, Pa
  T mach;
  AngleOfAttack<T> aoa;  // zero below the speed floor
  bool has_flow;
};

inline constexpr double kSpeedFloor = 1e-9;

template <class T>
FlightCondition<T> flight_condition(const Vec3<T>& r, const Vec3<T>& v, const Mat3<T>& t_bi,
                                    const VehicleModel& model) {
  FlightCondition<T> fc;
  auto atm = atmosphere<T>(r, model.env);
  fc.speed = safe_norm(v);
  fc.rho_r = atm.density / model.env.rho0;
  fc.q = 0.5 * atm.density * v.squaredNorm();
  fc.mach = fc.speed / atm.speed_of_sound;
  fc.has_flow = value_of(fc.speed) > kSpeedFloor;
  if (fc.has_flow) {
    fc.aoa = angle_of_attack<T>(v, t_bi);
  } else {
    const T z = constant_like(fc.speed, 0.0);
    fc.aoa = {z, z, z};
  }
  return fc;
}

// Body lift, drag and moment. Force and moment are inertial.
template <class T>
ForceMoment<T> body_aero(const Vec3<T>& v, const Mat3<T>& t_bi, const FlightCondition<T>& fc,
                         const AeroDatabase& db) {
  ForceMoment<T> out{Vec3<T>::Zero(), Vec3<T>::Zero()};
  if (!fc.has_flow) {
    out.force = v * constant_like(fc.speed, 0.0);
    out.moment = out.force;
    return out;
  }
  const T a_deg = fc.aoa.alpha * kRadToDeg;
  const T cl = interp2(db.cl_mod, a_deg, fc.mach);
  const T cd = interp2(db.cd_body, a_deg, fc.mach);
  const T cm = interp2(db.cm_mod, a_deg, fc.mach);
  const Vec3<T> b = t_bi.col(2);
  const Vec3<T> bxv = b.cross(v);
  const T half = 0.5 * fc.rho_r;
  out.force = half * cl * v.cross(bxv) - half * cd * fc.speed * v;
  out.moment = half * cm * fc.speed * bxv;
  return out;
}

template <class T> struct FinTerms {
  Vec2<T> lift;  // wind-frame lift components, N
  T drag;        // N
  Vec3<T> force_I;
  Vec3<T> moment_B;
};

// Fin lift from commands in the wind frame with polar-coupled induced drag.
template <class T>
FinTerms<T> fin_forces(const Vec3<T>& v, const Mat3<T>& t_bi, const Vec2<T>& u_fin,
                       const FlightCondition<T>& fc, const AeroDatabase& db,
                       const Vec3d& r_fins_B) {
  FinTerms<T> out;
  const T zero = constant_like(fc.speed, 0.0);
  if (!fc.has_flow) {
    out.lift = Vec2<T>(zero, zero);
    out.drag = zero;
    out.force_I = Vec3<T>(zero, zero, zero);
    out.moment_B = out.force_I;
    return out;
  }
  const T a1 = fc.aoa.alpha1 * kRadToDeg;
  const T a2 = fc.aoa.alpha2 * kRadToDeg;
  const T qr = 0.5 * fc.rho_r * fc.speed * fc.speed;
  using std::cos;
  Vec2<T> c;
  for (int i = 0; i < 2; ++i) c[i] = u_fin[i] * interp3(db.fin_lift_scale[i], fc.mach, a1, a2);
  const T clin = interp1(db.polar_lin, fc.mach);
  const T ccst = interp1(db.polar_cst, fc.mach);
  const T cd = clin * (cos(fc.aoa.alpha2) * c[0] * c[0] + cos(fc.aoa.alpha1) * c[1] * c[1]) +
               ccst * (c[0] * c[0] + c[1] * c[1]);
  out.lift = qr * c;
  out.drag = qr * cd;
  const Mat3<T> rw = wind_rotation<T>(v);
  const Vec3<T> vhat = v / fc.speed;
  out.force_I = rw.col(0) * out.lift[0] + rw.col(1) * out.lift[1] - vhat * out.drag;
  out.moment_B = r_fins_B.template cast<T>().cross(t_bi.transpose() * out.force_I);
  return out;
}

template <class T> Vec3<T> interpolated_inertia(const T& m, const VehicleParams& p) {
  const T f = (m - p.m_dry) / (p.m_wet - p.m_dry);
  return p.J_dry.template cast<T>() + f * (p.J_wet - p.J_dry).template cast<T>();
}

// Derivative together with the flight condition it was computed from.
template <class T> struct DynamicsEval {
  StateVec<T> xdot;
  FlightCondition<T> fc;
  Vec2<T> fin_lo;
  Vec2<T> fin_hi;
};

template <class T>
DynamicsEval<T> evaluate_dynamics(const StateVec<T>& x, const ControlVec<T>& u, Phase phase,
                                  const VehicleModel& model, bool need_fin_bounds = false) {
  const VehicleParams& p = model.vehicle;
  const T m = x[kIdxM];
  if (!(value_of(m) > 0.0)) throw InvalidInput("state_derivative: non-positive mass");
  const Vec3<T> r = x.template segment<3>(kIdxR);
  const Vec3<T> v = x.template segment<3>(kIdxV);
  const Vec2<T> att = x.template segment<2>(kIdxAtt);
  const Vec2<T> w = x.template segment<2>(kIdxW);
  const Mat3<T> t_bi = attitude_matrix(att);

  Vec3<T> thrust = u.template segment<3>(kIdxThrust);
  if (phase == Phase::Aerodynamic) thrust = thrust * 0.0;
  const Vec2<T> u_fin = u.template segment<2>(kIdxFin);

  DynamicsEval<T> ev;
  ev.fc = flight_condition<T>(r, v, t_bi, model);

  Vec3<T> force = t_bi * thrust;
  Vec3<T> moment_B = p.r_engine_B.template cast<T>().cross(thrust);
  if (model.aero_enabled) {
    const AeroDatabase& db = *model.aero;
    auto body = body_aero<T>(v, t_bi, ev.fc, db);
    auto fins = fin_forces<T>(v, t_bi, u_fin, ev.fc, db, p.r_fins_B);
    force += body.force + fins.force_I;
    moment_B += t_bi.transpose() * body.moment + fins.moment_B;
    if (need_fin_bounds) {
      auto fb = fin_bounds<T>(db, ev.fc.mach, ev.fc.aoa.alpha1 * kRadToDeg,
                              ev.fc.aoa.alpha2 * kRadToDeg);
      ev.fin_lo = fb.lo;
      ev.fin_hi = fb.hi;
    }
  } else if (need_fin_bounds) {
    ev.fin_lo = Vec2<T>::Constant(constant_like(m, -1.0));
    ev.fin_hi = Vec2<T>::Constant(constant_like(m, 1.0));
  }

  Vec3<T> accel = force / m;
  if (model.gravity_enabled) {
    accel += gravity_accel<T>(r, model.env);
    auto fa = frame_accels<T>(r, v, model.env);
    accel += fa.coriolis + fa.centrifugal;
  }
  const Vec3<T> J = interpolated_inertia(m, p);

  ev.xdot[kIdxM] = -safe_norm(thrust) / (p.g0 * p.isp);
  ev.xdot.template segment<3>(kIdxR) = v;
  ev.xdot.template segment<3>(kIdxV) = accel;
  ev.xdot.template segment<2>(kIdxAtt) = w;
  ev.xdot[kIdxW] = moment_B[0] / J[0] - p.c_damp * w[0];
  ev.xdot[kIdxW + 1] = moment_B[1] / J[1] - p.c_damp * w[1];
  return ev;
}

template <class T>
StateVec<T> state_derivative(const StateVec<T>& x, const ControlVec<T>& u, Phase phase,
                             const VehicleModel& model) {
  return evaluate_dynamics<T>(x, u, phase, model).xdot;
}

inline StateVecd state_derivative(const VehicleState& s, const ControlInput& c, Phase phase,
                                  const VehicleModel& model) {
  return state_derivative<double>(s.pack(), c.pack(), phase, model);
}

}  // namespace rlv
