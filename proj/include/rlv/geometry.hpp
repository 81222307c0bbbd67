#pragma once

// Attitude, angle-of-attack and wind-frame geometry for the axisymmetric
// vehicle. Frames are inertial North-East-Up with the landing site at the
// origin; body +z is the nose axis.

#include <rlv/types.hpp>

namespace rlv {

template <class T> Mat3<T> rot_x(const T& a) {
  using std::cos;
  using std::sin;
  const T c = cos(a), s = sin(a);
  const T z = constant_like(a, 0.0), o = constant_like(a, 1.0);
  Mat3<T> m;
  m << o, z, z, z, c, -s, z, s, c;
  return m;
}

template <class T> Mat3<T> rot_y(const T& a) {
  using std::cos;
  using std::sin;
  const T c = cos(a), s = sin(a);
  const T z = constant_like(a, 0.0), o = constant_like(a, 1.0);
  Mat3<T> m;
  m << c, z, s, z, o, z, -s, z, c;
  return m;
}

// Body-to-inertial rotation: tilt att(0) about North, then att(1) about East.
template <class T> Mat3<T> attitude_matrix(const Vec2<T>& att) {
  for (int i = 0; i < 2; ++i) {
    const double a = value_of(att[i]);
    if (!std::isfinite(a) || std::abs(a) >= kPi / 2)
      throw DomainError("attitude_matrix: tilt angle outside (-pi/2, pi/2)");
  }
  return rot_x(att[0]) * rot_y(att[1]);
}

template <class T> struct AngleOfAttack {
  T alpha;   // total, rad
  T alpha1;  // B_x-B_z plane, rad
  T alpha2;  // B_y-B_z plane, rad
};

namespace detail {

// Angles from the oncoming-flow direction w = T^T(-v) in body axes.
template <class T> AngleOfAttack<T> aoa_from_body_flow(const Vec3<T>& w) {
  using std::atan2;
  Vec2<T> wxy(w[0], w[1]);
  return {atan2(safe_norm(wxy), w[2]), atan2(w[0], w[2]), atan2(w[1], w[2])};
}

}  // namespace detail

// Angle between body +z and the oncoming flow -v. Throws at zero speed.
template <class T>
AngleOfAttack<T> angle_of_attack(const Vec3<T>& v, const Mat3<T>& t_bi) {
  if (!(value_of(v.squaredNorm()) > 0.0))
    throw SingularityError("angle_of_attack: zero velocity");
  Vec3<T> w = -(t_bi.transpose() * v);
  return detail::aoa_from_body_flow(w);
}

template <class T>
AngleOfAttack<T> angle_of_attack(const Vec3<T>& v, const Vec2<T>& att) {
  return angle_of_attack<T>(v, attitude_matrix(att));
}

// Minimal rotation taking -z onto the velocity direction (Moller-Hughes).
template <class T> Mat3<T> wind_rotation(const Vec3<T>& v) {
  const double n = std::sqrt(value_of(v.squaredNorm()));
  if (!(n > 0.0) || !std::isfinite(n)) throw SingularityError("wind_rotation: zero velocity");
  using std::sqrt;
  Vec3<T> t = v / sqrt(v.squaredNorm());
  const T c = -t[2];
  if (value_of(c) <= -1.0 + 1e-12)
    throw SingularityError("wind_rotation: velocity along +z (antipodal singularity)");
  const T h = 1.0 / (1.0 + c);
  Vec3<T> a(t[1], -t[0], constant_like(t[0], 0.0));
  Mat3<T> r = h * a * a.transpose();
  r(0, 0) += c;
  r(1, 1) += c;
  r(2, 2) += c;
  // + [a]x with a_z = 0
  r(0, 2) += a[1];
  r(1, 2) -= a[0];
  r(2, 0) -= a[1];
  r(2, 1) += a[0];
  return r;
}

}  // namespace rlv
