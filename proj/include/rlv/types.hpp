#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rlv {

template <class T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <class T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T> using Mat3 = Eigen::Matrix<T, 3, 3>;

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

// Error hierarchy. Every failure raised by the library derives from rlv::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidInput : Error {
  using Error::Error;
};
struct SingularityError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct PropagationError : Error {
  PropagationError(const std::string& what, int segment)
      : Error(what), segment_index(segment) {}
  int segment_index;
};

// Scalar helpers that work for both double and Eigen::AutoDiffScalar.
template <class T> inline double value_of(const T& x) {
  if constexpr (std::is_arithmetic_v<T>) {
    return static_cast<double>(x);
  } else {
    return x.value();
  }
}

// Returns x with all derivative information dropped.
template <class T> inline T constant_like(const T& x, double v) {
  if constexpr (std::is_arithmetic_v<T>) {
    return v;
  } else {
    T out = x;
    out.value() = v;
    out.derivatives().setZero();
    return out;
  }
}

// Euclidean norm with a zero subgradient at the origin (AD safe).
template <class T, int N> inline T safe_norm(const Eigen::Matrix<T, N, 1>& v) {
  T sq = v.squaredNorm();
  if (value_of(sq) <= 0.0) {
    return constant_like(sq, 0.0);
  }
  using std::sqrt;
  return sqrt(sq);
}

template <class T> inline T max0(const T& x) {
  return value_of(x) > 0.0 ? x : constant_like(x, 0.0);
}

template <class T, int N> inline bool all_finite(const Eigen::Matrix<T, N, 1>& v) {
  for (int i = 0; i < v.size(); ++i) {
    if (!std::isfinite(value_of(v[i]))) return false;
  }
  return true;
}

}  // namespace rlv
