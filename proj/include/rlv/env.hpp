#pragma once

// Spherical-planet environment: ISO 2533 standard atmosphere, point-mass
// gravity and rotating-frame accelerations in the landing-site NEU frame.

#include <rlv/types.hpp>

#include <array>

namespace rlv {

struct EnvParams {
  double mu = 3.5316e12;                        // m^3/s^2
  Vec3d omega_planet{2.0 * kPi / 21600.0, 0.0, 0.0};  // rad/s, NEU components
  Vec3d r_center{0.0, 0.0, -600.0e3};           // planet center, m
  double rho0 = 1.225;                          // density normalizer, kg/m^3
  double T0 = 288.15;                           // surface temperature, K
  double planet_radius = 600.0e3;               // m
  // Geometric altitude is multiplied by this before the ISA lookup. 1.25
  // compresses the atmosphere to 80% of its terrestrial height.
  double altitude_scale = 1.25;

  void validate() const {
    if (!(mu > 0.0)) throw ConfigError("env: mu must be positive");
    if (!(planet_radius > 0.0)) throw ConfigError("env: planet_radius must be positive");
    if (!(rho0 > 0.0)) throw ConfigError("env: rho0 must be positive");
    if (!(altitude_scale > 0.0)) throw ConfigError("env: altitude_scale must be positive");
    if (!omega_planet.allFinite() || !r_center.allFinite())
      throw ConfigError("env: non-finite vector");
    if (std::abs(T0 - 288.15) > 1e-9)
      throw ConfigError("env: only the ISA surface temperature (288.15 K) is supported");
  }
};

namespace isa {

inline constexpr double kG0 = 9.80665;       // m/s^2
inline constexpr double kGasConstant = 287.05287;  // J/(kg K)
inline constexpr double kGamma = 1.4;
inline constexpr double kSeaLevelPressure = 101325.0;
inline constexpr double kSeaLevelTemperature = 288.15;
// Top of the tabulated layers (geopotential metres).
inline constexpr double kCeiling = 84852.0;
// Below this geopotential altitude the troposphere gradient is held.
inline constexpr double kFloor = -5000.0;

struct Layer {
  double base_height;  // geopotential m
  double base_temperature;
  double lapse;        // K/m
  double base_pressure;
};

inline const std::array<Layer, 7>& layers() {
  static const std::array<Layer, 7> table = [] {
    std::array<Layer, 7> t{{{0.0, 288.15, -0.0065, 0.0},
                            {11000.0, 0.0, 0.0, 0.0},
                            {20000.0, 0.0, 0.0010, 0.0},
                            {32000.0, 0.0, 0.0028, 0.0},
                            {47000.0, 0.0, 0.0, 0.0},
                            {51000.0, 0.0, -0.0028, 0.0},
                            {71000.0, 0.0, -0.0020, 0.0}}};
    t[0].base_pressure = kSeaLevelPressure;
    for (std::size_t i = 1; i < t.size(); ++i) {
      const Layer& b = t[i - 1];
      const double dh = t[i].base_height - b.base_height;
      const double temp = b.base_temperature + b.lapse * dh;
      t[i].base_temperature = temp;
      if (b.lapse == 0.0) {
        t[i].base_pressure =
            b.base_pressure * std::exp(-kG0 * dh / (kGasConstant * b.base_temperature));
      } else {
        t[i].base_pressure = b.base_pressure *
                             std::pow(temp / b.base_temperature, -kG0 / (b.lapse * kGasConstant));
      }
    }
    return t;
  }();
  return table;
}

template <class T> struct State {
  T temperature;
  T pressure;
  T density;
  T speed_of_sound;
};

// ISA properties at geopotential altitude h (m). Density is zero above the
// ceiling; temperature holds its ceiling value there.
template <class T> State<T> at_geopotential(const T& h_in) {
  using std::exp;
  using std::pow;
  using std::sqrt;
  const auto& tab = layers();
  double hv = value_of(h_in);
  T h = h_in;
  if (hv < kFloor) h = constant_like(h_in, kFloor);
  const bool above = hv >= kCeiling;
  if (above) h = constant_like(h_in, kCeiling);
  hv = value_of(h);

  std::size_t idx = 0;
  for (std::size_t i = 1; i < tab.size(); ++i) {
    if (hv >= tab[i].base_height) idx = i;
  }
  const Layer& L = tab[idx];
  T dh = h - L.base_height;
  T temp = L.base_temperature + L.lapse * dh;
  T pres;
  if (L.lapse == 0.0) {
    pres = L.base_pressure * exp(-kG0 * dh / (kGasConstant * L.base_temperature));
  } else {
    pres = L.base_pressure * pow(temp / L.base_temperature, -kG0 / (L.lapse * kGasConstant));
  }
  State<T> s{temp, pres, pres / (kGasConstant * temp), sqrt(kGamma * kGasConstant * temp)};
  if (above) {
    s.pressure = constant_like(pres, 0.0);
    s.density = constant_like(pres, 0.0);
  }
  return s;
}

}  // namespace isa

template <class T> struct AtmosphereSample {
  T density;         // kg/m^3
  T speed_of_sound;  // m/s
};

template <class T> T geometric_altitude(const Vec3<T>& r, const EnvParams& env) {
  Vec3<T> d = r - env.r_center.template cast<T>();
  return d.norm() - env.planet_radius;
}

// ISA density and speed of sound at inertial position r.
template <class T> AtmosphereSample<T> atmosphere(const Vec3<T>& r, const EnvParams& env) {
  if (!all_finite(r)) throw InvalidInput("atmosphere: non-finite position");
  T h = geometric_altitude(r, env) * env.altitude_scale;
  auto s = isa::at_geopotential(h);
  return {s.density, s.speed_of_sound};
}

inline AtmosphereSample<double> atmosphere(const Vec3d& r, const EnvParams& env) {
  return atmosphere<double>(r, env);
}

// Point-mass gravity, pointing from r toward the planet center.
template <class T> Vec3<T> gravity_accel(const Vec3<T>& r, const EnvParams& env) {
  Vec3<T> d = env.r_center.template cast<T>() - r;
  T n2 = d.squaredNorm();
  if (!(value_of(n2) > 0.0)) throw SingularityError("gravity_accel: position at planet center");
  using std::sqrt;
  T n = sqrt(n2);
  return d * (env.mu / (n2 * n));
}

template <class T> struct FrameAccels {
  Vec3<T> coriolis;
  Vec3<T> centrifugal;
};

// Apparent accelerations in the planet-fixed frame.
template <class T>
FrameAccels<T> frame_accels(const Vec3<T>& r, const Vec3<T>& v, const EnvParams& env) {
  Vec3<T> w = env.omega_planet.template cast<T>();
  Vec3<T> rel = r - env.r_center.template cast<T>();
  return {-2.0 * w.cross(v), -w.cross(w.cross(rel))};
}

template <class T> T mach(const Vec3<T>& r, const Vec3<T>& v, const EnvParams& env) {
  auto atm = atmosphere(r, env);
  return safe_norm(v) / atm.speed_of_sound;
}

}  // namespace rlv
