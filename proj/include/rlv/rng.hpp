#pragma once

// Counter-based SplitMix64 generator. Draw i of stream s under seed k is a
// pure function of (k, s, i), so attempts can be replayed or run out of order.

#include <rlv/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace rlv {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  static constexpr const char* kName = "splitmix64-counter";

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on the unit sphere (Archimedes: uniform z and azimuth).
  Vec3d unit_vector() {
    const double z = 2.0 * uniform() - 1.0;
    const double phi = 2.0 * kPi * uniform();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3d d(r * std::cos(phi), r * std::sin(phi), z);
    return d / d.norm();
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rlv
