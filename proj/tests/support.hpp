#pragma once

#include <rlv/scp.hpp>
#include <rlv/synthetic_aero.hpp>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace rlv::testing {

inline std::shared_ptr<const AeroDatabase> synthetic_db() {
  static const auto db = std::make_shared<const AeroDatabase>(build_database(generate_sweep_rows(SyntheticAero{})));
  return db;
}

inline VehicleModel reference_model() {
  VehicleModel m;
  m.aero = synthetic_db();
  return m;
}

inline std::shared_ptr<const Transcription> reference_transcription(DiscretizationConfig cfg = {}) {
  return std::make_shared<const Transcription>(reference_model(), cfg);
}

inline ProblemSpec reference_problem() {
  ProblemSpec p;
  p.bc.x_init << 19516.0, 500.0, 2500.0, 15000.0, 0.0, -150.0, -350.0, -0.98, 0.0, 0.0, 0.0;
  return p;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("rlv_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

// Volume of the convex hull of pts by brute force: every plane through three
// points with all others on one side is a supporting plane. Faces with more
// than three coplanar points are gathered per plane and triangulated about
// their centroid, so nothing is counted twice.
inline double brute_force_hull_volume(const std::vector<Vec3d>& pts, double rel_eps = 1e-10) {
  const int n = static_cast<int>(pts.size());
  if (n < 4) return 0.0;
  Vec3d c = Vec3d::Zero();
  double scale = 0.0;
  for (const auto& p : pts) c += p;
  c /= n;
  for (const auto& p : pts) scale = std::max(scale, (p - c).norm());
  const double eps = rel_eps * std::max(1.0, scale);

  struct Plane {
    Vec3d n;
    double d;
  };
  std::vector<Plane> planes;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        Vec3d nn = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
        const double len = nn.norm();
        if (len <= eps * scale) continue;
        nn /= len;
        double d = nn.dot(pts[i]);
        int above = 0, below = 0;
        for (int l = 0; l < n; ++l) {
          const double s = nn.dot(pts[l]) - d;
          above += s > eps;
          below += s < -eps;
          if (above && below) break;
        }
        if (above && below) continue;
        if (above) {
          nn = -nn;
          d = -d;
        }
        bool dup = false;
        for (const auto& q : planes)
          if ((q.n - nn).norm() < 1e-9 && std::abs(q.d - d) <= eps) dup = true;
        if (!dup) planes.push_back({nn, d});
      }

  double vol = 0.0;
  for (const auto& pl : planes) {
    std::vector<Vec3d> on;
    for (const auto& p : pts)
      if (std::abs(pl.n.dot(p) - pl.d) <= eps) on.push_back(p);
    Vec3d g = Vec3d::Zero();
    for (const auto& p : on) g += p;
    g /= static_cast<double>(on.size());
    // Order the face polygon by angle about its centroid, keeping extreme points only.
    const Vec3d e1 = (on[0] - g).norm() > 0 ? Vec3d((on[0] - g).normalized()) : pl.n.unitOrthogonal();
    const Vec3d e2 = pl.n.cross(e1);
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : on) xy.emplace_back((p - g).dot(e1), (p - g).dot(e2));
    std::sort(xy.begin(), xy.end());
    std::vector<std::pair<double, double>> h(2 * xy.size());
    auto cross = [](auto o, auto a, auto b) {
      return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
    };
    std::size_t m = 0;
    for (std::size_t i = 0; i < xy.size(); ++i) {
      while (m >= 2 && cross(h[m - 2], h[m - 1], xy[i]) <= 0) --m;
      h[m++] = xy[i];
    }
    for (std::size_t i = xy.size() - 1, t = m + 1; i-- > 0;) {
      while (m >= t && cross(h[m - 2], h[m - 1], xy[i]) <= 0) --m;
      h[m++] = xy[i];
    }
    h.resize(m > 0 ? m - 1 : 0);
    double area = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const auto& a = h[i];
      const auto& b = h[(i + 1) % h.size()];
      area += a.first * b.second - a.second * b.first;
    }
    area = 0.5 * std::abs(area);
    vol += area * (pl.d - pl.n.dot(c)) / 3.0;
  }
  return vol;
}

}  // namespace rlv::testing
