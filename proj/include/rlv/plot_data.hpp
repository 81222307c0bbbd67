#pragma once

// Plot-ready CSV series from trajectory and reach documents. Reads only the
// documents; nothing here touches the dynamics.

#include <rlv/documents.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace rlv {

namespace detail {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path.string()), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path_);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& v) {
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
      // %.17g round-trips and never uses a locale decimal comma.
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      out_ << (i ? "," : "") << buf;
    }
    out_ << '\n';
    if (!out_) throw IoError("write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline std::vector<double> col(const json& path, const char* key) {
  if (!path.contains(key)) throw DataError(std::string("plot data: missing series '") + key + "'");
  return path.at(key).get<std::vector<double>>();
}

inline std::vector<std::vector<double>> rows(const json& path, const char* key) {
  if (!path.contains(key)) throw DataError(std::string("plot data: missing series '") + key + "'");
  return path.at(key).get<std::vector<std::vector<double>>>();
}

inline void write_states(const json& path, const std::filesystem::path& file) {
  const auto t = col(path, "t_s");
  const auto X = rows(path, "states");
  const auto alt = col(path, "altitude_m");
  const auto mach = col(path, "mach");
  const int half = path.value("half_node", static_cast<int>(t.size() - 1) / 2);
  CsvWriter w(file, {"node", "t_s", "phase", "m_kg", "rn_m", "re_m", "ru_m", "vn_m_s", "ve_m_s", "vu_m_s",
                     "speed_m_s", "att1_deg", "att2_deg", "omega1_deg_s", "omega2_deg_s", "altitude_m", "mach"});
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto& x = X.at(k);
    if (x.size() != kNx) throw DataError("plot data: state row of wrong length");
    const double sp = std::sqrt(x[4] * x[4] + x[5] * x[5] + x[6] * x[6]);
    w.row({double(k), t[k], static_cast<int>(k) < half ? 0.0 : 1.0, x[0], x[1], x[2], x[3], x[4], x[5], x[6], sp,
           x[7] * kRadToDeg, x[8] * kRadToDeg, x[9] * kRadToDeg, x[10] * kRadToDeg, alt.at(k), mach.at(k)});
  }
}

inline void write_controls(const json& path, const std::filesystem::path& file) {
  const auto t = col(path, "t_s");
  const auto U = rows(path, "controls");
  const auto thr = col(path, "thrust_n");
  const auto lo = rows(path, "fin_lo");
  const auto hi = rows(path, "fin_hi");
  CsvWriter w(file, {"node", "t_s", "tx_n", "ty_n", "tz_n", "thrust_n", "fin1", "fin2", "fin1_lo", "fin1_hi",
                     "fin2_lo", "fin2_hi"});
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto& u = U.at(k);
    if (u.size() != kNu) throw DataError("plot data: control row of wrong length");
    w.row({double(k), t[k], u[0], u[1], u[2], thr.at(k), u[3], u[4], lo.at(k).at(0), hi.at(k).at(0),
           lo.at(k).at(1), hi.at(k).at(1)});
  }
}

inline void write_constraints(const json& path, const json& lim, const std::filesystem::path& file) {
  const auto t = col(path, "t_s");
  const auto a = col(path, "alpha_deg");
  const auto ae = col(path, "alpha_eff_deg");
  const auto q = col(path, "q_pa");
  const auto qa = col(path, "q_alpha_pa_deg");
  const auto thr = col(path, "thrust_n");
  const auto g = col(path, "gimbal_deg");
  const auto om = col(path, "omega_deg_s");
  auto L = [&](const char* k) {
    if (!lim.contains(k)) throw DataError(std::string("plot data: missing limit '") + k + "'");
    return lim.at(k).get<double>();
  };
  CsvWriter w(file, {"node", "t_s", "alpha_deg", "alpha_eff_deg", "alpha_max_deg", "q_pa", "q_max_pa",
                     "q_alpha_pa_deg", "chi_max_pa_deg", "thrust_n", "u_min_n", "u_max_n", "gimbal_deg",
                     "gimbal_max_deg", "omega_deg_s", "omega_max_deg_s"});
  for (std::size_t k = 0; k < t.size(); ++k)
    w.row({double(k), t[k], a.at(k), ae.at(k), L("alpha_max_deg"), q.at(k), L("q_max_pa"), qa.at(k),
           L("chi_max_pa_deg"), thr.at(k), L("u_min_n"), L("u_max_n"), g.at(k), L("gimbal_max_deg"), om.at(k),
           L("omega_max_deg_s")});
}

}  // namespace detail

// Files written for a trajectory document.
inline std::vector<std::string> emit_trajectory_plots(const json& doc, const std::filesystem::path& out) {
  expect_kind(doc, "trajectory");
  if (!doc.contains("path") || !doc.contains("limits")) throw DataError("trajectory: missing path or limits");
  std::filesystem::create_directories(out);
  detail::write_states(doc.at("path"), out / "states.csv");
  detail::write_controls(doc.at("path"), out / "controls.csv");
  detail::write_constraints(doc.at("path"), doc.at("limits"), out / "constraints.csv");
  write_json({{"kind", "plot-meta"},
              {"tool_version", kToolVersion},
              {"config_hash", doc.value("config_hash", "")},
              {"limits", doc.at("limits")}},
             (out / "limits.json").string());
  return {"states.csv", "controls.csv", "constraints.csv", "limits.json"};
}

// Vertex keys farthest along +N, -N, +E, -E, +Up, -Up; ties go to the lower key.
inline std::array<std::int64_t, 6> extremal_keys(const std::vector<std::pair<std::int64_t, Vec3d>>& verts) {
  if (verts.empty()) throw DataError("reach: no vertices");
  std::array<std::int64_t, 6> best{};
  for (int d = 0; d < 6; ++d) {
    const int axis = d / 2;
    const double s = d % 2 == 0 ? 1.0 : -1.0;
    double bv = -std::numeric_limits<double>::infinity();
    std::int64_t bk = -1;
    for (const auto& [k, p] : verts) {
      const double v = s * p[axis];
      if (v > bv || (v == bv && k < bk)) {
        bv = v;
        bk = k;
      }
    }
    best[static_cast<std::size_t>(d)] = bk;
  }
  return best;
}

// archive_dir holds the per-trajectory documents named traj_<key>.json.
inline std::vector<std::string> emit_reach_plots(const json& doc, const std::filesystem::path& archive_dir,
                                                 const std::filesystem::path& out) {
  expect_kind(doc, "reach");
  std::filesystem::create_directories(out);
  std::vector<std::string> files;
  const auto vol = doc.at("volume_history_m3").get<std::vector<double>>();
  {
    detail::CsvWriter w(out / "volume_history.csv", {"iteration", "volume_m3"});
    for (std::size_t i = 0; i < vol.size(); ++i) w.row({double(i), vol[i]});
    files.push_back("volume_history.csv");
  }
  std::vector<std::pair<std::int64_t, Vec3d>> verts;
  {
    detail::CsvWriter w(out / "vertices.csv", {"key", "rn_m", "re_m", "ru_m"});
    for (const auto& v : doc.at("vertices")) {
      const auto k = v.at("key").get<std::int64_t>();
      const Vec3d p = vec3_from_json(v.at("point_m"));
      verts.emplace_back(k, p);
      w.row({double(k), p[0], p[1], p[2]});
    }
    files.push_back("vertices.csv");
  }
  {
    detail::CsvWriter w(out / "facets.csv", {"v0", "v1", "v2"});
    for (const auto& f : doc.at("facets")) {
      const auto v = f.at("v").get<std::vector<double>>();
      w.row(v);
    }
    files.push_back("facets.csv");
  }
  const auto keys = extremal_keys(verts);
  {
    detail::CsvWriter w(out / "extremal.csv", {"direction", "key"});
    for (int d = 0; d < 6; ++d) w.row({double(d), double(keys[static_cast<std::size_t>(d)])});
    files.push_back("extremal.csv");
  }
  for (int d = 0; d < 6; ++d) {
    const auto key = keys[static_cast<std::size_t>(d)];
    const auto path = archive_dir / ("traj_" + std::to_string(key) + ".json");
    const json t = read_json(path.string());
    expect_kind(t, "reach-trajectory");
    if (!t.contains("path")) throw DataError("reach trajectory " + path.string() + " lacks a path table");
    const std::string name = std::string("extremal_") + (d % 2 == 0 ? "pos_" : "neg_") + "neu"[d / 2] + ".csv";
    detail::write_states(t.at("path"), out / name);
    files.push_back(name);
  }
  return files;
}

}  // namespace rlv
