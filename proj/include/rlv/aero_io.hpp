#pragma once

// Sweep CSV ingestion and the JSON aero database format.
//
// Sweep rows carry wind-frame force and moment components divided by
// rho_r*|v|^2/2 (kg/m and kg). Wind axes: X_w and Y_w span the plane normal to
// the velocity, +Z_w points along -v, so drag is +fz. Body lift lies along -X_w
// for a pure alpha1 tilt, so C_l = -fx and C_m = -my on alpha2 = 0 rows.

#include <rlv/aerotables.hpp>

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace rlv {

inline constexpr const char* kSweepHeader =
    "mach,alpha1_deg,alpha2_deg,fin1_cmd,fin2_cmd,fx,fy,fz,mx,my,mz";
inline constexpr int kAeroDbVersion = 1;

struct SweepRow {
  double mach = 0, alpha1 = 0, alpha2 = 0, cmd1 = 0, cmd2 = 0;
  double fx = 0, fy = 0, fz = 0, mx = 0, my = 0, mz = 0;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::vector<std::string> rejected;  // "line N: reason"
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace detail

inline std::vector<SweepRow> parse_sweep_csv(std::istream& in, IngestReport& report) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("sweep CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSweepHeader)
    throw DataError("sweep CSV: header mismatch, expected '" + std::string(kSweepHeader) + "'");

  std::vector<SweepRow> rows;
  std::set<std::array<double, 5>> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 11> f{};
    std::size_t field = 0, start = 0;
    bool ok = true;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string_view tok(line.data() + start,
                                 (comma == std::string::npos ? line.size() : comma) - start);
      if (field >= f.size() || !detail::parse_double(tok, f[field]) || !std::isfinite(f[field])) {
        ok = false;
        break;
      }
      ++field;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    std::string reason;
    if (!ok || field != f.size()) {
      reason = "expected 11 finite numeric fields";
    } else if (f[0] < 0.0) {
      reason = "negative mach";
    } else if (std::abs(f[3]) > 1.5 || std::abs(f[4]) > 1.5) {
      reason = "fin command outside [-1.5, 1.5]";
    }
    if (!reason.empty()) {
      report.rejected.push_back("line " + std::to_string(lineno) + ": " + reason);
      continue;
    }
    const std::array<double, 5> key{f[0], f[1], f[2], f[3], f[4]};
    if (!seen.insert(key).second) {
      std::ostringstream os;
      os << "sweep CSV: duplicate grid point at line " << lineno << " (mach " << f[0]
         << ", alpha1 " << f[1] << ", alpha2 " << f[2] << ", cmd " << f[3] << "/" << f[4] << ")";
      throw DataError(os.str());
    }
    rows.push_back({f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8], f[9], f[10]});
    report.accepted++;
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << r.mach << ',' << r.alpha1 << ',' << r.alpha2 << ',' << r.cmd1 << ',' << r.cmd2 << ','
        << r.fx << ',' << r.fy << ',' << r.fz << ',' << r.mx << ',' << r.my << ',' << r.mz << '\n';
  }
}

namespace detail {

using Key3 = std::array<double, 3>;

inline std::vector<double> sorted_unique(std::set<double> s) { return {s.begin(), s.end()}; }

inline std::size_t index_of(const std::vector<double>& v, double x) {
  return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
}

// Adds an alpha = 0 slice on one Grid3 axis (1 or 2) by averaging the nearest
// slices on either side, when the axis straddles zero without containing it.
inline void insert_zero_slice(Grid3& g, int axis) {
  std::vector<double>& ax = axis == 1 ? g.alpha1 : g.alpha2;
  if (std::find(ax.begin(), ax.end(), 0.0) != ax.end()) return;
  if (!(ax.front() < 0.0 && ax.back() > 0.0)) return;
  const std::size_t ip = index_of(ax, 0.0);  // first positive
  const std::size_t in = ip - 1;
  Grid3 out = g;
  std::vector<double>& oax = axis == 1 ? out.alpha1 : out.alpha2;
  oax.insert(oax.begin() + static_cast<std::ptrdiff_t>(ip), 0.0);
  out.values.assign(out.mach.size() * out.alpha1.size() * out.alpha2.size(), 0.0);
  for (std::size_t im = 0; im < out.mach.size(); ++im)
    for (std::size_t i1 = 0; i1 < out.alpha1.size(); ++i1)
      for (std::size_t i2 = 0; i2 < out.alpha2.size(); ++i2) {
        const std::size_t k = axis == 1 ? i1 : i2;
        auto src = [&](std::size_t kk) {
          return axis == 1 ? g.at(im, kk, i2) : g.at(im, i1, kk);
        };
        double v;
        if (k < ip) {
          v = src(k);
        } else if (k == ip) {
          v = 0.5 * (src(in) + src(ip));
        } else {
          v = src(k - 1);
        }
        out.values[out.index(im, i1, i2)] = v;
      }
  g = std::move(out);
}

}  // namespace detail

inline AeroDatabase build_database(const std::vector<SweepRow>& rows) {
  AeroDatabase db;
  std::map<detail::Key3, const SweepRow*> base;
  for (const auto& r : rows)
    if (r.cmd1 == 0.0 && r.cmd2 == 0.0) base[{r.mach, r.alpha1, r.alpha2}] = &r;

  // Body tables from baseline rows in the alpha1 >= 0, alpha2 = 0 half plane.
  {
    std::set<double> as, ms;
    for (const auto& [k, r] : base)
      if (k[2] == 0.0 && k[1] >= 0.0) {
        ms.insert(k[0]);
        as.insert(k[1]);
      }
    if (as.empty()) throw DataError("sweep: no baseline rows with alpha2 = 0 for body tables");
    Grid2 cl, cd, cm;
    cl.alpha = cd.alpha = cm.alpha = detail::sorted_unique(as);
    cl.mach = cd.mach = cm.mach = detail::sorted_unique(ms);
    const auto na = static_cast<Eigen::Index>(cl.alpha.size());
    const auto nm = static_cast<Eigen::Index>(cl.mach.size());
    cl.values.resize(na, nm);
    cd.values.resize(na, nm);
    cm.values.resize(na, nm);
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index j = 0; j < nm; ++j) {
        auto it = base.find({cl.mach[static_cast<std::size_t>(j)],
                             cl.alpha[static_cast<std::size_t>(i)], 0.0});
        if (it == base.end()) {
          std::ostringstream os;
          os << "sweep: incomplete body grid, missing alpha " << cl.alpha[static_cast<std::size_t>(i)]
             << " at mach " << cl.mach[static_cast<std::size_t>(j)];
          throw DataError(os.str());
        }
        cl.values(i, j) = -it->second->fx;
        cd.values(i, j) = it->second->fz;
        cm.values(i, j) = -it->second->my;
      }
    db.cd_body = cd;
    db.cl_mod = build_modified_table(cl);
    db.cm_mod = build_modified_table(cm);
  }

  // Fin tables from single-fin sweeps, as increments over the baseline.
  std::vector<PolarSample> polar;
  for (int fin = 0; fin < 2; ++fin) {
    std::map<detail::Key3, std::vector<double>> incr;
    for (const auto& r : rows) {
      const double c_this = fin == 0 ? r.cmd1 : r.cmd2;
      const double c_other = fin == 0 ? r.cmd2 : r.cmd1;
      if (c_this == 0.0 || c_other != 0.0) continue;
      auto b = base.find({r.mach, r.alpha1, r.alpha2});
      if (b == base.end()) {
        std::ostringstream os;
        os << "sweep: missing baseline row for mach " << r.mach << ", alpha1 " << r.alpha1
           << ", alpha2 " << r.alpha2;
        throw DataError(os.str());
      }
      incr[{r.mach, r.alpha1, r.alpha2}].push_back(fin == 0 ? r.fx - b->second->fx
                                                            : r.fy - b->second->fy);
    }
    if (incr.empty()) throw DataError("sweep: no single-fin rows for fin " + std::to_string(fin + 1));
    std::set<double> ms, a1, a2;
    for (const auto& [k, v] : incr) {
      ms.insert(k[0]);
      a1.insert(k[1]);
      a2.insert(k[2]);
    }
    Grid3 scale;
    scale.mach = detail::sorted_unique(ms);
    scale.alpha1 = detail::sorted_unique(a1);
    scale.alpha2 = detail::sorted_unique(a2);
    scale.values.assign(scale.mach.size() * scale.alpha1.size() * scale.alpha2.size(), 0.0);
    Grid3 lo = scale, hi = scale;
    for (std::size_t im = 0; im < scale.mach.size(); ++im)
      for (std::size_t i1 = 0; i1 < scale.alpha1.size(); ++i1)
        for (std::size_t i2 = 0; i2 < scale.alpha2.size(); ++i2) {
          auto it = incr.find({scale.mach[im], scale.alpha1[i1], scale.alpha2[i2]});
          std::ostringstream where;
          where << " for fin " << fin + 1 << " at mach " << scale.mach[im] << ", alpha1 "
                << scale.alpha1[i1] << ", alpha2 " << scale.alpha2[i2];
          if (it == incr.end()) throw DataError("sweep: incomplete fin grid" + where.str());
          const auto [mn, mx] = std::minmax_element(it->second.begin(), it->second.end());
          if (!(*mx > 0.0) || !(*mn < 0.0))
            throw DataError("sweep: fin increments must span both signs" + where.str());
          const double s = 0.5 * (*mx - *mn);
          const std::size_t k = scale.index(im, i1, i2);
          scale.values[k] = s;
          hi.values[k] = *mx / s;
          lo.values[k] = *mn / s;
        }
    for (Grid3* g : {&scale, &lo, &hi}) {
      detail::insert_zero_slice(*g, 1);
      detail::insert_zero_slice(*g, 2);
    }
    db.fin_lift_scale[fin] = std::move(scale);
    db.fin_bound_lo[fin] = std::move(lo);
    db.fin_bound_hi[fin] = std::move(hi);
  }

  for (const auto& r : rows) {
    if (r.cmd1 == 0.0 && r.cmd2 == 0.0) continue;
    auto b = base.find({r.mach, r.alpha1, r.alpha2});
    if (b == base.end()) continue;  // already reported above for single-fin rows
    polar.push_back({r.mach, r.alpha1, r.alpha2, r.fx - b->second->fx, r.fy - b->second->fy,
                     r.fz - b->second->fz});
  }
  auto fit = fit_drag_polar(polar);
  db.polar_lin = fit.lin;
  db.polar_cst = fit.cst;
  db.reference_area_note =
      "force tables: rho0*A*C (kg/m); moment table: rho0*A*l*C (kg); fin lift scale: "
      "rho0*A_fin*C (kg/m) per unit command; polar coefficients act on force/q (m/kg); "
      "multiply by rho_r*|v|^2/2";
  db.validate();
  return db;
}

struct IngestResult {
  AeroDatabase db;
  IngestReport report;
};

inline IngestResult ingest_sweeps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sweep file: " + path);
  IngestResult res;
  auto rows = parse_sweep_csv(in, res.report);
  res.db = build_database(rows);
  return res;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using nlohmann::json;

inline json grid_to_json(const Grid1& g) { return {{"mach", g.mach}, {"values", g.values}}; }

inline json grid_to_json(const Grid2& g) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(g.values.size()));
  for (Eigen::Index i = 0; i < g.values.rows(); ++i)
    for (Eigen::Index j = 0; j < g.values.cols(); ++j) v.push_back(g.values(i, j));
  return {{"alpha_deg", g.alpha}, {"mach", g.mach}, {"values", v}};
}

inline json grid_to_json(const Grid3& g) {
  return {{"mach", g.mach}, {"alpha1_deg", g.alpha1}, {"alpha2_deg", g.alpha2}, {"values", g.values}};
}

inline Grid1 grid1_from_json(const json& j) {
  Grid1 g;
  g.mach = j.at("mach").get<std::vector<double>>();
  g.values = j.at("values").get<std::vector<double>>();
  return g;
}

inline Grid2 grid2_from_json(const json& j) {
  Grid2 g;
  g.alpha = j.at("alpha_deg").get<std::vector<double>>();
  g.mach = j.at("mach").get<std::vector<double>>();
  auto v = j.at("values").get<std::vector<double>>();
  if (v.size() != g.alpha.size() * g.mach.size()) throw DataError("aerodb: grid2 value count mismatch");
  g.values.resize(static_cast<Eigen::Index>(g.alpha.size()), static_cast<Eigen::Index>(g.mach.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < g.values.rows(); ++i)
    for (Eigen::Index jj = 0; jj < g.values.cols(); ++jj) g.values(i, jj) = v[k++];
  return g;
}

inline Grid3 grid3_from_json(const json& j) {
  Grid3 g;
  g.mach = j.at("mach").get<std::vector<double>>();
  g.alpha1 = j.at("alpha1_deg").get<std::vector<double>>();
  g.alpha2 = j.at("alpha2_deg").get<std::vector<double>>();
  g.values = j.at("values").get<std::vector<double>>();
  return g;
}

}  // namespace detail

inline nlohmann::json aero_to_json(const AeroDatabase& db) {
  using detail::grid_to_json;
  nlohmann::json j;
  j["aerodb_version"] = kAeroDbVersion;
  j["reference_area_note"] = db.reference_area_note;
  j["cd_body"] = grid_to_json(db.cd_body);
  j["cl_mod"] = grid_to_json(db.cl_mod);
  j["cm_mod"] = grid_to_json(db.cm_mod);
  for (int i = 0; i < 2; ++i) {
    j["fin_lift_scale"].push_back(grid_to_json(db.fin_lift_scale[i]));
    j["fin_bound_lo"].push_back(grid_to_json(db.fin_bound_lo[i]));
    j["fin_bound_hi"].push_back(grid_to_json(db.fin_bound_hi[i]));
  }
  j["polar_lin"] = grid_to_json(db.polar_lin);
  j["polar_cst"] = grid_to_json(db.polar_cst);
  return j;
}

inline AeroDatabase aero_from_json(const nlohmann::json& j) {
  try {
    if (j.at("aerodb_version").get<int>() != kAeroDbVersion)
      throw DataError("aerodb: unsupported aerodb_version");
    AeroDatabase db;
    db.reference_area_note = j.value("reference_area_note", "");
    db.cd_body = detail::grid2_from_json(j.at("cd_body"));
    db.cl_mod = detail::grid2_from_json(j.at("cl_mod"));
    db.cm_mod = detail::grid2_from_json(j.at("cm_mod"));
    for (int i = 0; i < 2; ++i) {
      db.fin_lift_scale[i] = detail::grid3_from_json(j.at("fin_lift_scale").at(i));
      db.fin_bound_lo[i] = detail::grid3_from_json(j.at("fin_bound_lo").at(i));
      db.fin_bound_hi[i] = detail::grid3_from_json(j.at("fin_bound_hi").at(i));
    }
    db.polar_lin = detail::grid1_from_json(j.at("polar_lin"));
    db.polar_cst = detail::grid1_from_json(j.at("polar_cst"));
    db.validate();
    return db;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("aerodb: malformed document: ") + e.what());
  }
}

inline void save_aero_database(const AeroDatabase& db, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write aero database: " + path);
  out << aero_to_json(db).dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline AeroDatabase load_aero_database(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open aero database: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("aerodb: parse error in " + path + ": " + e.what());
  }
  return aero_from_json(j);
}

}  // namespace rlv
