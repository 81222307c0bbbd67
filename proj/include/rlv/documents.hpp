#pragma once

// Output documents: trajectory solutions, solve reports, reach results and
// checkpoints. Nondimensional node arrays are stored verbatim so a reloaded
// trajectory is bit-identical; physical copies are for readers.

#include <rlv/config.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace rlv {

using nlohmann::json;

inline json doc_header(const char* kind, const std::string& hash) {
  return {{"kind", kind}, {"tool_version", kToolVersion}, {"config_hash", hash}};
}

inline void write_json(const json& j, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw DataError("parse error in " + path + ": " + e.what());
  }
}

inline void expect_kind(const json& j, const char* kind) {
  if (!j.is_object() || !j.contains("kind") || j.at("kind") != kind)
    throw DataError(std::string("document is not a '") + kind + "' document");
}

template <class V> std::vector<double> to_vec(const V& v) { return {v.data(), v.data() + v.size()}; }

inline json iterate_to_json(const ScpIterate& z) {
  json xs = json::array(), us = json::array();
  for (const auto& x : z.traj.X) xs.push_back(to_vec(x));
  for (const auto& u : z.traj.U) us.push_back(to_vec(u));
  return {{"x_nd", xs}, {"u_nd", us}, {"sigma_a_nd", z.traj.sigma_a}, {"sigma_p_nd", z.traj.sigma_p},
          {"mu_nd", z.mu}};
}

inline ScpIterate iterate_from_json(const json& j) {
  try {
    ScpIterate z;
    for (const auto& r : j.at("x_nd")) {
      auto v = r.get<std::vector<double>>();
      if (v.size() != kNx) throw DataError("trajectory: state row of wrong length");
      z.traj.X.push_back(Eigen::Map<const StateVecd>(v.data()));
    }
    for (const auto& r : j.at("u_nd")) {
      auto v = r.get<std::vector<double>>();
      if (v.size() != kNu) throw DataError("trajectory: control row of wrong length");
      z.traj.U.push_back(Eigen::Map<const ControlVecd>(v.data()));
    }
    if (z.traj.X.size() != z.traj.U.size() || z.traj.X.size() < 3)
      throw DataError("trajectory: node arrays disagree");
    z.traj.sigma_a = j.at("sigma_a_nd").get<double>();
    z.traj.sigma_p = j.at("sigma_p_nd").get<double>();
    z.mu = j.value("mu_nd", 0.0);
    return z;
  } catch (const json::exception& e) {
    throw DataError(std::string("trajectory: malformed document: ") + e.what());
  }
}

// Node-wise physical time histories with the path quantities the
// constraints act on.
inline json path_table(const ScpIterate& z, const Transcription& tr) {
  const Scales& sc = tr.config().scales;
  const VehicleModel& model = tr.model();
  const VehicleParams& p = model.vehicle;
  const DilatedTime d = tr.dilation_seconds(z.traj);
  const int N = tr.N();
  std::vector<double> t, alpha, alpha_eff, q, qa, mach, thrust, gimbal, omega, alt;
  json xs = json::array(), us = json::array(), lo = json::array(), hi = json::array();
  for (int k = 0; k < N; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const StateVecd x = dimensionalize(z.traj.X[kk], sc);
    const ControlVecd u = dimensionalize(z.traj.U[kk], sc);
    const Phase ph = k < tr.config().half_node() ? Phase::Aerodynamic : Phase::Propulsive;
    t.push_back(time_map(static_cast<double>(k) / (N - 1), d));
    xs.push_back(to_vec(x));
    us.push_back(to_vec(u));
    const auto ev = evaluate_dynamics<double>(x, u, ph, model, true);
    const double a = ev.fc.aoa.alpha * kRadToDeg;
    alpha.push_back(a);
    alpha_eff.push_back(std::tanh(ev.fc.speed / p.v_small) * a);
    q.push_back(ev.fc.q);
    qa.push_back(ev.fc.q * a);
    mach.push_back(ev.fc.mach);
    const Vec3d th = u.segment<3>(kIdxThrust);
    const double tn = ph == Phase::Propulsive ? th.norm() : 0.0;
    thrust.push_back(tn);
    gimbal.push_back(tn > 0.0 ? std::atan2(th.head<2>().norm(), th[2]) * kRadToDeg : 0.0);
    omega.push_back(x.segment<2>(kIdxW).norm() * kRadToDeg);
    alt.push_back(geometric_altitude<double>(x.segment<3>(kIdxR), model.env));
    lo.push_back(to_vec(ev.fin_lo));
    hi.push_back(to_vec(ev.fin_hi));
  }
  return {{"t_s", t},
          {"states", xs},
          {"controls", us},
          {"alpha_deg", alpha},
          {"alpha_eff_deg", alpha_eff},
          {"q_pa", q},
          {"q_alpha_pa_deg", qa},
          {"mach", mach},
          {"thrust_n", thrust},
          {"gimbal_deg", gimbal},
          {"omega_deg_s", omega},
          {"altitude_m", alt},
          {"fin_lo", lo},
          {"fin_hi", hi},
          {"half_node", tr.config().half_node()}};
}

inline json limits_json(const VehicleParams& v, const ProblemSpec& p) {
  return {{"alpha_max_deg", v.alpha_max * kRadToDeg},
          {"q_max_pa", v.q_max},
          {"chi_max_pa_deg", v.chi_max * kRadToDeg},
          {"u_min_n", v.u_min},
          {"u_max_n", v.u_max},
          {"gimbal_max_deg", v.gimbal_max * kRadToDeg},
          {"omega_max_deg_s", v.omega_max * kRadToDeg},
          {"glideslope_deg", p.glideslope * kRadToDeg},
          {"m_dry_kg", v.m_dry}};
}

inline json report_to_json(const SolveReport& r, const std::string& hash) {
  json j = doc_header("solve-report", hash);
  j["status"] = to_string(r.status);
  j["iterations"] = r.iterations;
  j["wall_s"] = r.wall_s;
  j["final_violation"] = r.final_violation;
  j["final_cost"] = r.final_cost;
  j["max_slack"] = r.max_slack;
  j["message"] = r.message;
  json rows = json::array();
  for (const auto& w : r.rows)
    rows.push_back({{"iter", w.iter},
                    {"cost", w.cost},
                    {"defect_l1", w.defect_l1},
                    {"terminal_l1", w.terminal_l1},
                    {"ctcs_l1", w.ctcs_l1},
                    {"prox_weight", w.prox_weight},
                    {"rho", w.rho},
                    {"accepted", w.accepted},
                    {"wall_ms", w.wall_ms},
                    {"predicted", w.predicted},
                    {"note", w.note}});
  j["rows"] = rows;
  return j;
}

struct TrajectoryDoc {
  std::string config_hash;
  std::string objective;
  std::string status;
  ScpIterate iterate;
  json raw;
};

inline json trajectory_to_json(const ScpResult& res, const Transcription& tr, const ProblemSpec& spec,
                               const Objective& obj, const std::string& hash) {
  const Scales& sc = tr.config().scales;
  json j = doc_header("trajectory", hash);
  j["objective"] = to_string(obj.kind);
  j["status"] = to_string(res.report.status);
  j["iterations"] = res.report.iterations;
  const DilatedTime d = tr.dilation_seconds(res.best.traj);
  j["tau_a_s"] = d.tau_a;
  j["tau_p_s"] = d.tau_p;
  j["final_mass_kg"] = res.best.traj.X.back()[kIdxM] * sc.mass;
  j["max_violation"] = res.eval.max_violation();
  j["max_ctcs_end"] = res.eval.max_ctcs;
  j["defect_max"] = res.eval.max_defect;
  j["terminal_max"] = res.eval.max_terminal;
  j["limits"] = limits_json(tr.model().vehicle, spec);
  j["path"] = path_table(res.best, tr);
  j["solution"] = iterate_to_json(res.best);
  return j;
}

inline TrajectoryDoc trajectory_from_json(const json& j) {
  expect_kind(j, "trajectory");
  TrajectoryDoc d;
  d.config_hash = j.value("config_hash", "");
  d.objective = j.value("objective", "");
  d.status = j.value("status", "");
  if (!j.contains("solution")) throw DataError("trajectory: missing 'solution'");
  d.iterate = iterate_from_json(j.at("solution"));
  d.raw = j;
  return d;
}

// Public reach result: polytope, history and attempt statistics.
inline json reach_to_json(const ReachState& st, const std::string& hash) {
  json j = doc_header("reach", hash);
  j["seed"] = st.seed;
  j["rng"] = CounterRng::kName;
  j["iterations"] = st.next_attempt;
  j["wall_s"] = st.wall_s;
  j["volume_m3"] = st.hull.volume();
  j["dimension"] = st.hull.dimension();
  json verts = json::array();
  for (const auto& v : st.hull.vertices()) verts.push_back({{"key", v.key}, {"point_m", to_vec(v.p)}});
  j["vertices"] = verts;
  json facets = json::array();
  for (const auto& f : st.hull.facets())
    facets.push_back({{"v", {f.v[0], f.v[1], f.v[2]}}, {"normal", to_vec(f.normal)}, {"area_m2", f.area}});
  j["facets"] = facets;
  j["volume_history_m3"] = st.volume_history;
  j["stats"] = {{"attempts", st.attempts.size()},
                {"accepted", st.count(AttemptStatus::Accepted)},
                {"infeasible", st.count(AttemptStatus::Infeasible)},
                {"not_converged", st.count(AttemptStatus::NotConverged)},
                {"numerical", st.count(AttemptStatus::Numerical)}};
  json att = json::array();
  for (const auto& a : st.attempts)
    att.push_back({{"index", a.index},
                   {"origin_m", to_vec(a.origin)},
                   {"direction", to_vec(a.direction)},
                   {"status", to_string(a.status)},
                   {"reason", a.reason},
                   {"mu_m", a.mu_m},
                   {"key", a.key},
                   {"warm_key", a.warm_key},
                   {"scp_iterations", a.scp_iterations},
                   {"scp_status", a.scp_status},
                   {"violation", a.violation},
                   {"wall_s", a.wall_s}});
  j["attempts"] = att;
  json keys = json::array();
  for (const auto& e : st.archive) keys.push_back({{"key", e.key}, {"attempt", e.attempt}, {"point_m", to_vec(e.point)}});
  j["archive_index"] = keys;
  return j;
}

inline json archive_entry_to_json(const ArchiveEntry& e, const std::string& hash,
                                  const Transcription* tr = nullptr) {
  json j = doc_header("reach-trajectory", hash);
  if (tr) j["path"] = path_table(e.traj, *tr);
  j["key"] = e.key;
  j["attempt"] = e.attempt;
  j["point_m"] = to_vec(e.point);
  j["mu_m"] = e.mu_m;
  j["solution"] = iterate_to_json(e.traj);
  return j;
}

inline Vec3d vec3_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw DataError("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

// Checkpoint: the reach document plus every archived trajectory.
inline json checkpoint_to_json(const ReachState& st, const std::string& hash) {
  json j = reach_to_json(st, hash);
  j["kind"] = "reach-checkpoint";
  json arch = json::array();
  for (const auto& e : st.archive) arch.push_back(archive_entry_to_json(e, hash));
  j["archive"] = arch;
  return j;
}

inline ReachState checkpoint_from_json(const json& j) {
  expect_kind(j, "reach-checkpoint");
  try {
    ReachState st;
    st.seed = j.at("seed").get<std::uint64_t>();
    st.next_attempt = j.at("iterations").get<std::int64_t>();
    st.wall_s = j.at("wall_s").get<double>();
    st.volume_history = j.at("volume_history_m3").get<std::vector<double>>();
    for (const auto& a : j.at("archive")) {
      ArchiveEntry e;
      e.key = a.at("key").get<std::int64_t>();
      e.attempt = a.at("attempt").get<std::int64_t>();
      e.point = vec3_from_json(a.at("point_m"));
      e.mu_m = a.at("mu_m").get<double>();
      e.traj = iterate_from_json(a.at("solution"));
      if (e.key != static_cast<std::int64_t>(st.archive.size())) throw DataError("checkpoint: archive keys out of order");
      st.archive.push_back(std::move(e));
    }
    for (const auto& a : j.at("attempts")) {
      ExpansionAttempt x;
      x.index = a.at("index").get<std::int64_t>();
      x.origin = vec3_from_json(a.at("origin_m"));
      x.direction = vec3_from_json(a.at("direction"));
      x.status = attempt_status_from_string(a.at("status").get<std::string>());
      x.reason = a.at("reason").get<std::string>();
      x.mu_m = a.at("mu_m").get<double>();
      x.key = a.at("key").get<std::int64_t>();
      x.warm_key = a.at("warm_key").get<std::int64_t>();
      x.scp_iterations = a.at("scp_iterations").get<int>();
      x.scp_status = a.at("scp_status").get<std::string>();
      x.violation = a.at("violation").get<double>();
      x.wall_s = a.at("wall_s").get<double>();
      st.attempts.push_back(std::move(x));
    }
    if (st.archive.empty()) throw DataError("checkpoint: empty archive");
    if (st.volume_history.size() != st.attempts.size() + 1)
      throw DataError("checkpoint: volume history length does not match attempts");
    st.hull = replay_hull(st);
    return st;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed document: ") + e.what());
  }
}

}  // namespace rlv
