#pragma once

// Scenario configuration: JSON with the unit in every field name.

#include <rlv/aero_io.hpp>
#include <rlv/reach.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

namespace rlv {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kConfigVersion = "0.1.0";

struct ScenarioConfig {
  std::string version = kConfigVersion;
  std::string aerodb_path;  // resolved against the config file's directory
  EnvParams env;
  VehicleParams vehicle;
  ProblemSpec problem = reference_problem();
  DiscretizationConfig discretization;
  ScpParams scp;
  ReachParams reach;
  double guess_tau_a_s = 45.0;
  double guess_tau_p_s = 45.0;
  int threads = 1;

  // Initial state of the reference descent.
  static ProblemSpec reference_problem() {
    ProblemSpec p;
    p.bc.x_init << 19516.0, 500.0, 2500.0, 15000.0, 0.0, -150.0, -350.0, -0.98, 0.0, 0.0, 0.0;
    return p;
  }

  void validate() const {
    if (version != kConfigVersion)
      throw ConfigError("config: unsupported version '" + version + "', expected " + kConfigVersion);
    env.validate();
    vehicle.validate();
    discretization.validate();
    scp.validate();
    reach.validate();
    if (!problem.bc.x_init.allFinite()) throw ConfigError("config: non-finite initial state");
    if (!(problem.bc.x_init[kIdxM] > vehicle.m_dry && problem.bc.x_init[kIdxM] <= vehicle.m_wet))
      throw ConfigError("config: initial mass must lie in (m_dry, m_wet]");
    if (!(problem.glideslope > 0.0 && problem.glideslope < kPi / 2))
      throw ConfigError("config: glideslope must lie in (0, 90) deg");
    if (!(0.0 < problem.tau_min_s && problem.tau_min_s < problem.tau_max_s))
      throw ConfigError("config: need 0 < tau_min_s < tau_max_s");
    if (!(guess_tau_a_s > 0.0 && guess_tau_p_s > 0.0))
      throw ConfigError("config: initial guess durations must be positive");
    if (threads < 1) throw ConfigError("config: threads must be >= 1");
  }
};

namespace detail {

using nlohmann::json;

// Reads fields out of one JSON object and rejects keys nobody asked for.
class FieldReader {
 public:
  FieldReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("config: '" + where_ + "' must be an object");
  }

  template <class T> void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for '" + where_ + "." + key + "'");
    }
  }
  void get_scaled(const char* key, double& out, double to_si) {
    double v = out / to_si;
    get(key, v);
    out = v * to_si;
  }
  template <int N> void get_vec(const char* key, Eigen::Matrix<double, N, 1>& out, double to_si = 1.0) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    std::vector<double> v;
    try {
      v = j_.at(key).get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for '" + where_ + "." + key + "'");
    }
    if (static_cast<int>(v.size()) != N)
      throw ConfigError("config: '" + where_ + "." + key + "' needs " + std::to_string(N) + " entries");
    for (int i = 0; i < N; ++i) out[i] = v[static_cast<std::size_t>(i)] * to_si;
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("config: unknown field '" + where_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <int N> std::vector<double> vec_out(const Eigen::Matrix<double, N, 1>& v, double from_si = 1.0) {
  std::vector<double> o;
  for (int i = 0; i < N; ++i) o.push_back(v[i] * from_si);
  return o;
}

inline json scp_to_json(const ScpParams& s) {
  return {{"beta", s.beta},
          {"alpha", s.alpha},
          {"rho0", s.rho0},
          {"rho1", s.rho1},
          {"rho2", s.rho2},
          {"r_init", s.r_init},
          {"w_m", s.w_m},
          {"w_n", s.w_n},
          {"w_l", s.w_l},
          {"max_iters", s.max_iters},
          {"convergence_tol", s.convergence_tol},
          {"ctcs_excess_tol", s.ctcs_excess_tol},
          {"w_min", s.w_min},
          {"w_max", s.w_max},
          {"reject_factor", s.reject_factor},
          {"dilation_prox_per_segment", s.dilation_prox_per_segment},
          {"conic_tol", s.conic.feastol},
          {"conic_max_iters", s.conic.max_iters}};
}

inline void scp_from_json(const json& j, ScpParams& s, const std::string& where) {
  FieldReader r(j, where);
  r.get("beta", s.beta);
  r.get("alpha", s.alpha);
  r.get("rho0", s.rho0);
  r.get("rho1", s.rho1);
  r.get("rho2", s.rho2);
  r.get("r_init", s.r_init);
  r.get("w_m", s.w_m);
  r.get("w_n", s.w_n);
  r.get("w_l", s.w_l);
  r.get("max_iters", s.max_iters);
  r.get("convergence_tol", s.convergence_tol);
  r.get("ctcs_excess_tol", s.ctcs_excess_tol);
  r.get("w_min", s.w_min);
  r.get("w_max", s.w_max);
  r.get("reject_factor", s.reject_factor);
  r.get("dilation_prox_per_segment", s.dilation_prox_per_segment);
  double tol = s.conic.feastol;
  r.get("conic_tol", tol);
  s.conic.feastol = s.conic.abstol = s.conic.reltol = tol;
  r.get("conic_max_iters", s.conic.max_iters);
  r.finish();
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  using detail::vec_out;
  using nlohmann::json;
  const auto& e = c.env;
  const auto& v = c.vehicle;
  const auto& b = c.problem.bc;
  const auto& d = c.discretization;
  json j;
  j["version"] = c.version;
  j["aerodb_path"] = c.aerodb_path;
  j["threads"] = c.threads;
  j["env"] = {{"mu_m3_s2", e.mu},
              {"omega_planet_rad_s", vec_out(e.omega_planet)},
              {"r_center_m", vec_out(e.r_center)},
              {"rho0_kg_m3", e.rho0},
              {"planet_radius_m", e.planet_radius},
              {"altitude_scale", e.altitude_scale}};
  j["vehicle"] = {{"m_dry_kg", v.m_dry},
                  {"m_wet_kg", v.m_wet},
                  {"j_dry_kg_m2", vec_out(v.J_dry)},
                  {"j_wet_kg_m2", vec_out(v.J_wet)},
                  {"isp_s", v.isp},
                  {"g0_m_s2", v.g0},
                  {"u_max_n", v.u_max},
                  {"u_min_n", v.u_min},
                  {"r_engine_m", vec_out(v.r_engine_B)},
                  {"r_fins_m", vec_out(v.r_fins_B)},
                  {"gimbal_max_deg", v.gimbal_max * kRadToDeg},
                  {"omega_max_deg_s", v.omega_max * kRadToDeg},
                  {"c_damp_1_s", v.c_damp}};
  j["constraints"] = {{"glideslope_deg", c.problem.glideslope * kRadToDeg},
                      {"v_small_m_s", v.v_small},
                      {"q_max_pa", v.q_max},
                      {"chi_max_pa_deg", v.chi_max * kRadToDeg},
                      {"alpha_max_deg", v.alpha_max * kRadToDeg},
                      {"tau_min_s", c.problem.tau_min_s},
                      {"tau_max_s", c.problem.tau_max_s}};
  j["boundary"] = {{"m_init_kg", b.x_init[kIdxM]},
                   {"r_init_m", vec_out<3>(b.x_init.segment<3>(kIdxR))},
                   {"v_init_m_s", vec_out<3>(b.x_init.segment<3>(kIdxV))},
                   {"att_init_rad", vec_out<2>(b.x_init.segment<2>(kIdxAtt))},
                   {"omega_init_rad_s", vec_out<2>(b.x_init.segment<2>(kIdxW))},
                   {"r_final_m", vec_out(b.r_final)},
                   {"v_final_m_s", vec_out(b.v_final)},
                   {"att_final_deg", vec_out(b.att_final, kRadToDeg)},
                   {"omega_final_rad_s", vec_out(b.omega_final)}};
  j["discretization"] = {{"nodes", d.N},
                         {"ctcs_scales", std::vector<double>(d.ctcs_scales.begin(), d.ctcs_scales.end())},
                         {"rtol", d.rtol},
                         {"atol", d.atol},
                         {"eps_ctcs", d.eps_ctcs},
                         {"length_scale_m", d.scales.length},
                         {"speed_scale_m_s", d.scales.speed},
                         {"mass_scale_kg", d.scales.mass},
                         {"rate_scale_deg_s", d.scales.rate * kRadToDeg}};
  j["scp"] = detail::scp_to_json(c.scp);
  j["initial_guess"] = {{"tau_a_s", c.guess_tau_a_s}, {"tau_p_s", c.guess_tau_p_s}};
  j["reach"] = {{"iters", c.reach.iters},
                {"seed", c.reach.seed},
                {"feasibility_tol", c.reach.feasibility_tol},
                {"checkpoint_every", c.reach.checkpoint_every},
                {"batch", c.reach.batch},
                {"mu_weight", c.reach.mu_weight},
                {"mu_min_m", c.problem.mu_min_m},
                {"scp", detail::scp_to_json(c.reach.scp)}};
  return j;
}

// base_dir resolves a relative aerodb_path.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::FieldReader;
  ScenarioConfig c;
  FieldReader top(j, "config");
  if (!j.is_object() || !j.contains("version")) throw ConfigError("config: missing 'version'");
  top.get("version", c.version);
  if (c.version != kConfigVersion)
    throw ConfigError("config: unsupported version '" + c.version + "', expected " + kConfigVersion);
  top.get("aerodb_path", c.aerodb_path);
  top.get("threads", c.threads);
  if (const auto* s = top.child("env")) {
    FieldReader r(*s, "env");
    r.get("mu_m3_s2", c.env.mu);
    r.get_vec("omega_planet_rad_s", c.env.omega_planet);
    r.get_vec("r_center_m", c.env.r_center);
    r.get("rho0_kg_m3", c.env.rho0);
    r.get("planet_radius_m", c.env.planet_radius);
    r.get("altitude_scale", c.env.altitude_scale);
    r.finish();
  }
  if (const auto* s = top.child("vehicle")) {
    FieldReader r(*s, "vehicle");
    auto& v = c.vehicle;
    r.get("m_dry_kg", v.m_dry);
    r.get("m_wet_kg", v.m_wet);
    r.get_vec("j_dry_kg_m2", v.J_dry);
    r.get_vec("j_wet_kg_m2", v.J_wet);
    r.get("isp_s", v.isp);
    r.get("g0_m_s2", v.g0);
    r.get("u_max_n", v.u_max);
    r.get("u_min_n", v.u_min);
    r.get_vec("r_engine_m", v.r_engine_B);
    r.get_vec("r_fins_m", v.r_fins_B);
    r.get_scaled("gimbal_max_deg", v.gimbal_max, kDegToRad);
    r.get_scaled("omega_max_deg_s", v.omega_max, kDegToRad);
    r.get("c_damp_1_s", v.c_damp);
    r.finish();
  }
  if (const auto* s = top.child("constraints")) {
    FieldReader r(*s, "constraints");
    r.get_scaled("glideslope_deg", c.problem.glideslope, kDegToRad);
    r.get("v_small_m_s", c.vehicle.v_small);
    r.get("q_max_pa", c.vehicle.q_max);
    r.get_scaled("chi_max_pa_deg", c.vehicle.chi_max, kDegToRad);
    r.get_scaled("alpha_max_deg", c.vehicle.alpha_max, kDegToRad);
    r.get("tau_min_s", c.problem.tau_min_s);
    r.get("tau_max_s", c.problem.tau_max_s);
    r.finish();
  }
  if (const auto* s = top.child("boundary")) {
    FieldReader r(*s, "boundary");
    auto& b = c.problem.bc;
    r.get("m_init_kg", b.x_init[kIdxM]);
    Vec3d rv = b.x_init.segment<3>(kIdxR), vv = b.x_init.segment<3>(kIdxV);
    Vec2d av = b.x_init.segment<2>(kIdxAtt), wv = b.x_init.segment<2>(kIdxW);
    r.get_vec("r_init_m", rv);
    r.get_vec("v_init_m_s", vv);
    r.get_vec("att_init_rad", av);
    r.get_vec("omega_init_rad_s", wv);
    b.x_init.segment<3>(kIdxR) = rv;
    b.x_init.segment<3>(kIdxV) = vv;
    b.x_init.segment<2>(kIdxAtt) = av;
    b.x_init.segment<2>(kIdxW) = wv;
    r.get_vec("r_final_m", b.r_final);
    r.get_vec("v_final_m_s", b.v_final);
    r.get_vec("att_final_deg", b.att_final, kDegToRad);
    r.get_vec("omega_final_rad_s", b.omega_final);
    r.finish();
  }
  if (const auto* s = top.child("discretization")) {
    FieldReader r(*s, "discretization");
    auto& d = c.discretization;
    r.get("nodes", d.N);
    std::vector<double> cs(d.ctcs_scales.begin(), d.ctcs_scales.end());
    r.get("ctcs_scales", cs);
    if (cs.size() != d.ctcs_scales.size())
      throw ConfigError("config: 'discretization.ctcs_scales' needs " + std::to_string(kNc) + " entries");
    std::copy(cs.begin(), cs.end(), d.ctcs_scales.begin());
    r.get("rtol", d.rtol);
    r.get("atol", d.atol);
    r.get("eps_ctcs", d.eps_ctcs);
    r.get("length_scale_m", d.scales.length);
    r.get("speed_scale_m_s", d.scales.speed);
    r.get("mass_scale_kg", d.scales.mass);
    r.get_scaled("rate_scale_deg_s", d.scales.rate, kDegToRad);
    r.finish();
  }
  if (const auto* s = top.child("scp")) detail::scp_from_json(*s, c.scp, "scp");
  if (const auto* s = top.child("initial_guess")) {
    FieldReader r(*s, "initial_guess");
    r.get("tau_a_s", c.guess_tau_a_s);
    r.get("tau_p_s", c.guess_tau_p_s);
    r.finish();
  }
  if (const auto* s = top.child("reach")) {
    FieldReader r(*s, "reach");
    r.get("iters", c.reach.iters);
    r.get("seed", c.reach.seed);
    r.get("feasibility_tol", c.reach.feasibility_tol);
    r.get("checkpoint_every", c.reach.checkpoint_every);
    r.get("batch", c.reach.batch);
    r.get("mu_weight", c.reach.mu_weight);
    r.get("mu_min_m", c.problem.mu_min_m);
    if (const auto* sp = r.child("scp")) detail::scp_from_json(*sp, c.reach.scp, "reach.scp");
    r.finish();
  }
  top.finish();
  if (!c.aerodb_path.empty() && !base_dir.empty() && std::filesystem::path(c.aerodb_path).is_relative())
    c.aerodb_path = (base_dir / c.aerodb_path).lexically_normal().string();
  c.discretization.threads = c.threads;
  c.reach.threads = c.threads;
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  ScenarioConfig c = scenario_from_json(j, std::filesystem::path(path).parent_path());
  if (c.aerodb_path.empty()) throw ConfigError("config: 'aerodb_path' is required");
  if (!std::filesystem::exists(c.aerodb_path))
    throw ConfigError("config: aero database not found: " + c.aerodb_path);
  return c;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Hash of the canonical document, ignoring where the aero file lives and how
// many threads run: neither changes results.
inline std::string config_hash(const ScenarioConfig& c) {
  nlohmann::json j = scenario_to_json(c);
  j.erase("aerodb_path");
  j.erase("threads");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

struct Scenario {
  ScenarioConfig config;
  std::shared_ptr<const Transcription> transcription;
};

inline Scenario build_scenario(const ScenarioConfig& c, std::shared_ptr<const AeroDatabase> db = nullptr) {
  Scenario s;
  s.config = c;
  VehicleModel vm;
  vm.vehicle = c.vehicle;
  vm.env = c.env;
  vm.aero = db ? std::move(db) : std::make_shared<AeroDatabase>(load_aero_database(c.aerodb_path));
  DiscretizationConfig d = c.discretization;
  d.threads = c.threads;
  s.transcription = std::make_shared<Transcription>(vm, d);
  return s;
}

}  // namespace rlv
