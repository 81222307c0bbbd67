#pragma once

// Multiple-shooting transcription: dual time dilation, first-order-hold
// controls, per-constraint CTCS states and forward sensitivities.

#include <rlv/dynamics.hpp>
#include <rlv/ode.hpp>
#include <rlv/parallel.hpp>

#include <vector>

namespace rlv {

inline constexpr int kNc = 6;           // CTCS states
inline constexpr int kNy = kNx + kNc;   // augmented state
inline constexpr int kNz = kNx + 2 * kNu + 1;  // segment parameters (x0, u_k, u_k+1, sigma)

enum CtcsIndex { kCtcsAlpha = 0, kCtcsThrust, kCtcsFin, kCtcsOmega, kCtcsQ, kCtcsQAlpha };

struct Scales {
  double length = 15.0e3;  // m
  double speed = 380.0;    // m/s
  double mass = 19516.0;   // kg
  double rate = 15.0 * kDegToRad;  // rad/s, angular rate reference

  double time() const { return length / speed; }
  double force() const { return mass * speed / time(); }
  void validate() const {
    if (!(length > 0.0) || !(speed > 0.0) || !(mass > 0.0) || !(rate > 0.0) ||
        !std::isfinite(rate) || !std::isfinite(length) ||
        !std::isfinite(speed) || !std::isfinite(mass))
      throw ConfigError("scales: length, speed, mass and rate must be positive and finite");
  }
  StateVecd state_scale() const {
    StateVecd d;
    d << mass, length, length, length, speed, speed, speed, 1.0, 1.0, rate, rate;
    return d;
  }
  ControlVecd control_scale() const {
    ControlVecd d;
    d << force(), force(), force(), 1.0, 1.0;
    return d;
  }
};

inline StateVecd nondimensionalize(const StateVecd& x, const Scales& s) {
  s.validate();
  return x.cwiseQuotient(s.state_scale());
}
inline StateVecd dimensionalize(const StateVecd& x, const Scales& s) {
  s.validate();
  return x.cwiseProduct(s.state_scale());
}
inline ControlVecd nondimensionalize(const ControlVecd& u, const Scales& s) {
  s.validate();
  return u.cwiseQuotient(s.control_scale());
}
inline ControlVecd dimensionalize(const ControlVecd& u, const Scales& s) {
  s.validate();
  return u.cwiseProduct(s.control_scale());
}

struct DiscretizationConfig {
  int N = 41;
  std::array<double, kNc> ctcs_scales{1.0, 20.0, 10.0, 0.1, 5e-4, 1e-6};
  // Defect noise scales with rtol and is multiplied by w_m in the merit
  // function; looser values stall SCP short of the CTCS exactness test.
  double rtol = 1e-12;
  double atol = 1e-14;
  double eps_ctcs = 1e-6;
  Scales scales;
  int threads = 1;

  void validate() const {
    if (N < 3 || N % 2 == 0) throw ConfigError("discretization: N must be odd and >= 3");
    for (double s : ctcs_scales)
      if (!(s > 0.0)) throw ConfigError("discretization: CTCS scales must be positive");
    if (!(rtol > 0.0 && atol > 0.0)) throw ConfigError("discretization: tolerances must be positive");
    if (!(eps_ctcs >= 0.0)) throw ConfigError("discretization: eps_ctcs must be non-negative");
    scales.validate();
  }
  int half_node() const { return (N - 1) / 2; }
  double dtau() const { return 1.0 / (N - 1); }
  Phase segment_phase(int k) const {
    return k < half_node() ? Phase::Aerodynamic : Phase::Propulsive;
  }
};

struct DilatedTime {
  double tau_a = 0;  // s
  double tau_p = 0;  // s
};

inline double time_map(double tau, const DilatedTime& d) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("time_map: tau outside [0, 1]");
  if (tau < 0.5) return d.tau_a * tau;
  return d.tau_p * (tau - 0.5) + 0.5 * d.tau_a;
}

// First-order hold on a uniform tau grid; thrust is held at zero for tau < 1/2.
inline ControlVecd foh_control(double tau, const std::vector<ControlVecd>& nodes) {
  const int n = static_cast<int>(nodes.size());
  if (n < 2) throw InvalidInput("foh_control: need at least two nodes");
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("foh_control: tau outside [0, 1]");
  const double s = tau * (n - 1);
  const double kr = std::round(s);
  ControlVecd u;
  if (std::abs(s - kr) <= 1e-12 * (n - 1)) {
    u = nodes[static_cast<std::size_t>(kr)];
  } else {
    const int k = std::min(static_cast<int>(std::floor(s)), n - 2);
    const double lam = s - k;
    u = (1.0 - lam) * nodes[static_cast<std::size_t>(k)] + lam * nodes[static_cast<std::size_t>(k + 1)];
  }
  if (tau < 0.5) u.segment<3>(kIdxThrust).setZero();
  return u;
}

template <class T> using CtcsVec = Eigen::Matrix<T, kNc, 1>;

// CTCS integrands S_j * max(0, g_j)^2 for a dynamics evaluation (physical
// units inside g; see README for the per-constraint units).
template <class T>
CtcsVec<T> augment_ctcs(const DynamicsEval<T>& ev, const StateVec<T>& x, const ControlVec<T>& u,
                        Phase phase, const VehicleParams& p,
                        const std::array<double, kNc>& scales) {
  using std::tanh;
  CtcsVec<T> y;
  auto sq = [](const T& g) { return T(max0(g) * max0(g)); };
  const T a_deg = ev.fc.aoa.alpha * kRadToDeg;
  const T g_alpha = tanh(ev.fc.speed / p.v_small) * a_deg - p.alpha_max * kRadToDeg;
  y[kCtcsAlpha] = scales[kCtcsAlpha] * sq(g_alpha);

  if (phase == Phase::Propulsive) {
    const Vec3<T> thr = u.template segment<3>(kIdxThrust);
    y[kCtcsThrust] = scales[kCtcsThrust] * sq(T((p.u_min - safe_norm(thr)) / p.u_max));
  } else {
    y[kCtcsThrust] = constant_like(ev.fc.speed, 0.0);
  }

  T fin = constant_like(ev.fc.speed, 0.0);
  for (int i = 0; i < 2; ++i) {
    fin += sq(T(u[kIdxFin + i] - ev.fin_hi[i])) + sq(T(ev.fin_lo[i] - u[kIdxFin + i]));
  }
  y[kCtcsFin] = scales[kCtcsFin] * fin;

  const Vec2<T> w = x.template segment<2>(kIdxW);
  y[kCtcsOmega] = scales[kCtcsOmega] * sq(T((safe_norm(w) - p.omega_max) * kRadToDeg));
  y[kCtcsQ] = scales[kCtcsQ] * sq(T(ev.fc.q - p.q_max));
  y[kCtcsQAlpha] = scales[kCtcsQAlpha] * sq(T(ev.fc.q * a_deg - p.chi_max * kRadToDeg));
  return y;
}

using AugVec = Eigen::Matrix<double, kNy, 1>;

struct ShootingSegmentResult {
  AugVec y_end;                                    // [x(11); ctcs(6)], nondimensional
  Eigen::Matrix<double, kNy, kNx> d_x0;
  Eigen::Matrix<double, kNy, kNu> d_u0;
  Eigen::Matrix<double, kNy, kNu> d_u1;
  Eigen::Matrix<double, kNy, 1> d_sigma;
  OdeStats stats;
};

// Nondimensional trajectory on the node grid.
struct NodeTrajectory {
  std::vector<StateVecd> X;
  std::vector<ControlVecd> U;
  double sigma_a = 0;  // nondimensional dilations
  double sigma_p = 0;
};

class Transcription {
 public:
  Transcription(VehicleModel model, DiscretizationConfig cfg)
      : model_(std::move(model)), cfg_(std::move(cfg)) {
    cfg_.validate();
    model_.vehicle.validate();
    model_.env.validate();
    if (model_.aero_enabled && !model_.aero) throw ConfigError("transcription: aero database missing");
    xs_ = cfg_.scales.state_scale();
    us_ = cfg_.scales.control_scale();
    tscale_ = cfg_.scales.time();
  }

  const VehicleModel& model() const { return model_; }
  const DiscretizationConfig& config() const { return cfg_; }
  int N() const { return cfg_.N; }

  // Nondimensional augmented derivative d/dt~ of [x; ctcs].
  template <class T>
  Eigen::Matrix<T, kNy, 1> rhs(const StateVec<T>& xn, const ControlVec<T>& un, Phase phase) const {
    StateVec<T> x = xn.cwiseProduct(xs_.template cast<T>());
    ControlVec<T> u = un.cwiseProduct(us_.template cast<T>());
    if (phase == Phase::Aerodynamic) u.template segment<3>(kIdxThrust) *= 0.0;
    auto ev = evaluate_dynamics<T>(x, u, phase, model_, true);
    Eigen::Matrix<T, kNy, 1> out;
    out.template head<kNx>() = (ev.xdot * tscale_).cwiseQuotient(xs_.template cast<T>());
    out.template tail<kNc>() = augment_ctcs<T>(ev, x, u, phase, model_.vehicle, cfg_.ctcs_scales);
    return out;
  }

  // Values and Jacobians of rhs with respect to (x, u).
  void rhs_jacobian(const StateVecd& xn, const ControlVecd& un, Phase phase,
                    Eigen::Matrix<double, kNy, 1>& f, Eigen::Matrix<double, kNy, kNx>& A,
                    Eigen::Matrix<double, kNy, kNu>& B) const {
    using Deriv = Eigen::Matrix<double, kNx + kNu, 1>;
    using AD = Eigen::AutoDiffScalar<Deriv>;
    StateVec<AD> xa;
    ControlVec<AD> ua;
    for (int i = 0; i < kNx; ++i) xa[i] = AD(xn[i], kNx + kNu, i);
    for (int i = 0; i < kNu; ++i) ua[i] = AD(un[i], kNx + kNu, kNx + i);
    auto r = rhs<AD>(xa, ua, phase);
    for (int i = 0; i < kNy; ++i) {
      f[i] = r[i].value();
      const Deriv& d = r[i].derivatives();
      if (d.size() == 0) {
        A.row(i).setZero();
        B.row(i).setZero();
      } else {
        A.row(i) = d.template head<kNx>().transpose();
        B.row(i) = d.template tail<kNu>().transpose();
      }
    }
  }

  // Integrates segment k from node state xk under FOH controls uk -> uk1 with
  // nondimensional dilation sigma. CTCS states start at zero.
  ShootingSegmentResult propagate_segment(int k, const StateVecd& xk, const ControlVecd& uk,
                                          const ControlVecd& uk1, double sigma,
                                          bool sensitivities = true) const {
    const Phase phase = cfg_.segment_phase(k);
    const double dtau = cfg_.dtau();
    OdeOptions opt;
    opt.rtol = cfg_.rtol;
    opt.atol = cfg_.atol;
    opt.h_init = dtau / 4;
    // Step control sees only the augmented state, so the value path is
    // identical with or without sensitivities.
    opt.error_dim = kNy;
    ShootingSegmentResult res;
    try {
      if (!sensitivities) {
        Eigen::VectorXd y(kNy);
        y.head<kNx>() = xk;
        y.tail<kNc>().setZero();
        auto f = [&](double s, const Eigen::VectorXd& yy, Eigen::VectorXd& dy) {
          const double lam = s / dtau;
          const ControlVecd u = (1.0 - lam) * uk + lam * uk1;
          const StateVecd x = yy.head<kNx>();
          dy = sigma * rhs<double>(x, u, phase);
        };
        res.stats = dopri5(f, 0.0, dtau, y, opt, k);
        res.y_end = y;
        return res;
      }
      constexpr int nS = kNy * kNz;
      Eigen::VectorXd y(kNy + nS);
      y.setZero();
      y.head<kNx>() = xk;
      Eigen::Map<Eigen::Matrix<double, kNy, kNz>> S0(y.data() + kNy);
      S0.block<kNx, kNx>(0, 0).setIdentity();
      auto f = [&](double s, const Eigen::VectorXd& yy, Eigen::VectorXd& dy) {
        const double lam = s / dtau;
        const ControlVecd u = (1.0 - lam) * uk + lam * uk1;
        const StateVecd x = yy.head<kNx>();
        Eigen::Matrix<double, kNy, 1> fv;
        Eigen::Matrix<double, kNy, kNx> A;
        Eigen::Matrix<double, kNy, kNu> B;
        rhs_jacobian(x, u, phase, fv, A, B);
        dy.resize(kNy + nS);
        dy.head<kNy>() = sigma * fv;
        Eigen::Map<const Eigen::Matrix<double, kNy, kNz>> S(yy.data() + kNy);
        Eigen::Map<Eigen::Matrix<double, kNy, kNz>> dS(dy.data() + kNy);
        dS.noalias() = sigma * (A * S.topRows<kNx>());
        dS.block<kNy, kNu>(0, kNx) += (sigma * (1.0 - lam)) * B;
        dS.block<kNy, kNu>(0, kNx + kNu) += (sigma * lam) * B;
        dS.col(kNz - 1) += fv;
      };
      res.stats = dopri5(f, 0.0, dtau, y, opt, k);
      res.y_end = y.head<kNy>();
      Eigen::Map<const Eigen::Matrix<double, kNy, kNz>> S(y.data() + kNy);
      res.d_x0 = S.block<kNy, kNx>(0, 0);
      res.d_u0 = S.block<kNy, kNu>(0, kNx);
      res.d_u1 = S.block<kNy, kNu>(0, kNx + kNu);
      res.d_sigma = S.col(kNz - 1);
      return res;
    } catch (const PropagationError&) {
      throw;
    } catch (const Error& e) {
      throw PropagationError(std::string("segment propagation failed: ") + e.what(), k);
    }
  }

  double segment_sigma(int k, const NodeTrajectory& traj) const {
    return cfg_.segment_phase(k) == Phase::Aerodynamic ? traj.sigma_a : traj.sigma_p;
  }

  // All N-1 segments, in node order. Runs across cfg.threads workers.
  std::vector<ShootingSegmentResult> propagate_all(const NodeTrajectory& traj,
                                                   bool sensitivities) const {
    const int ns = cfg_.N - 1;
    std::vector<ShootingSegmentResult> out(static_cast<std::size_t>(ns));
    parallel_for(ns, cfg_.threads, [&](int k) {
      const auto kk = static_cast<std::size_t>(k);
      out[kk] = propagate_segment(k, traj.X[kk], traj.U[kk], traj.U[kk + 1],
                                  segment_sigma(k, traj), sensitivities);
    });
    return out;
  }

  // Single continuous propagation through all segments from X[0] (used for
  // initial guesses and feasibility checks). Returns node states.
  std::vector<StateVecd> propagate_continuous(const NodeTrajectory& traj) const {
    std::vector<StateVecd> xs{traj.X.front()};
    for (int k = 0; k < cfg_.N - 1; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      auto r = propagate_segment(k, xs.back(), traj.U[kk], traj.U[kk + 1], segment_sigma(k, traj),
                                 false);
      xs.push_back(r.y_end.head<kNx>());
    }
    return xs;
  }

  DilatedTime dilation_seconds(const NodeTrajectory& t) const {
    return {t.sigma_a * tscale_, t.sigma_p * tscale_};
  }

 private:
  VehicleModel model_;
  DiscretizationConfig cfg_;
  StateVecd xs_;
  ControlVecd us_;
  double tscale_;
};

}  // namespace rlv
