#pragma once

// Prox-linear successive convex programming with exact L1 penalties.

#include <rlv/conic.hpp>
#include <rlv/transcription.hpp>

#include <chrono>
#include <functional>
#include <memory>
#include <optional>

namespace rlv {

struct ScpParams {
  double beta = 2.0;    // weight increase on poor agreement
  double alpha = 2.0;   // weight decrease on good agreement
  double rho0 = 0.0;
  double rho1 = 0.25;
  double rho2 = 0.7;
  double r_init = 8.0;  // initial prox weight
  double w_m = 1000.0;  // dynamics defects
  double w_n = 50.0;    // terminal conditions
  double w_l = 100.0;   // CTCS excess and nodal fin bounds
  int max_iters = 150;
  double convergence_tol = 1e-5;
  // CTCS end values must sit this close to epsilon before convergence is declared.
  double ctcs_excess_tol = 1e-8;
  double w_min = 1e-3;
  double w_max = 1e8;
  double reject_factor = 2.0;  // weight increase after a rejected step
  // Each phase dilation drives every segment of its phase, so its prox term
  // counts once per segment when set.
  bool dilation_prox_per_segment = true;
  ConicSettings conic;

  void validate() const {
    if (!(0.0 <= rho0 && rho0 < rho1 && rho1 < rho2 && rho2 < 1.0))
      throw ConfigError("scp: need 0 <= rho0 < rho1 < rho2 < 1");
    if (!(alpha > 1.0 && beta > 1.0 && reject_factor > 1.0))
      throw ConfigError("scp: alpha, beta and reject_factor must exceed 1");
    if (!(w_m > 0.0 && w_n > 0.0 && w_l > 0.0 && r_init > 0.0))
      throw ConfigError("scp: weights must be positive");
    if (!(w_min > 0.0 && w_min <= r_init && r_init <= w_max))
      throw ConfigError("scp: need w_min <= r_init <= w_max");
    if (max_iters < 0 || !(convergence_tol > 0.0) || !(ctcs_excess_tol > 0.0)) throw ConfigError("scp: bad iteration limits");
  }
};

enum class TrustDecision { RejectTighten, AcceptTighten, AcceptHold, AcceptRelax };

inline const char* to_string(TrustDecision d) {
  switch (d) {
    case TrustDecision::RejectTighten: return "reject+tighten";
    case TrustDecision::AcceptTighten: return "accept+tighten";
    case TrustDecision::AcceptHold: return "accept+hold";
    case TrustDecision::AcceptRelax: return "accept+relax";
  }
  return "?";
}

inline TrustDecision trust_decision(double rho, const ScpParams& p) {
  if (!(rho >= p.rho0)) return TrustDecision::RejectTighten;  // also catches NaN
  if (rho < p.rho1) return TrustDecision::AcceptTighten;
  if (rho < p.rho2) return TrustDecision::AcceptHold;
  return TrustDecision::AcceptRelax;
}

inline bool accepts(TrustDecision d) { return d != TrustDecision::RejectTighten; }

// Prox weight after a decision; a larger weight means a tighter region.
inline double update_weight(double w, TrustDecision d, const ScpParams& p) {
  switch (d) {
    case TrustDecision::RejectTighten: w *= p.reject_factor; break;
    case TrustDecision::AcceptTighten: w *= p.beta; break;
    case TrustDecision::AcceptHold: break;
    case TrustDecision::AcceptRelax: w /= p.alpha; break;
  }
  return std::clamp(w, p.w_min, p.w_max);
}

enum class ObjectiveKind { MinFuel, MinTime, DefectHull };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::MinFuel;
  Vec3d direction = Vec3d::UnitZ();  // defect hull, unit
  Vec3d origin = Vec3d::Zero();      // defect hull, m
  double mu_weight = 1.0;            // defect hull, cost per nondimensional unit of mu

  static Objective min_fuel() { return {}; }
  static Objective min_time() { return {ObjectiveKind::MinTime, Vec3d::UnitZ(), Vec3d::Zero()}; }
  static Objective defect_hull(const Vec3d& d, const Vec3d& o, double mu_weight = 1.0) {
    if (!(std::abs(d.norm() - 1.0) <= 1e-12)) throw InvalidInput("defect hull: direction must be unit norm");
    if (!(mu_weight > 0.0)) throw InvalidInput("defect hull: mu weight must be positive");
    return {ObjectiveKind::DefectHull, d, o, mu_weight};
  }
};

inline const char* to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::MinFuel: return "min-fuel";
    case ObjectiveKind::MinTime: return "min-time";
    case ObjectiveKind::DefectHull: return "defect-hull";
  }
  return "?";
}

struct BoundaryConditions {
  StateVecd x_init;  // physical
  Vec3d r_final = Vec3d::Zero();
  Vec3d v_final = Vec3d::Zero();
  Vec2d att_final = Vec2d::Zero();
  Vec2d omega_final = Vec2d::Zero();
};

struct ProblemSpec {
  BoundaryConditions bc;
  double glideslope = 60.0 * kDegToRad;
  double tau_min_s = 5.0;
  double tau_max_s = 400.0;
  double mu_min_m = -1.0;
};

// Trajectory together with the defect-hull displacement (nondimensional).
struct ScpIterate {
  NodeTrajectory traj;
  double mu = 0.0;
};

struct NonlinearEval {
  double cost = 0;
  double objective = 0;
  double defect_l1 = 0, terminal_l1 = 0, ctcs_l1 = 0, fin_l1 = 0;
  double max_defect = 0, max_terminal = 0, max_ctcs_excess = 0, max_fin = 0;
  double max_ctcs = 0;  // largest CTCS end value
  std::vector<ShootingSegmentResult> segs;

  double max_violation() const {
    return std::max({max_defect, max_terminal, max_ctcs_excess, max_fin});
  }
};

struct ReportRow {
  int iter = 0;
  double cost = 0;
  double defect_l1 = 0, terminal_l1 = 0, ctcs_l1 = 0;
  double prox_weight = 0;
  double rho = 0;
  double predicted = 0;  // model decrease of the penalized cost
  bool accepted = false;
  double wall_ms = 0;
  std::string note;
};

enum class SolveStatus { Converged, MaxIterations, SolverFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::SolverFailure: return "solver_failure";
  }
  return "?";
}

struct SolveReport {
  std::vector<ReportRow> rows;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  double wall_s = 0;
  double final_violation = 0;
  double final_cost = 0;
  double max_slack = 0;  // largest L1 slack in the last accepted subproblem
  std::string message;
};

struct ScpResult {
  ScpIterate best;
  NonlinearEval eval;
  SolveReport report;
};

class ScpSolver {
 public:
  ScpSolver(std::shared_ptr<const Transcription> tr, ProblemSpec spec, ScpParams params,
            std::shared_ptr<ConicBackend> backend = nullptr)
      : tr_(std::move(tr)), spec_(std::move(spec)), p_(std::move(params)), backend_(std::move(backend)) {
    p_.validate();
    if (!backend_) backend_ = std::make_shared<InteriorPointSolver>();
    const Scales& s = tr_->config().scales;
    x_init_ = nondimensionalize(spec_.bc.x_init, s);
    StateVecd xf = StateVecd::Zero();
    xf.segment<3>(kIdxR) = spec_.bc.r_final;
    xf.segment<3>(kIdxV) = spec_.bc.v_final;
    xf.segment<2>(kIdxAtt) = spec_.bc.att_final;
    xf.segment<2>(kIdxW) = spec_.bc.omega_final;
    x_final_ = nondimensionalize(xf, s);
  }

  const Transcription& transcription() const { return *tr_; }
  const ProblemSpec& spec() const { return spec_; }
  const ScpParams& params() const { return p_; }

  // Zero-control forward propagation from the initial condition.
  ScpIterate zero_control_guess(double tau_a_s, double tau_p_s) const {
    const int N = tr_->N();
    const double T = tr_->config().scales.time();
    ScpIterate it;
    it.traj.sigma_a = tau_a_s / T;
    it.traj.sigma_p = tau_p_s / T;
    it.traj.U.assign(static_cast<std::size_t>(N), ControlVecd::Zero());
    it.traj.X.assign(static_cast<std::size_t>(N), x_init_);
    it.traj.X = tr_->propagate_continuous(it.traj);
    return it;
  }

  NonlinearEval evaluate(const ScpIterate& z, const Objective& obj, bool sensitivities) const {
    NonlinearEval ev;
    ev.segs = tr_->propagate_all(z.traj, sensitivities);
    const int N = tr_->N();
    const double eps = tr_->config().eps_ctcs;
    for (int k = 0; k < N - 1; ++k) {
      const auto& sg = ev.segs[static_cast<std::size_t>(k)];
      const StateVecd d = z.traj.X[static_cast<std::size_t>(k + 1)] - sg.y_end.head<kNx>();
      ev.defect_l1 += d.lpNorm<1>();
      ev.max_defect = std::max(ev.max_defect, d.lpNorm<Eigen::Infinity>());
      for (int j = 0; j < kNc; ++j) {
        const double y = sg.y_end[kNx + j];
        ev.max_ctcs = std::max(ev.max_ctcs, y);
        const double ex = std::max(0.0, y - eps);
        ev.ctcs_l1 += ex;
        ev.max_ctcs_excess = std::max(ev.max_ctcs_excess, ex);
      }
    }
    const StateVecd tf = z.traj.X.back() - x_final_;
    for (int i = kIdxR; i < kNx; ++i) {
      ev.terminal_l1 += std::abs(tf[i]);
      ev.max_terminal = std::max(ev.max_terminal, std::abs(tf[i]));
    }
    for (int k = 0; k < N; ++k) {
      const auto fb = node_fin_bounds(z.traj.X[static_cast<std::size_t>(k)]);
      for (int i = 0; i < 2; ++i) {
        const double u = z.traj.U[static_cast<std::size_t>(k)][kIdxFin + i];
        const double v = std::max(0.0, u - fb.hi[i]) + std::max(0.0, fb.lo[i] - u);
        ev.fin_l1 += v;
        ev.max_fin = std::max(ev.max_fin, v);
      }
    }
    ev.objective = objective_value(z, obj);
    ev.cost = ev.objective + p_.w_m * ev.defect_l1 + p_.w_n * ev.terminal_l1 +
              p_.w_l * (ev.ctcs_l1 + ev.fin_l1);
    return ev;
  }

  double objective_value(const ScpIterate& z, const Objective& obj) const {
    switch (obj.kind) {
      case ObjectiveKind::MinFuel: return -z.traj.X.back()[kIdxM];
      case ObjectiveKind::MinTime: return 0.5 * (z.traj.sigma_a + z.traj.sigma_p);
      case ObjectiveKind::DefectHull: return -obj.mu_weight * z.mu;
    }
    return 0.0;
  }

  // Runs the SCP loop from an initial iterate.
  ScpResult solve(const ScpIterate& init, const Objective& obj,
                  const std::function<void(const ReportRow&)>& on_iter = nullptr) const {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    ScpResult res;
    ScpIterate ref = init;
    if (obj.kind == ObjectiveKind::DefectHull) {
      // Start mu at the projection of the reference ignition point.
      const Vec3d r_half = ref.traj.X[static_cast<std::size_t>(tr_->config().half_node())]
                               .segment<3>(kIdxR) * tr_->config().scales.length;
      ref.mu = obj.direction.dot(r_half - obj.origin) / tr_->config().scales.length;
    }
    NonlinearEval ref_eval;
    try {
      ref_eval = evaluate(ref, obj, true);
    } catch (const PropagationError& e) {
      res.report.status = SolveStatus::SolverFailure;
      res.report.message = std::string("initial guess propagation failed: ") + e.what();
      res.best = ref;
      return res;
    }
    double w = p_.r_init;
    int consecutive_failures = 0;
    res.report.status = SolveStatus::MaxIterations;

    for (int iter = 1; iter <= p_.max_iters; ++iter) {
      const auto t_it = clock::now();
      ReportRow row;
      row.iter = iter;
      row.prox_weight = w;

      SubproblemOutcome sub;
      try {
        sub = solve_subproblem(ref, ref_eval, obj, w);
      } catch (const Error& e) {
        sub.ok = false;
        sub.note = e.what();
      }
      bool accepted = false;
      double rho = 0.0;
      ScpIterate cand;
      NonlinearEval cand_eval;
      if (!sub.ok) {
        row.note = "subproblem: " + sub.note;
        ++consecutive_failures;
        w = update_weight(w, TrustDecision::RejectTighten, p_);
      } else {
        cand = sub.iterate;
        bool propagated = true;
        try {
          cand_eval = evaluate(cand, obj, false);
        } catch (const Error& e) {
          propagated = false;
          row.note = std::string("candidate propagation: ") + e.what();
        }
        if (!propagated) {
          ++consecutive_failures;
          w = update_weight(w, TrustDecision::RejectTighten, p_);
        } else {
          consecutive_failures = 0;
          const double pred = ref_eval.cost - sub.model_cost;
          const double act = ref_eval.cost - cand_eval.cost;
          const double small = 1e-12 * std::max(1.0, std::abs(ref_eval.cost));
          if (std::abs(pred) <= small && std::abs(act) <= small) {
            rho = 1.0;
          } else if (pred <= 0.0) {
            rho = act >= 0.0 ? 1.0 : -1.0;
          } else {
            rho = act / pred;
          }
          if (hard_violation(ref) > kHardTol) {
            // The reference breaks a convex constraint, so the ratio compares
            // against an unreachable point. Take the projected step as is.
            accepted = true;
            row.note = "restoration";
          } else {
            const TrustDecision dec = trust_decision(rho, p_);
            accepted = accepts(dec);
            w = update_weight(w, dec, p_);
          }
          row.predicted = pred;
          // Below this the ratio is dominated by integration noise.
          const double stall = p_.convergence_tol * std::max(1.0, std::abs(ref_eval.cost));
          if (pred <= stall && converged_feasible(ref_eval) && hard_violation(ref) <= kHardTol) {
            accepted = false;
            res.report.max_slack = sub.max_slack;
            res.report.status = SolveStatus::Converged;
            res.report.message = "predicted decrease below tolerance at a feasible reference";
            row.note = "stationary";
          }
        }
      }
      row.rho = rho;
      row.accepted = accepted;
      if (accepted) {
        const double dcost = std::abs(ref_eval.cost - cand_eval.cost);
        const double step = step_norm(ref, cand);
        try {
          cand_eval = evaluate(cand, obj, true);
        } catch (const Error& e) {
          // Sensitivities failed where the value propagation did not: treat as rejection.
          accepted = false;
          row.accepted = false;
          row.note = std::string("sensitivity propagation: ") + e.what();
          w = update_weight(w, TrustDecision::RejectTighten, p_);
        }
        if (accepted) {
          ref = cand;
          ref_eval = std::move(cand_eval);
          res.report.max_slack = sub.max_slack;
          const bool feasible = converged_feasible(ref_eval);
          const bool settled = dcost <= p_.convergence_tol * std::max(1.0, std::abs(ref_eval.cost)) ||
                               step <= p_.convergence_tol;
          if (feasible && settled) {
            res.report.status = SolveStatus::Converged;
            res.report.message = "violation and cost change below tolerance";
          }
        }
      }
      row.cost = ref_eval.cost;
      row.defect_l1 = ref_eval.defect_l1;
      row.terminal_l1 = ref_eval.terminal_l1;
      row.ctcs_l1 = ref_eval.ctcs_l1;
      row.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t_it).count();
      res.report.rows.push_back(row);
      res.report.iterations = iter;
      if (on_iter) on_iter(row);
      if (res.report.status == SolveStatus::Converged) break;
      if (consecutive_failures >= 8) {
        res.report.status = SolveStatus::SolverFailure;
        res.report.message = "repeated subproblem or propagation failures";
        break;
      }
      if (w >= p_.w_max && !accepted && iter > 1) {
        res.report.message = "prox weight saturated without progress";
      }
    }
    res.best = ref;
    res.eval = std::move(ref_eval);
    res.report.final_violation = res.eval.max_violation();
    res.report.final_cost = res.eval.cost;
    res.report.wall_s = std::chrono::duration<double>(clock::now() - t_start).count();
    return res;
  }

  // Variable layout of the convex subproblem.
  struct Layout {
    int N = 0, half = 0;
    bool has_mu = false;
    int X0 = 0, U0 = 0, SA = 0, SP = 0, NUP = 0, NUM = 0, TP = 0, TM = 0, E = 0, F = 0, MU = -1, n = 0;

    Layout(int N_, bool mu) : N(N_), half((N_ - 1) / 2), has_mu(mu) {
      int o = 0;
      X0 = o; o += N * kNx;
      U0 = o; o += N * kNu;
      SA = o++;
      SP = o++;
      NUP = o; o += (N - 1) * kNx;
      NUM = o; o += (N - 1) * kNx;
      TP = o; o += 10;
      TM = o; o += 10;
      E = o; o += (N - 1) * kNc;
      F = o; o += N * 4;
      if (mu) MU = o++;
      n = o;
    }
    int x(int k, int i) const { return X0 + k * kNx + i; }
    int u(int k, int j) const { return U0 + k * kNu + j; }
    int sigma(int seg) const { return seg < half ? SA : SP; }
    int nup(int k, int i) const { return NUP + k * kNx + i; }
    int num(int k, int i) const { return NUM + k * kNx + i; }
    int e(int k, int j) const { return E + k * kNc + j; }
    int f(int k, int j) const { return F + k * 4 + j; }
  };

  struct SubproblemOutcome {
    bool ok = false;
    ScpIterate iterate;
    double model_cost = 0;  // linearized penalized cost without the prox term
    double max_slack = 0;
    std::string note;
    ConeProblem problem;
    ConicSolution solution;
  };

  ConeProblem assemble_subproblem(const ScpIterate& ref, const NonlinearEval& ev,
                                  const Objective& obj, double w) const;

  SubproblemOutcome solve_subproblem(const ScpIterate& ref, const NonlinearEval& ev,
                                     const Objective& obj, double w) const;

  FinBounds node_fin_bounds(const StateVecd& xn) const {
    auto g = node_fin_bounds_grad(xn);
    return {g.lo, g.hi};
  }

  struct FinBoundsGrad {
    Vec2d lo, hi;
    Eigen::Matrix<double, 2, kNx> dlo, dhi;  // w.r.t. nondimensional state
  };

  FinBoundsGrad node_fin_bounds_grad(const StateVecd& xn) const {
    using AD = Eigen::AutoDiffScalar<Eigen::Matrix<double, kNx, 1>>;
    FinBoundsGrad out;
    const VehicleModel& model = tr_->model();
    if (!model.aero_enabled) {
      out.lo.setConstant(-1.0);
      out.hi.setConstant(1.0);
      out.dlo.setZero();
      out.dhi.setZero();
      return out;
    }
    const StateVecd sc = tr_->config().scales.state_scale();
    StateVec<AD> x;
    for (int i = 0; i < kNx; ++i) x[i] = AD(xn[i], kNx, i) * sc[i];
    const Vec3<AD> r = x.segment<3>(kIdxR);
    const Vec3<AD> v = x.segment<3>(kIdxV);
    const Mat3<AD> t_bi = attitude_matrix<AD>(Vec2<AD>(x[kIdxAtt], x[kIdxAtt + 1]));
    auto fc = flight_condition<AD>(r, v, t_bi, model);
    auto fb = fin_bounds<AD>(*model.aero, fc.mach, fc.aoa.alpha1 * kRadToDeg, fc.aoa.alpha2 * kRadToDeg);
    // Flow angles lose meaning as the speed vanishes; hold the bounds fixed
    // there instead of passing 1/|v| gradients to the solver.
    const bool frozen = fc.speed.value() < kFinBoundMinSpeed;
    for (int i = 0; i < 2; ++i) {
      out.lo[i] = fb.lo[i].value();
      out.hi[i] = fb.hi[i].value();
      out.dlo.row(i) = fb.lo[i].derivatives().size() ? Eigen::Matrix<double, 1, kNx>(fb.lo[i].derivatives().transpose())
                                                     : Eigen::Matrix<double, 1, kNx>::Zero();
      out.dhi.row(i) = fb.hi[i].derivatives().size() ? Eigen::Matrix<double, 1, kNx>(fb.hi[i].derivatives().transpose())
                                                     : Eigen::Matrix<double, 1, kNx>::Zero();
    }
    if (frozen) {
      out.dlo.setZero();
      out.dhi.setZero();
    }
    return out;
  }

  // Decision vector at the reference; slacks are zero.
  static Eigen::VectorXd reference_vector(const ScpIterate& ref, const Layout& L) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(L.n);
    for (int k = 0; k < L.N; ++k) {
      z.segment<kNx>(L.x(k, 0)) = ref.traj.X[static_cast<std::size_t>(k)];
      z.segment<kNu>(L.u(k, 0)) = ref.traj.U[static_cast<std::size_t>(k)];
    }
    z[L.SA] = ref.traj.sigma_a;
    z[L.SP] = ref.traj.sigma_p;
    if (L.has_mu) z[L.MU] = ref.mu;
    return z;
  }

  static double step_norm(const ScpIterate& a, const ScpIterate& b) {
    double s = std::max(std::abs(a.traj.sigma_a - b.traj.sigma_a), std::abs(a.traj.sigma_p - b.traj.sigma_p));
    for (std::size_t k = 0; k < a.traj.X.size(); ++k) {
      s = std::max(s, (a.traj.X[k] - b.traj.X[k]).lpNorm<Eigen::Infinity>());
      s = std::max(s, (a.traj.U[k] - b.traj.U[k]).lpNorm<Eigen::Infinity>());
    }
    return std::max(s, std::abs(a.mu - b.mu));
  }

  // Largest violation of the convex (hard) constraints, nondimensional.
  double hard_violation(const ScpIterate& z) const {
    const Scales& sc = tr_->config().scales;
    const VehicleParams& vp = tr_->model().vehicle;
    const int N = tr_->N();
    const int half = tr_->config().half_node();
    const double T = sc.time();
    double v = 0.0;
    auto upd = [&v](double x) { v = std::max(v, x); };
    for (const double sg : {z.traj.sigma_a, z.traj.sigma_p}) {
      upd(sg - spec_.tau_max_s / T);
      upd(spec_.tau_min_s / T - sg);
    }
    const double m_dry = vp.m_dry / sc.mass;
    const double wmax = vp.omega_max / sc.rate;
    const double umax = vp.u_max / sc.force();
    const double tg = std::tan(vp.gimbal_max);
    const double tgs = std::tan(spec_.glideslope);
    for (int k = 0; k < N; ++k) {
      const StateVecd& x = z.traj.X[static_cast<std::size_t>(k)];
      const ControlVecd& u = z.traj.U[static_cast<std::size_t>(k)];
      upd(m_dry - x[kIdxM]);
      upd(x.segment<2>(kIdxW).norm() - wmax);
      upd(u.segment<2>(kIdxFin).cwiseAbs().maxCoeff() - 1.5);
      if (k < half) {
        upd(u.segment<3>(kIdxThrust).cwiseAbs().maxCoeff());
        continue;
      }
      upd(u.segment<2>(kIdxThrust).norm() - tg * u[kIdxThrust + 2]);
      upd(u.segment<3>(kIdxThrust).norm() - umax);
      upd(x.segment<2>(kIdxR).norm() - tgs * x[kIdxR + 2]);
    }
    if (z.mu < spec_.mu_min_m / sc.length) upd(spec_.mu_min_m / sc.length - z.mu);
    return v;
  }

  static constexpr double kHardTol = 1e-7;

  bool converged_feasible(const NonlinearEval& ev) const {
    return ev.max_violation() <= p_.convergence_tol && ev.max_ctcs_excess <= p_.ctcs_excess_tol;
  }
  static constexpr double kFinBoundMinSpeed = 1.0;  // m/s

  const StateVecd& x_init_nd() const { return x_init_; }
  const StateVecd& x_final_nd() const { return x_final_; }

 private:
  std::shared_ptr<const Transcription> tr_;
  ProblemSpec spec_;
  ScpParams p_;
  std::shared_ptr<ConicBackend> backend_;
  StateVecd x_init_;
  StateVecd x_final_;
};

namespace detail {

// Row-oriented builder for ConeProblem.
class ConeBuilder {
 public:
  using Row = std::vector<std::pair<int, double>>;

  explicit ConeBuilder(int n) : n_(n), q_(Eigen::VectorXd::Zero(n)), p_(Eigen::VectorXd::Zero(n)) {}

  Eigen::VectorXd& q() { return q_; }
  Eigen::VectorXd& p() { return p_; }

  void eq(const Row& r, double rhs) {
    for (auto [c, v] : r) eq_.emplace_back(neq_, c, v);
    beq_.push_back(rhs);
    ++neq_;
  }
  // sum a_j x_j <= rhs
  void le(const Row& r, double rhs) {
    for (auto [c, v] : r) lin_.emplace_back(nlin_, c, v);
    hlin_.push_back(rhs);
    ++nlin_;
  }
  // || (rows[1..]) || <= rows[0], each row an affine form (coefficients, constant).
  void soc(const std::vector<std::pair<Row, double>>& rows) {
    socs_.push_back(rows);
  }

  ConeProblem build() const {
    ConeProblem P;
    P.q = q_;
    P.p_diag = p_;
    P.A.resize(neq_, n_);
    P.A.setFromTriplets(eq_.begin(), eq_.end());
    P.b = Eigen::Map<const Eigen::VectorXd>(beq_.data(), static_cast<Eigen::Index>(beq_.size()));
    int m = nlin_;
    for (const auto& s : socs_) m += static_cast<int>(s.size());
    std::vector<Eigen::Triplet<double>> g = lin_;
    Eigen::VectorXd h(m);
    for (int i = 0; i < nlin_; ++i) h[i] = hlin_[static_cast<std::size_t>(i)];
    int row = nlin_;
    for (const auto& s : socs_) {
      P.soc_dims.push_back(static_cast<int>(s.size()));
      for (const auto& [coef, cst] : s) {
        for (auto [c, v] : coef) g.emplace_back(row, c, -v);
        h[row] = cst;
        ++row;
      }
    }
    P.G.resize(m, n_);
    P.G.setFromTriplets(g.begin(), g.end());
    P.h = h;
    P.n_nonneg = nlin_;
    return P;
  }

 private:
  int n_;
  Eigen::VectorXd q_, p_;
  std::vector<Eigen::Triplet<double>> eq_, lin_;
  std::vector<double> beq_, hlin_;
  int neq_ = 0, nlin_ = 0;
  std::vector<std::vector<std::pair<Row, double>>> socs_;
};

}  // namespace detail

inline ConeProblem ScpSolver::assemble_subproblem(const ScpIterate& ref, const NonlinearEval& ev,
                                                  const Objective& obj, double w) const {
  const int N = tr_->N();
  if (static_cast<int>(ref.traj.X.size()) != N || static_cast<int>(ref.traj.U.size()) != N ||
      static_cast<int>(ev.segs.size()) != N - 1)
    throw InvalidInput("assemble_subproblem: reference dimension mismatch");
  const Layout L(N, obj.kind == ObjectiveKind::DefectHull);
  const Scales& sc = tr_->config().scales;
  const VehicleParams& vp = tr_->model().vehicle;
  const double T = sc.time();
  detail::ConeBuilder B(L.n);
  using Row = detail::ConeBuilder::Row;

  // Objective and penalties.
  switch (obj.kind) {
    case ObjectiveKind::MinFuel: B.q()[L.x(N - 1, kIdxM)] = -1.0; break;
    case ObjectiveKind::MinTime:
      B.q()[L.SA] = 0.5;
      B.q()[L.SP] = 0.5;
      break;
    case ObjectiveKind::DefectHull: B.q()[L.MU] = -obj.mu_weight; break;
  }
  for (int i = L.NUP; i < L.TP; ++i) B.q()[i] = p_.w_m;
  for (int i = L.TP; i < L.E; ++i) B.q()[i] = p_.w_n;
  for (int i = L.E; i < L.F + N * 4; ++i) B.q()[i] = p_.w_l;

  // Prox term around the reference.
  // The problem is posed in the step d = z - zref, so the prox term has no
  // linear part and the objective stays well scaled at large weights.
  for (int i = 0; i < L.SP + 1; ++i) B.p()[i] = w;
  const double sig_scale = p_.dilation_prox_per_segment ? static_cast<double>(L.half) : 1.0;
  B.p()[L.SA] *= sig_scale;
  B.p()[L.SP] *= sig_scale;
  if (L.has_mu) B.p()[L.MU] = w;

  // Initial condition.
  for (int i = 0; i < kNx; ++i) B.eq({{L.x(0, i), 1.0}}, x_init_[i]);

  // Linearized shooting defects and CTCS end bounds.
  for (int k = 0; k < N - 1; ++k) {
    const auto& sg = ev.segs[static_cast<std::size_t>(k)];
    const StateVecd& xk = ref.traj.X[static_cast<std::size_t>(k)];
    const ControlVecd& uk = ref.traj.U[static_cast<std::size_t>(k)];
    const ControlVecd& uk1 = ref.traj.U[static_cast<std::size_t>(k + 1)];
    const int sig = L.sigma(k);
    const double sig_ref = k < L.half ? ref.traj.sigma_a : ref.traj.sigma_p;
    const bool aero = k < L.half;
    for (int i = 0; i < kNy; ++i) {
      // Affine model: y_i ~ c + sum J * var
      double c = sg.y_end[i];
      Row r;
      for (int j = 0; j < kNx; ++j) {
        const double a = sg.d_x0(i, j);
        if (a != 0.0) {
          r.emplace_back(L.x(k, j), a);
          c -= a * xk[j];
        }
      }
      for (int j = 0; j < kNu; ++j) {
        if (aero && j < 3) continue;
        const double a0 = sg.d_u0(i, j), a1 = sg.d_u1(i, j);
        if (a0 != 0.0) {
          r.emplace_back(L.u(k, j), a0);
          c -= a0 * uk[j];
        }
        if (a1 != 0.0) {
          r.emplace_back(L.u(k + 1, j), a1);
          c -= a1 * uk1[j];
        }
      }
      const double as = sg.d_sigma[i];
      if (as != 0.0) {
        r.emplace_back(sig, as);
        c -= as * sig_ref;
      }
      if (i < kNx) {
        // X_{k+1} - model - nu+ + nu- = 0
        Row e;
        e.emplace_back(L.x(k + 1, i), 1.0);
        for (auto [col, v] : r) e.emplace_back(col, -v);
        e.emplace_back(L.nup(k, i), -1.0);
        e.emplace_back(L.num(k, i), 1.0);
        B.eq(e, c);
      } else {
        // model - e <= eps
        const int j = i - kNx;
        r.emplace_back(L.e(k, j), -1.0);
        B.le(r, tr_->config().eps_ctcs - c);
      }
    }
  }

  // Terminal conditions with slack.
  for (int i = kIdxR; i < kNx; ++i) {
    const int t = i - kIdxR;
    B.eq({{L.x(N - 1, i), 1.0}, {L.TP + t, -1.0}, {L.TM + t, 1.0}}, x_final_[i]);
  }

  // No thrust during the aerodynamic phase.
  for (int k = 0; k < L.half; ++k)
    for (int j = 0; j < 3; ++j) B.eq({{L.u(k, j), 1.0}}, 0.0);

  // Slack non-negativity.
  for (int i = L.NUP; i < L.F + N * 4; ++i) B.le({{i, -1.0}}, 0.0);

  // Dilation bounds.
  for (int s : {L.SA, L.SP}) {
    B.le({{s, 1.0}}, spec_.tau_max_s / T);
    B.le({{s, -1.0}}, -spec_.tau_min_s / T);
  }

  const double m_dry = vp.m_dry / sc.mass;
  for (int k = 0; k < N; ++k) {
    B.le({{L.x(k, kIdxM), -1.0}}, -m_dry);
    for (int i = 0; i < 2; ++i) {
      B.le({{L.u(k, kIdxFin + i), 1.0}}, 1.5);
      B.le({{L.u(k, kIdxFin + i), -1.0}}, 1.5);
    }
    // Linearized state-dependent fin bounds with slack.
    const StateVecd& xk = ref.traj.X[static_cast<std::size_t>(k)];
    const auto fb = node_fin_bounds_grad(xk);
    for (int i = 0; i < 2; ++i) {
      // u - dhi.x - f_hi <= hi - dhi.xref
      Row hi{{L.u(k, kIdxFin + i), 1.0}, {L.f(k, 2 + i), -1.0}};
      Row lo{{L.u(k, kIdxFin + i), -1.0}, {L.f(k, i), -1.0}};
      double chi = fb.hi[i], clo = -fb.lo[i];
      for (int j = 0; j < kNx; ++j) {
        if (fb.dhi(i, j) != 0.0) {
          hi.emplace_back(L.x(k, j), -fb.dhi(i, j));
          chi -= fb.dhi(i, j) * xk[j];
        }
        if (fb.dlo(i, j) != 0.0) {
          lo.emplace_back(L.x(k, j), fb.dlo(i, j));
          clo += fb.dlo(i, j) * xk[j];
        }
      }
      B.le(hi, chi);
      B.le(lo, clo);
    }
  }

  if (L.has_mu) {
    B.le({{L.MU, -1.0}}, -spec_.mu_min_m / sc.length);
    const Vec3d o = obj.origin / sc.length;
    for (int i = 0; i < 3; ++i)
      B.eq({{L.x(L.half, kIdxR + i), 1.0}, {L.MU, -obj.direction[i]}}, o[i]);
  }

  // Cones: angular rate at every node; gimbal, thrust magnitude and glideslope
  // on propulsive nodes.
  const double wmax = vp.omega_max / sc.rate;
  const double umax = vp.u_max / sc.force();
  const double tg = std::tan(vp.gimbal_max);
  const double tgs = std::tan(spec_.glideslope);
  for (int k = 0; k < N; ++k) {
    B.soc({{Row{}, wmax}, {Row{{L.x(k, kIdxW), 1.0}}, 0.0}, {Row{{L.x(k, kIdxW + 1), 1.0}}, 0.0}});
    if (k < L.half) continue;
    B.soc({{Row{{L.u(k, 2), tg}}, 0.0}, {Row{{L.u(k, 0), 1.0}}, 0.0}, {Row{{L.u(k, 1), 1.0}}, 0.0}});
    B.soc({{Row{}, umax},
           {Row{{L.u(k, 0), 1.0}}, 0.0},
           {Row{{L.u(k, 1), 1.0}}, 0.0},
           {Row{{L.u(k, 2), 1.0}}, 0.0}});
    B.soc({{Row{{L.x(k, kIdxR + 2), tgs}}, 0.0},
           {Row{{L.x(k, kIdxR), 1.0}}, 0.0},
           {Row{{L.x(k, kIdxR + 1), 1.0}}, 0.0}});
  }
  ConeProblem P = B.build();
  const Eigen::VectorXd zref = reference_vector(ref, L);
  P.b -= P.A * zref;
  P.h -= P.G * zref;
  return P;
}

inline ScpSolver::SubproblemOutcome ScpSolver::solve_subproblem(const ScpIterate& ref,
                                                                const NonlinearEval& ev,
                                                                const Objective& obj,
                                                                double w) const {
  SubproblemOutcome out;
  out.problem = assemble_subproblem(ref, ev, obj, w);
  out.solution = backend_->solve(out.problem, p_.conic);
  if (!out.solution.usable()) {
    out.note = std::string("conic backend status ") + to_string(out.solution.status);
    return out;
  }
  const int N = tr_->N();
  const Layout L(N, obj.kind == ObjectiveKind::DefectHull);
  const Eigen::VectorXd x = reference_vector(ref, L) + out.solution.x;
  ScpIterate it;
  it.traj.X.resize(static_cast<std::size_t>(N));
  it.traj.U.resize(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    it.traj.X[static_cast<std::size_t>(k)] = x.segment<kNx>(L.x(k, 0));
    it.traj.U[static_cast<std::size_t>(k)] = x.segment<kNu>(L.u(k, 0));
  }
  // Exact equalities that the solver meets only to tolerance.
  it.traj.X[0] = x_init_;
  for (int k = 0; k < L.half; ++k) it.traj.U[static_cast<std::size_t>(k)].segment<3>(kIdxThrust).setZero();
  it.traj.sigma_a = x[L.SA];
  it.traj.sigma_p = x[L.SP];
  if (L.has_mu) it.mu = x[L.MU];
  // Model cost: linear objective plus penalties, no prox.
  const ConeProblem& P = out.problem;
  double lin = 0.0;
  switch (obj.kind) {
    case ObjectiveKind::MinFuel: lin = -x[L.x(N - 1, kIdxM)]; break;
    case ObjectiveKind::MinTime: lin = 0.5 * (x[L.SA] + x[L.SP]); break;
    case ObjectiveKind::DefectHull: lin = -obj.mu_weight * x[L.MU]; break;
  }
  // Split slacks enter through their difference, which the equality rows pin
  // down far more accurately than either part at large prox weights.
  double slack_max = 0.0;
  const auto add = [&](double v, double wgt) {
    lin += wgt * v;
    slack_max = std::max(slack_max, v);
  };
  for (int i = 0; i < (N - 1) * kNx; ++i) add(std::abs(x[L.NUP + i] - x[L.NUM + i]), p_.w_m);
  for (int i = 0; i < 10; ++i) add(std::abs(x[L.TP + i] - x[L.TM + i]), p_.w_n);
  for (int i = L.E; i < L.F + N * 4; ++i) add(std::max(0.0, x[i]), p_.w_l);
  (void)P;
  out.model_cost = lin;
  out.max_slack = slack_max;
  out.iterate = std::move(it);
  out.ok = true;
  return out;
}

}  // namespace rlv
