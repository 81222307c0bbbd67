#pragma once

// Defect-hull reachability: grow a convex polytope of feasible ignition
// points by maximizing displacement along random outward directions.

#include <rlv/hull.hpp>
#include <rlv/parallel.hpp>
#include <rlv/rng.hpp>
#include <rlv/scp.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rlv {

struct ReachParams {
  int iters = 200;
  std::uint64_t seed = 1;
  double feasibility_tol = 1e-3;  // nondimensional, on re-propagation
  int checkpoint_every = 0;       // 0 disables
  int batch = 1;                  // speculative attempts per hull snapshot
  int threads = 1;
  // Cost per nondimensional unit of mu. At 1 the prox term swamps the
  // objective and attempts stop within centimetres of the origin.
  double mu_weight = 300.0;
  ScpParams scp = default_scp();

  static ScpParams default_scp() {
    ScpParams p;
    p.max_iters = 15;
    return p;
  }

  void validate() const {
    if (iters < 0) throw ConfigError("reach: iters must be >= 0");
    if (!(feasibility_tol > 0.0)) throw ConfigError("reach: feasibility tolerance must be positive");
    if (!(mu_weight > 0.0)) throw ConfigError("reach: mu weight must be positive");
    if (checkpoint_every < 0) throw ConfigError("reach: checkpoint_every must be >= 0");
    if (batch < 1 || threads < 1) throw ConfigError("reach: batch and threads must be >= 1");
    // A checkpoint taken mid-batch would resume against a different snapshot.
    if (checkpoint_every % batch != 0) throw ConfigError("reach: checkpoint_every must be a multiple of batch");
    scp.validate();
  }
};

enum class AttemptStatus { Accepted, Infeasible, NotConverged, Numerical };

inline const char* to_string(AttemptStatus s) {
  switch (s) {
    case AttemptStatus::Accepted: return "accepted";
    case AttemptStatus::Infeasible: return "infeasible";
    case AttemptStatus::NotConverged: return "not-converged";
    case AttemptStatus::Numerical: return "numerical";
  }
  return "?";
}

inline AttemptStatus attempt_status_from_string(const std::string& s) {
  if (s == "accepted") return AttemptStatus::Accepted;
  if (s == "infeasible") return AttemptStatus::Infeasible;
  if (s == "not-converged") return AttemptStatus::NotConverged;
  if (s == "numerical") return AttemptStatus::Numerical;
  throw InvalidInput("unknown attempt status '" + s + "'");
}

struct ExpansionAttempt {
  std::int64_t index = 0;
  Vec3d origin = Vec3d::Zero();     // m
  Vec3d direction = Vec3d::UnitZ();
  AttemptStatus status = AttemptStatus::Numerical;
  std::string reason;
  double mu_m = 0.0;
  std::int64_t key = -1;      // archive key when accepted
  std::int64_t warm_key = -1;
  int scp_iterations = 0;
  std::string scp_status;
  double violation = 0.0;     // re-propagated, nondimensional
  double wall_s = 0.0;
};

// A trajectory whose ignition point entered (or was offered to) the hull.
struct ArchiveEntry {
  std::int64_t key = 0;
  std::int64_t attempt = -1;  // -1 for the initializing solution
  Vec3d point = Vec3d::Zero();  // r at tau = 1/2, m
  double mu_m = 0.0;
  ScpIterate traj;
};

struct ReachState {
  std::uint64_t seed = 1;
  std::int64_t next_attempt = 0;
  ConvexHull3 hull;
  std::vector<ArchiveEntry> archive;  // key == position
  std::vector<ExpansionAttempt> attempts;
  std::vector<double> volume_history;  // one entry per completed iteration, plus the start
  double wall_s = 0.0;

  int count(AttemptStatus s) const {
    int n = 0;
    for (const auto& a : attempts) n += a.status == s;
    return n;
  }
};

namespace detail {

inline Vec3d sample_triangle(const Vec3d& a, const Vec3d& b, const Vec3d& c, CounterRng& rng) {
  const double s = std::sqrt(rng.uniform());
  const double t = rng.uniform();
  return (1.0 - s) * a + s * (1.0 - t) * b + s * t * c;
}

inline int pick_weighted(const std::vector<double>& w, CounterRng& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(w.size()); ++i) {
    acc += w[static_cast<std::size_t>(i)];
    if (u < acc) return i;
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace detail

struct SurfaceSample {
  Vec3d origin;
  Vec3d direction;
  int facet = -1;  // -1 in the degenerate phases
};

// Area-weighted surface point and a direction into the facet's outward
// hemisphere. Before the hull is solid, points come from its affine hull and
// directions from the full sphere.
inline SurfaceSample sample_surface(const ConvexHull3& hull, CounterRng& rng) {
  const auto& V = hull.vertices();
  SurfaceSample s;
  switch (hull.dimension()) {
    case -1: throw InvalidInput("sample_surface: empty polytope");
    case 0: s.origin = V[0].p; break;
    case 1: {
      const double t = rng.uniform();
      s.origin = (1.0 - t) * V[0].p + t * V[1].p;
      break;
    }
    default: {
      const auto& F = hull.facets();
      std::vector<double> w;
      w.reserve(F.size());
      for (const auto& f : F) w.push_back(f.area);
      const int i = detail::pick_weighted(w, rng);
      const auto& f = F[static_cast<std::size_t>(i)];
      s.origin = detail::sample_triangle(V[f.v[0]].p, V[f.v[1]].p, V[f.v[2]].p, rng);
      if (hull.dimension() == 3) s.facet = i;
      break;
    }
  }
  Vec3d d = rng.unit_vector();
  if (s.facet >= 0) {
    const Vec3d& n = hull.facets()[static_cast<std::size_t>(s.facet)].normal;
    const double dn = d.dot(n);
    if (dn < 0.0) d -= 2.0 * dn * n;
    d.normalize();
  }
  s.direction = d;
  return s;
}

// Rebuilds the hull from the archive in attempt order.
inline ConvexHull3 replay_hull(const ReachState& st) {
  ConvexHull3 h;
  if (st.archive.empty()) return h;
  h.insert(st.archive[0].point, 0);
  for (const auto& a : st.attempts)
    if (a.status == AttemptStatus::Accepted)
      h.insert(st.archive[static_cast<std::size_t>(a.key)].point, a.key);
  return h;
}

class ReachRunner {
 public:
  using CheckpointFn = std::function<void(const ReachState&)>;
  using ProgressFn = std::function<void(const ReachState&, const ExpansionAttempt&)>;

  ReachRunner(std::shared_ptr<const Transcription> tr, ProblemSpec spec, ReachParams params,
              std::shared_ptr<ConicBackend> backend = nullptr)
      : tr_(std::move(tr)), spec_(std::move(spec)), p_(std::move(params)), backend_(std::move(backend)) {
    p_.validate();
  }

  const ReachParams& params() const { return p_; }

  ReachState init_polytope(const ScpResult& min_fuel) const {
    if (min_fuel.report.status != SolveStatus::Converged)
      throw InvalidInput("reach: initializing solution did not converge");
    ReachState st;
    st.seed = p_.seed;
    ArchiveEntry e;
    e.key = 0;
    e.traj = min_fuel.best;
    e.traj.mu = 0.0;
    e.point = ignition_point(e.traj);
    st.archive.push_back(e);
    st.hull.insert(e.point, 0);
    st.volume_history.push_back(0.0);
    return st;
  }

  Vec3d ignition_point(const ScpIterate& z) const {
    const int half = (tr_->N() - 1) / 2;
    return z.traj.X[static_cast<std::size_t>(half)].segment<3>(kIdxR) * tr_->config().scales.length;
  }

  // Solves P2 for one attempt against a fixed hull snapshot. Thread-safe.
  std::pair<ExpansionAttempt, std::optional<ScpIterate>> attempt(const ReachState& st,
                                                                std::int64_t index) const {
    const auto t0 = std::chrono::steady_clock::now();
    CounterRng rng(st.seed, static_cast<std::uint64_t>(index));
    const SurfaceSample s = sample_surface(st.hull, rng);
    ExpansionAttempt a;
    a.index = index;
    a.origin = s.origin;
    a.direction = s.direction;
    a.warm_key = nearest_vertex(st, s.origin);
    std::optional<ScpIterate> out;
    try {
      ScpSolver solver(tr_, spec_, p_.scp, backend_);
      const auto& warm = st.archive[static_cast<std::size_t>(a.warm_key)];
      ScpIterate init = warm.traj;
      const double L = tr_->config().scales.length;
      init.mu = std::max(spec_.mu_min_m, s.direction.dot(warm.point - s.origin)) / L;
      const Objective obj = Objective::defect_hull(s.direction, s.origin, p_.mu_weight);
      ScpResult r = solver.solve(init, obj);
      a.scp_iterations = r.report.iterations;
      a.scp_status = to_string(r.report.status);
      a.mu_m = r.best.mu * L;
      if (r.report.status == SolveStatus::SolverFailure) {
        a.status = AttemptStatus::Numerical;
        a.reason = r.report.message;
      } else {
        // Only dynamic infeasibility rejects: an iterate that ran out of SCP
        // iterations is still a witness if it re-propagates cleanly.
        a.violation = std::max(r.eval.max_violation(), solver.hard_violation(r.best));
        if (a.violation <= p_.feasibility_tol) {
          a.status = AttemptStatus::Accepted;
          out = std::move(r.best);
        } else if (r.report.status == SolveStatus::MaxIterations) {
          a.status = AttemptStatus::NotConverged;
          a.reason = r.report.message;
        } else {
          a.status = AttemptStatus::Infeasible;
          a.reason = "re-propagated violation above tolerance";
        }
      }
    } catch (const Error& e) {
      a.status = AttemptStatus::Numerical;
      a.reason = e.what();
    }
    a.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {a, std::move(out)};
  }

  // Applies one finished attempt: archive, hull insertion, log.
  void commit(ReachState& st, ExpansionAttempt a, std::optional<ScpIterate> traj) const {
    if (a.status == AttemptStatus::Accepted) {
      ArchiveEntry e;
      e.key = static_cast<std::int64_t>(st.archive.size());
      e.attempt = a.index;
      e.traj = std::move(*traj);
      e.point = ignition_point(e.traj);
      e.mu_m = a.mu_m;
      a.key = e.key;
      st.archive.push_back(std::move(e));
      st.hull.insert(st.archive.back().point, a.key);
    }
    st.attempts.push_back(std::move(a));
    st.next_attempt = st.attempts.back().index + 1;
    st.volume_history.push_back(st.hull.volume());
  }

  // Runs until `iters` attempts have been made in total.
  void run(ReachState& st, int iters, const CheckpointFn& checkpoint = {},
           const ProgressFn& progress = {}) const {
    const auto t0 = std::chrono::steady_clock::now();
    const double wall0 = st.wall_s;
    while (st.next_attempt < iters) {
      const int n = static_cast<int>(std::min<std::int64_t>(p_.batch, iters - st.next_attempt));
      const std::int64_t first = st.next_attempt;
      std::vector<std::pair<ExpansionAttempt, std::optional<ScpIterate>>> res(static_cast<std::size_t>(n));
      parallel_for(n, p_.threads, [&](int i) { res[static_cast<std::size_t>(i)] = attempt(st, first + i); });
      for (auto& [a, z] : res) {
        commit(st, a, std::move(z));
        st.wall_s = wall0 + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (progress) progress(st, st.attempts.back());
        if (checkpoint && p_.checkpoint_every > 0 && st.next_attempt % p_.checkpoint_every == 0)
          checkpoint(st);
      }
    }
  }

 private:
  std::shared_ptr<const Transcription> tr_;
  ProblemSpec spec_;
  ReachParams p_;
  std::shared_ptr<ConicBackend> backend_;

  // Nearest hull vertex by ignition point; ties go to the lower key.
  static std::int64_t nearest_vertex(const ReachState& st, const Vec3d& p) {
    std::int64_t best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& v : st.hull.vertices()) {
      const double d = (st.archive[static_cast<std::size_t>(v.key)].point - p).norm();
      if (d < bd || (d == bd && v.key < best)) {
        bd = d;
        best = v.key;
      }
    }
    return best;
  }
};

}  // namespace rlv
