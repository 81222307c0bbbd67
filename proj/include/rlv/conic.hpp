#pragma once

// Conic backend boundary and a primal-dual interior-point solver for
//   minimize    1/2 x'diag(p)x + q'x
//   subject to  A x = b,  G x + s = h,  s in K
// where K is a nonnegative orthant followed by second-order cones. Uses
// Nesterov-Todd scaling with a Mehrotra predictor-corrector step and a
// regularized sparse LDL' factorization of the full KKT system.

#include <rlv/types.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <string>
#include <vector>

namespace rlv {

struct ConeProblem {
  Eigen::VectorXd p_diag;  // quadratic diagonal (>= 0); empty means zero
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::SparseMatrix<double> G;
  Eigen::VectorXd h;
  int n_nonneg = 0;
  std::vector<int> soc_dims;

  int n() const { return static_cast<int>(q.size()); }
  void validate() const {
    const auto nv = q.size();
    if (p_diag.size() != 0 && p_diag.size() != nv) throw InvalidInput("cone problem: p size");
    if (p_diag.size() != 0 && (p_diag.array() < 0.0).any())
      throw InvalidInput("cone problem: negative quadratic weight");
    if (A.cols() != nv || A.rows() != b.size()) throw InvalidInput("cone problem: A/b dimensions");
    if (G.cols() != nv || G.rows() != h.size()) throw InvalidInput("cone problem: G/h dimensions");
    long m = n_nonneg;
    for (int d : soc_dims) {
      if (d < 2) throw InvalidInput("cone problem: SOC dimension below 2");
      m += d;
    }
    if (m != G.rows()) throw InvalidInput("cone problem: cone dimensions do not cover G rows");
    if (!q.allFinite() || !b.allFinite() || !h.allFinite())
      throw InvalidInput("cone problem: non-finite data");
  }
};

enum class ConicStatus { Solved, AlmostSolved, MaxIterations, NumericalError };

inline const char* to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::Solved: return "solved";
    case ConicStatus::AlmostSolved: return "almost_solved";
    case ConicStatus::MaxIterations: return "max_iterations";
    case ConicStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

struct ConicSettings {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  int max_iters = 100;
  double static_reg = 1e-8;
  int refine_steps = 3;
  bool verbose = false;
};

struct ConicSolution {
  ConicStatus status = ConicStatus::NumericalError;
  Eigen::VectorXd x, y, z, s;
  double objective = 0;
  double pres = 0, dres = 0, gap = 0;
  int iterations = 0;

  bool usable() const {
    return status == ConicStatus::Solved || status == ConicStatus::AlmostSolved;
  }
};

class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual ConicSolution solve(const ConeProblem& prob, const ConicSettings& settings) = 0;
  virtual std::string name() const = 0;
};

namespace conic_detail {

// Jordan-algebra helpers over the product cone.
struct Cones {
  int l = 0;
  std::vector<int> q;
  std::vector<int> offset;  // start of each SOC
  int m = 0;
  int degree = 0;

  explicit Cones(const ConeProblem& p) : l(p.n_nonneg), q(p.soc_dims) {
    int o = l;
    for (int d : q) {
      offset.push_back(o);
      o += d;
    }
    m = o;
    degree = l + static_cast<int>(q.size());
  }

  void identity(Eigen::VectorXd& e) const {
    e.setZero(m);
    e.head(l).setOnes();
    for (int o : offset) e[o] = 1.0;
  }

  // x o y
  Eigen::VectorXd prod(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    Eigen::VectorXd r(m);
    r.head(l) = x.head(l).cwiseProduct(y.head(l));
    for (std::size_t k = 0; k < q.size(); ++k) {
      const int o = offset[k], d = q[k];
      r[o] = x.segment(o, d).dot(y.segment(o, d));
      r.segment(o + 1, d - 1) = x[o] * y.segment(o + 1, d - 1) + y[o] * x.segment(o + 1, d - 1);
    }
    return r;
  }

  // Solves lam o x = b for x.
  Eigen::VectorXd divide(const Eigen::VectorXd& lam, const Eigen::VectorXd& b) const {
    Eigen::VectorXd x(m);
    x.head(l) = b.head(l).cwiseQuotient(lam.head(l));
    for (std::size_t k = 0; k < q.size(); ++k) {
      const int o = offset[k], d = q[k];
      const double l0 = lam[o];
      const auto l1 = lam.segment(o + 1, d - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      const double x0 = (l0 * b[o] - l1.dot(b.segment(o + 1, d - 1))) / det;
      x[o] = x0;
      x.segment(o + 1, d - 1) = (b.segment(o + 1, d - 1) - x0 * l1) / l0;
    }
    return x;
  }

  // Largest t with x + t*e in the cone boundary sense: max over cones of -lambda_min(x).
  double max_neg_eig(const Eigen::VectorXd& x) const {
    double t = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < l; ++i) t = std::max(t, -x[i]);
    for (std::size_t k = 0; k < q.size(); ++k) {
      const int o = offset[k], d = q[k];
      t = std::max(t, -(x[o] - x.segment(o + 1, d - 1).norm()));
    }
    return t;
  }

  // Largest step a in (0, inf] keeping x + a*dx inside the cone (x interior).
  double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const {
    double a = std::numeric_limits<double>::infinity();
    for (int i = 0; i < l; ++i)
      if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
    for (std::size_t k = 0; k < q.size(); ++k) {
      const int o = offset[k], d = q[k];
      const auto x1 = x.segment(o + 1, d - 1);
      const auto d1 = dx.segment(o + 1, d - 1);
      const double qa = dx[o] * dx[o] - d1.squaredNorm();
      const double qb = 2.0 * (x[o] * dx[o] - x1.dot(d1));
      const double qc = x[o] * x[o] - x1.squaredNorm();
      double root = std::numeric_limits<double>::infinity();
      if (qc <= 0.0) {
        root = 0.0;
      } else if (std::abs(qa) <= 1e-14 * (qb * qb + std::abs(qc))) {
        if (qb < 0.0) root = -qc / qb;
      } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          const double qq = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
          const double r1 = qq / qa;
          const double r2 = qq != 0.0 ? qc / qq : std::numeric_limits<double>::infinity();
          for (double r : {r1, r2})
            if (r > 0.0) root = std::min(root, r);
        }
      }
      if (dx[o] < 0.0) root = std::min(root, -x[o] / dx[o]);
      a = std::min(a, root);
    }
    return a;
  }
};

// Nesterov-Todd scaling W (symmetric) with W z = W^{-1} s = lambda.
struct Scaling {
  Eigen::VectorXd d;                 // nonneg part
  std::vector<Eigen::MatrixXd> W;    // SOC blocks
  std::vector<Eigen::MatrixXd> Winv;
  std::vector<Eigen::MatrixXd> W2;

  void compute(const Cones& c, const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
    d = (s.head(c.l).cwiseQuotient(z.head(c.l))).cwiseSqrt();
    W.resize(c.q.size());
    Winv.resize(c.q.size());
    W2.resize(c.q.size());
    for (std::size_t k = 0; k < c.q.size(); ++k) {
      const int o = c.offset[k], n = c.q[k];
      Eigen::VectorXd sk = s.segment(o, n), zk = z.segment(o, n);
      auto jnorm = [n](const Eigen::VectorXd& v) {
        return std::sqrt(std::max(v[0] * v[0] - v.tail(n - 1).squaredNorm(), 1e-300));
      };
      const double sn = jnorm(sk), zn = jnorm(zk);
      const double beta = std::sqrt(sn / zn);
      Eigen::VectorXd sb = sk / sn, zb = zk / zn;
      const double gam = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      Eigen::VectorXd jz = zb;
      jz.tail(n - 1) *= -1.0;
      Eigen::VectorXd wb = (sb + jz) / (2.0 * gam);
      Eigen::VectorXd v = wb;
      v[0] += 1.0;
      v /= std::sqrt(2.0 * (wb[0] + 1.0));
      Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
      J.bottomRightCorner(n - 1, n - 1) *= -1.0;
      W[k] = beta * (2.0 * v * v.transpose() - J);
      Eigen::VectorXd jv = J * v;
      Winv[k] = (2.0 * jv * jv.transpose() - J) / beta;
      W2[k] = W[k] * W[k];
    }
  }

  Eigen::VectorXd apply(const Cones& c, const Eigen::VectorXd& x, bool inverse) const {
    Eigen::VectorXd r(c.m);
    if (inverse) {
      r.head(c.l) = x.head(c.l).cwiseQuotient(d);
    } else {
      r.head(c.l) = x.head(c.l).cwiseProduct(d);
    }
    for (std::size_t k = 0; k < c.q.size(); ++k) {
      const int o = c.offset[k], n = c.q[k];
      r.segment(o, n) = (inverse ? Winv[k] : W[k]) * x.segment(o, n);
    }
    return r;
  }

  Eigen::VectorXd apply_sq(const Cones& c, const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(c.m);
    r.head(c.l) = x.head(c.l).cwiseProduct(d.cwiseProduct(d));
    for (std::size_t k = 0; k < c.q.size(); ++k) {
      const int o = c.offset[k], n = c.q[k];
      r.segment(o, n) = W2[k] * x.segment(o, n);
    }
    return r;
  }
};

}  // namespace conic_detail

class InteriorPointSolver : public ConicBackend {
 public:
  std::string name() const override { return "ipm-nt"; }

  ConicSolution solve(const ConeProblem& prob, const ConicSettings& st) override {
    using namespace conic_detail;
    using Eigen::VectorXd;
    prob.validate();
    const Cones cones(prob);
    const int n = prob.n();
    const int p = static_cast<int>(prob.b.size());
    const int m = cones.m;
    const int N = n + p + m;
    VectorXd pd = prob.p_diag.size() ? prob.p_diag : VectorXd::Zero(n);
    const Eigen::SparseMatrix<double> At = prob.A.transpose();
    const Eigen::SparseMatrix<double> Gt = prob.G.transpose();

    // KKT pattern (lower triangle) with slots for the scaling blocks.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n + p + prob.A.nonZeros() + prob.G.nonZeros() + m * 4));
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 0.0);
    for (int k = 0; k < prob.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(prob.A, k); it; ++it)
        trip.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < p; ++i) trip.emplace_back(n + i, n + i, 0.0);
    for (int k = 0; k < prob.G.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(prob.G, k); it; ++it)
        trip.emplace_back(n + p + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < cones.l; ++i) trip.emplace_back(n + p + i, n + p + i, 0.0);
    for (std::size_t k = 0; k < cones.q.size(); ++k)
      for (int c = 0; c < cones.q[k]; ++c)
        for (int r = c; r < cones.q[k]; ++r)
          trip.emplace_back(n + p + cones.offset[k] + r, n + p + cones.offset[k] + c, 0.0);
    Eigen::SparseMatrix<double> K(N, N);
    K.setFromTriplets(trip.begin(), trip.end());
    K.makeCompressed();
    auto slot = [&](int r, int c) -> double& {
      const int* inner = K.innerIndexPtr();
      const int b0 = K.outerIndexPtr()[c], b1 = K.outerIndexPtr()[c + 1];
      const int* it = std::lower_bound(inner + b0, inner + b1, r);
      return K.valuePtr()[it - inner];
    };
    std::vector<double*> xdiag(static_cast<std::size_t>(n)), ydiag(static_cast<std::size_t>(p)),
        ldiag(static_cast<std::size_t>(cones.l));
    for (int i = 0; i < n; ++i) xdiag[static_cast<std::size_t>(i)] = &slot(i, i);
    for (int i = 0; i < p; ++i) ydiag[static_cast<std::size_t>(i)] = &slot(n + i, n + i);
    for (int i = 0; i < cones.l; ++i) ldiag[static_cast<std::size_t>(i)] = &slot(n + p + i, n + p + i);
    std::vector<std::vector<double*>> qslots(cones.q.size());
    for (std::size_t k = 0; k < cones.q.size(); ++k)
      for (int c = 0; c < cones.q[k]; ++c)
        for (int r = c; r < cones.q[k]; ++r)
          qslots[k].push_back(&slot(n + p + cones.offset[k] + r, n + p + cones.offset[k] + c));

    double delta = st.static_reg;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    ldlt.analyzePattern(K);

    Scaling W;
    auto set_values = [&](bool identity_scaling) {
      for (int i = 0; i < n; ++i) *xdiag[static_cast<std::size_t>(i)] = pd[i] + delta;
      for (int i = 0; i < p; ++i) *ydiag[static_cast<std::size_t>(i)] = -delta;
      for (int i = 0; i < cones.l; ++i)
        *ldiag[static_cast<std::size_t>(i)] =
            -(identity_scaling ? 1.0 : W.d[i] * W.d[i]) - delta;
      for (std::size_t k = 0; k < cones.q.size(); ++k) {
        std::size_t t = 0;
        for (int c = 0; c < cones.q[k]; ++c)
          for (int r = c; r < cones.q[k]; ++r) {
            const double w2 = identity_scaling ? (r == c ? 1.0 : 0.0) : W.W2[k](r, c);
            *qslots[k][t++] = -w2 - (r == c ? delta : 0.0);
          }
      }
    };
    auto kkt_mul = [&](const VectorXd& v, bool identity_scaling) {
      VectorXd out(N);
      const auto vx = v.head(n), vy = v.segment(n, p), vz = v.tail(m);
      out.head(n) = pd.cwiseProduct(vx) + At * vy + Gt * vz;
      out.segment(n, p) = prob.A * vx;
      out.tail(m) = prob.G * vx - (identity_scaling ? VectorXd(vz) : W.apply_sq(cones, vz));
      return out;
    };
    auto kkt_solve = [&](const VectorXd& rhs, bool identity_scaling) {
      VectorXd sol = ldlt.solve(rhs);
      for (int i = 0; i < st.refine_steps; ++i) {
        VectorXd r = rhs - kkt_mul(sol, identity_scaling);
        sol += ldlt.solve(r);
      }
      return sol;
    };

    ConicSolution out;
    auto fail = [&](ConicStatus s) {
      out.status = s;
      return out;
    };

    // Starting point.
    set_values(true);
    ldlt.factorize(K);
    if (ldlt.info() != Eigen::Success) return fail(ConicStatus::NumericalError);
    VectorXd rhs(N);
    rhs << -prob.q, prob.b, prob.h;
    VectorXd sol = kkt_solve(rhs, true);
    VectorXd x = sol.head(n), y = sol.segment(n, p), z = sol.tail(m);
    VectorXd s = -z;
    VectorXd e;
    cones.identity(e);
    {
      const double ts = cones.max_neg_eig(s);
      if (ts >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + ts) * e;
      const double tz = cones.max_neg_eig(z);
      if (tz >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + tz) * e;
    }

    const double bnorm = std::max(1.0, prob.b.norm());
    const double hnorm = std::max(1.0, prob.h.norm());
    const double qnorm = std::max(1.0, prob.q.norm());
    double best_score = std::numeric_limits<double>::infinity();
    VectorXd bx, by, bz, bs;

    for (int it = 0; it <= st.max_iters; ++it) {
      const VectorXd rx = pd.cwiseProduct(x) + prob.q + At * y + Gt * z;
      const VectorXd ry = prob.A * x - prob.b;
      const VectorXd rz = prob.G * x + s - prob.h;
      const double gap = s.dot(z);
      const double pcost = 0.5 * x.dot(pd.cwiseProduct(x)) + prob.q.dot(x);
      const double pres = std::max(p ? ry.norm() / bnorm : 0.0, rz.norm() / hnorm);
      const double dres = rx.norm() / qnorm;
      const double relgap = gap / std::max(1.0, std::abs(pcost));
      out.iterations = it;
      if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap))
        return fail(ConicStatus::NumericalError);
      if (st.verbose)
        std::fprintf(stderr, "ipm %3d pcost % .10e pres %.2e dres %.2e gap %.2e\n", it, pcost,
                     pres, dres, gap);
      const bool feasible = pres <= st.feastol && dres <= st.feastol;
      const double score = std::max({pres, dres, std::min(gap, relgap)});
      if (score < best_score) {
        best_score = score;
        out.x = x;
        out.y = y;
        out.z = z;
        out.s = s;
        out.objective = pcost;
        out.pres = pres;
        out.dres = dres;
        out.gap = gap;
      }
      if (feasible && (gap <= st.abstol || relgap <= st.reltol)) {
        out.x = x;
        out.y = y;
        out.z = z;
        out.s = s;
        out.objective = pcost;
        out.pres = pres;
        out.dres = dres;
        out.gap = gap;
        out.status = ConicStatus::Solved;
        return out;
      }
      if (it == st.max_iters) break;

      W.compute(cones, s, z);
      const VectorXd lam = W.apply(cones, z, false);
      // Raise the regularization when a pivot vanishes; refinement against
      // the exact KKT operator absorbs the perturbation.
      delta = st.static_reg;
      set_values(false);
      ldlt.factorize(K);
      while (ldlt.info() != Eigen::Success && delta < 1e-4) {
        delta *= 100.0;
        set_values(false);
        ldlt.factorize(K);
      }
      if (ldlt.info() != Eigen::Success) {
        if (st.verbose) std::fprintf(stderr, "ipm: KKT factorization failed\n");
        break;
      }

      auto newton = [&](const VectorXd& rhs_s, VectorXd& dx, VectorXd& dy, VectorXd& dz,
                        VectorXd& ds) {
        const VectorXd t = cones.divide(lam, rhs_s);
        VectorXd r(N);
        r << -rx, -ry, -rz - W.apply(cones, t, false);
        const VectorXd d = kkt_solve(r, false);
        dx = d.head(n);
        dy = d.segment(n, p);
        dz = d.tail(m);
        ds = W.apply(cones, VectorXd(t - W.apply(cones, dz, false)), false);
      };

      // Predictor.
      VectorXd dxa, dya, dza, dsa;
      newton(-cones.prod(lam, lam), dxa, dya, dza, dsa);
      double aa = std::min(cones.max_step(s, dsa), cones.max_step(z, dza));
      aa = std::min(1.0, aa);
      const double gap_aff = (s + aa * dsa).dot(z + aa * dza);
      const double sigma = std::pow(std::clamp(gap_aff / gap, 0.0, 1.0), 3);
      const double mu = gap / cones.degree;

      // Corrector.
      const VectorXd corr =
          cones.prod(W.apply(cones, dsa, true), W.apply(cones, dza, false));
      VectorXd dx, dy, dz, ds;
      newton(-cones.prod(lam, lam) - corr + sigma * mu * e, dx, dy, dz, ds);
      double a = std::min(cones.max_step(s, ds), cones.max_step(z, dz));
      a = std::min(1.0, 0.99 * a);
      if (!(a > 0.0) || !dx.allFinite()) {
        if (st.verbose) std::fprintf(stderr, "ipm: bad step %.3e\n", a);
        break;
      }
      x += a * dx;
      y += a * dy;
      z += a * dz;
      s += a * ds;
    }

    // Accept a slightly looser point rather than failing outright.
    const double loose = 1e3;
    if (out.pres <= loose * st.feastol && out.dres <= loose * st.feastol &&
        (out.gap <= loose * st.abstol ||
         out.gap / std::max(1.0, std::abs(out.objective)) <= loose * st.reltol)) {
      out.status = ConicStatus::AlmostSolved;
    } else {
      out.status = out.x.size() ? ConicStatus::MaxIterations : ConicStatus::NumericalError;
    }
    return out;
  }
};

}  // namespace rlv
