// Conic solver, trust-region rule, hull and sampling.

#include "support.hpp"

#include <rlv/reach.hpp>

#include <gtest/gtest.h>

#include <map>

namespace rlv {
namespace {

Eigen::SparseMatrix<double> sparse(const Eigen::MatrixXd& M) { return M.sparseView(); }

ConeProblem empty_problem(int n) {
  ConeProblem p;
  p.q = Eigen::VectorXd::Zero(n);
  p.A.resize(0, n);
  p.b.resize(0);
  p.G.resize(0, n);
  p.h.resize(0);
  return p;
}

// Max of the KKT residuals, scaled by the data.
double kkt_residual(const ConeProblem& p, const ConicSolution& s) {
  Eigen::VectorXd r = p.q + p.A.transpose() * s.y + p.G.transpose() * s.z;
  if (p.p_diag.size()) r += p.p_diag.cwiseProduct(s.x);
  double res = r.lpNorm<Eigen::Infinity>();
  if (p.b.size()) res = std::max(res, (p.A * s.x - p.b).lpNorm<Eigen::Infinity>());
  if (p.h.size()) {
    res = std::max(res, (p.G * s.x + s.s - p.h).lpNorm<Eigen::Infinity>());
    res = std::max(res, std::abs(s.s.dot(s.z)));
  }
  return res;
}

bool in_cone(const ConeProblem& p, const Eigen::VectorXd& v, double tol) {
  for (int i = 0; i < p.n_nonneg; ++i)
    if (v[i] < -tol) return false;
  int o = p.n_nonneg;
  for (int d : p.soc_dims) {
    if (v.segment(o + 1, d - 1).norm() > v[o] + tol) return false;
    o += d;
  }
  return true;
}

TEST(Conic, LinearProgramVertex) {
  // min -x - 2y  s.t.  x + y <= 4, x <= 3, x, y >= 0  ->  (0, 4).
  ConeProblem p = empty_problem(2);
  p.q << -1.0, -2.0;
  Eigen::MatrixXd G(4, 2);
  G << 1, 1, 1, 0, -1, 0, 0, -1;
  p.G = sparse(G);
  p.h.resize(4);
  p.h << 4, 3, 0, 0;
  p.n_nonneg = 4;
  const auto s = InteriorPointSolver().solve(p, {});
  ASSERT_TRUE(s.usable()) << to_string(s.status);
  EXPECT_NEAR(s.x[0], 0.0, 1e-7);
  EXPECT_NEAR(s.x[1], 4.0, 1e-7);
  EXPECT_NEAR(s.objective, -8.0, 1e-7);
  EXPECT_LE(kkt_residual(p, s), 1e-7);
}

TEST(Conic, SecondOrderConeNorm) {
  // min t  s.t. ||(a, b)|| <= t, a = 3, b = 4.
  ConeProblem p = empty_problem(3);
  p.q << 1.0, 0.0, 0.0;
  Eigen::MatrixXd A(2, 3);
  A << 0, 1, 0, 0, 0, 1;
  p.A = sparse(A);
  p.b.resize(2);
  p.b << 3.0, 4.0;
  p.G = sparse(-Eigen::MatrixXd::Identity(3, 3));
  p.h = Eigen::VectorXd::Zero(3);
  p.soc_dims = {3};
  const auto s = InteriorPointSolver().solve(p, {});
  ASSERT_TRUE(s.usable());
  EXPECT_NEAR(s.x[0], 5.0, 1e-7);
  // Dual of the cone constraint is the unit normal direction (1, -3/5, -4/5).
  EXPECT_NEAR(s.z[0], 1.0, 1e-6);
  EXPECT_NEAR(s.z[1], -0.6, 1e-6);
  EXPECT_NEAR(s.z[2], -0.8, 1e-6);
}

TEST(Conic, DiagonalQuadraticWithBounds) {
  // min sum 0.5 x_i^2 - c_i x_i  with x_i <= 1: x_i = min(c_i, 1).
  const int n = 5;
  ConeProblem p = empty_problem(n);
  p.p_diag = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd c(n);
  c << -2.0, 0.3, 0.99, 1.5, 7.0;
  p.q = -c;
  p.G = sparse(Eigen::MatrixXd::Identity(n, n));
  p.h = Eigen::VectorXd::Ones(n);
  p.n_nonneg = n;
  const auto s = InteriorPointSolver().solve(p, {});
  ASSERT_TRUE(s.usable());
  for (int i = 0; i < n; ++i) EXPECT_NEAR(s.x[i], std::min(c[i], 1.0), 1e-6) << i;
}

TEST(Conic, RandomMixedConeKkt) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 12, me = 3;
    ConeProblem p = empty_problem(n);
    // Feasible by construction: x0 strictly inside the cones.
    const Eigen::VectorXd x0 = Eigen::VectorXd::NullaryExpr(n, [&] { return N(rng); });
    Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(me, n, [&] { return N(rng); });
    p.A = sparse(A);
    p.b = A * x0;
    p.n_nonneg = 6;
    p.soc_dims = {4, 3};
    const int m = 13;
    Eigen::MatrixXd G = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return N(rng); });
    Eigen::VectorXd s0 = Eigen::VectorXd::Ones(m);
    s0.segment(6, 4) << 2.0, 0.3, -0.5, 0.1;
    s0.segment(10, 3) << 1.5, 0.2, 0.7;
    p.G = sparse(G);
    p.h = G * x0 + s0;
    p.p_diag = Eigen::VectorXd::NullaryExpr(n, [&] { return std::abs(N(rng)) + 0.1; });
    p.q = Eigen::VectorXd::NullaryExpr(n, [&] { return N(rng); });
    const auto s = InteriorPointSolver().solve(p, {});
    ASSERT_EQ(s.status, ConicStatus::Solved) << trial;
    EXPECT_LE(kkt_residual(p, s), 1e-7) << trial;
    EXPECT_TRUE(in_cone(p, s.s, 1e-9));
    EXPECT_TRUE(in_cone(p, s.z, 1e-9));
  }
}

TEST(Conic, ValidateRejectsBadShapes) {
  ConeProblem p = empty_problem(2);
  p.G.resize(3, 2);
  p.h = Eigen::VectorXd::Zero(3);
  p.n_nonneg = 2;
  EXPECT_THROW(p.validate(), InvalidInput);
  p.n_nonneg = 0;
  p.soc_dims = {1, 2};
  EXPECT_THROW(p.validate(), InvalidInput);
}

// ---------------------------------------------------------------------------

TEST(TrustRegion, RatioTable) {
  const ScpParams p;
  const std::vector<std::pair<double, TrustDecision>> table = {
      {-0.1, TrustDecision::RejectTighten}, {0.1, TrustDecision::AcceptTighten},
      {0.5, TrustDecision::AcceptHold},     {0.9, TrustDecision::AcceptRelax},
      {std::nan(""), TrustDecision::RejectTighten}};
  for (const auto& [rho, want] : table) EXPECT_EQ(trust_decision(rho, p), want) << rho;
  EXPECT_FALSE(accepts(TrustDecision::RejectTighten));
  EXPECT_TRUE(accepts(TrustDecision::AcceptHold));
}

TEST(TrustRegion, WeightUpdatesAndClamp) {
  ScpParams p;
  EXPECT_EQ(update_weight(4.0, TrustDecision::AcceptHold, p), 4.0);
  EXPECT_EQ(update_weight(4.0, TrustDecision::AcceptTighten, p), 4.0 * p.beta);
  EXPECT_EQ(update_weight(4.0, TrustDecision::AcceptRelax, p), 4.0 / p.alpha);
  EXPECT_EQ(update_weight(4.0, TrustDecision::RejectTighten, p), 4.0 * p.reject_factor);
  EXPECT_EQ(update_weight(p.w_max, TrustDecision::RejectTighten, p), p.w_max);
  EXPECT_EQ(update_weight(p.w_min, TrustDecision::AcceptRelax, p), p.w_min);
  p.rho1 = p.rho0;
  EXPECT_THROW(p.validate(), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(Hull, TetrahedronAndInteriorPoint) {
  ConvexHull3 h;
  h.insert(Vec3d(0, 0, 0), 0);
  h.insert(Vec3d(1, 0, 0), 1);
  h.insert(Vec3d(0, 1, 0), 2);
  EXPECT_EQ(h.dimension(), 2);
  EXPECT_EQ(h.volume(), 0.0);
  h.insert(Vec3d(0, 0, 1), 3);
  EXPECT_EQ(h.dimension(), 3);
  EXPECT_NEAR(h.volume(), 1.0 / 6.0, 1e-15);
  EXPECT_FALSE(h.insert(Vec3d(0.25, 0.25, 0.25), 4));
  EXPECT_EQ(h.vertices().size(), 4u);
  EXPECT_NEAR(h.volume(), 1.0 / 6.0, 1e-15);
  EXPECT_TRUE(h.contains(Vec3d(0.1, 0.1, 0.1)));
  EXPECT_FALSE(h.contains(Vec3d(0.5, 0.5, 0.5)));
}

TEST(Hull, OutwardNormalsAndEulerCount) {
  ConvexHull3 h;
  int key = 0;
  for (int i = 0; i < 8; ++i) h.insert(Vec3d(i & 1, (i >> 1) & 1, (i >> 2) & 1), key++);
  EXPECT_NEAR(h.volume(), 1.0, 1e-14);
  EXPECT_NEAR(h.surface_area(), 6.0, 1e-14);
  const Vec3d c(0.5, 0.5, 0.5);
  for (const auto& f : h.facets()) EXPECT_LT(h.facet_distance(f, c), 0.0);
  const auto V = h.vertices().size(), F = h.facets().size();
  EXPECT_EQ(V, 8u);
  EXPECT_EQ(F, 2 * V - 4);
}

TEST(Hull, RandomPointsMatchBruteForce) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> N(0.0, 100.0);
  ConvexHull3 h;
  std::vector<Vec3d> pts;
  double prev = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3d p(N(rng), N(rng), 0.3 * N(rng));
    pts.push_back(p);
    h.insert(p, i);
    EXPECT_GE(h.volume(), prev - 1e-9 * std::abs(prev));
    prev = h.volume();
  }
  const double ref = testing::brute_force_hull_volume(pts);
  EXPECT_NEAR(h.volume() / ref, 1.0, 1e-9);
  for (const auto& p : pts) EXPECT_TRUE(h.contains(p));
}

TEST(Hull, CoplanarAndCollinearInputs) {
  ConvexHull3 h;
  for (int i = 0; i < 5; ++i) h.insert(Vec3d(i, 2.0 * i, 0.0), i);
  EXPECT_EQ(h.dimension(), 1);
  h.insert(Vec3d(0, 1, 0), 10);
  h.insert(Vec3d(3, -1, 0), 11);
  EXPECT_EQ(h.dimension(), 2);
  EXPECT_EQ(h.volume(), 0.0);
  h.insert(Vec3d(1, 1, 5), 12);
  EXPECT_EQ(h.dimension(), 3);
  EXPECT_GT(h.volume(), 0.0);
  EXPECT_THROW(h.insert(Vec3d(std::nan(""), 0, 0), 13), InvalidInput);
}

// ---------------------------------------------------------------------------

TEST(Rng, CounterStreamsAreReproducible) {
  CounterRng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
    EXPECT_NE(x, d.next_u64());
  }
  CounterRng u(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    EXPECT_NEAR(u.unit_vector().norm(), 1.0, 1e-15);
  }
}

TEST(SurfaceSampling, AreaWeightedOnCube) {
  ConvexHull3 h;
  for (int i = 0; i < 8; ++i) h.insert(Vec3d(i & 1, (i >> 1) & 1, (i >> 2) & 1), i);
  CounterRng rng(123, 0);
  const int n = 10000;
  std::map<std::tuple<int, int, int>, int> per_face;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_surface(h, rng);
    ASSERT_GE(s.facet, 0);
    const auto& f = h.facets()[static_cast<std::size_t>(s.facet)];
    EXPECT_NEAR(h.facet_distance(f, s.origin), 0.0, 1e-12);
    EXPECT_GE(s.direction.dot(f.normal), 0.0);
    EXPECT_NEAR(s.direction.norm(), 1.0, 1e-14);
    const Vec3d nrm = f.normal.array().round();
    ++per_face[{int(nrm[0]), int(nrm[1]), int(nrm[2])}];
  }
  ASSERT_EQ(per_face.size(), 6u);
  const double mean = n / 6.0, sd = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
  for (const auto& [face, count] : per_face) EXPECT_NEAR(count, mean, 3.0 * sd);
}

TEST(SurfaceSampling, DegeneratePhases) {
  ConvexHull3 h;
  CounterRng rng(1, 1);
  EXPECT_THROW(sample_surface(h, rng), InvalidInput);
  h.insert(Vec3d(1, 2, 3), 0);
  auto s = sample_surface(h, rng);
  EXPECT_EQ(s.origin, Vec3d(1, 2, 3));
  EXPECT_EQ(s.facet, -1);
  h.insert(Vec3d(3, 2, 3), 1);
  s = sample_surface(h, rng);
  EXPECT_NEAR(s.origin[1], 2.0, 0.0);
  EXPECT_GE(s.origin[0], 1.0);
  EXPECT_LE(s.origin[0], 3.0);
}

}  // namespace
}  // namespace rlv
