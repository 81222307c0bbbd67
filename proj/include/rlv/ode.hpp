#pragma once

// Adaptive Dormand-Prince 5(4) integrator with FSAL reuse.

#include <rlv/types.hpp>

#include <algorithm>

namespace rlv {

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h_init = 0.0;  // 0 picks a starting step automatically
  long max_steps = 200000;
  // Components [0, error_dim) take part in error control; -1 means all.
  int error_dim = -1;
};

struct OdeStats {
  long steps = 0;
  long rejected = 0;
  long evaluations = 0;
};

// Integrates y' = f(t, y) from t0 to t1 in place. f(t, y, dydt) must fill dydt.
// Throws PropagationError(segment) on step-size underflow or non-finite state.
template <class F>
OdeStats dopri5(F&& f, double t0, double t1, Eigen::VectorXd& y, const OdeOptions& opt,
                int segment = -1) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeStats st;
  const Eigen::Index n = y.size();
  const Eigen::Index ne = opt.error_dim < 0 ? n : std::min<Eigen::Index>(opt.error_dim, n);
  const double span = t1 - t0;
  if (span == 0.0) return st;
  const double dir = span > 0 ? 1.0 : -1.0;

  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
  f(t0, y, k1);
  st.evaluations++;

  auto weighted_norm = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& ya,
                           const Eigen::VectorXd& yb) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < ne; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      const double r = e[i] / sc;
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(ne));
  };

  double h = opt.h_init;
  if (!(h > 0.0)) {
    const double d0 = weighted_norm(y, y, y);
    const double d1 = weighted_norm(k1, y, y);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, std::abs(span));
  }
  h = std::min(h, std::abs(span)) * dir;

  double t = t0;
  while ((t1 - t) * dir > 0.0) {
    if (st.steps + st.rejected >= opt.max_steps)
      throw PropagationError("integrator: maximum step count exceeded", segment);
    if ((t + h - t1) * dir > 0.0) h = t1 - t;
    if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t)))
      throw PropagationError("integrator: step size underflow", segment);

    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + h, ynew, k7);
    st.evaluations += 6;
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double en = weighted_norm(err, y, ynew);
    if (!std::isfinite(en)) en = 1e10;
    if (en <= 1.0) {
      t = (std::abs(t1 - (t + h)) <= 1e-15 * std::max(1.0, std::abs(t1))) ? t1 : t + h;
      y.swap(ynew);
      k1.swap(k7);
      st.steps++;
      if (!y.allFinite()) throw PropagationError("integrator: non-finite state", segment);
      const double fac = en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
      h *= fac;
    } else {
      st.rejected++;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
    }
  }
  return st;
}

}  // namespace rlv
