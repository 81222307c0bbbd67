#pragma once

// Body and fin aerodynamic coefficient tables.
//
// Table values are dimensional: force tables hold rho0*A*C (kg/m) and the
// moment table holds rho0*A*l*C (kg). Multiplying by rho_r*|v|^2/2 gives N and
// N*m. Fin bound tables are dimensionless limits on the normalized fin command.

#include <rlv/types.hpp>

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace rlv {

namespace detail {

inline void check_breakpoints(const std::vector<double>& bp, const char* what) {
  if (bp.empty()) throw DataError(std::string(what) + ": no breakpoints");
  for (std::size_t i = 0; i < bp.size(); ++i) {
    if (!std::isfinite(bp[i])) throw DataError(std::string(what) + ": non-finite breakpoint");
    if (i > 0 && !(bp[i] > bp[i - 1]))
      throw DataError(std::string(what) + ": breakpoints not strictly increasing");
  }
}

template <class T> struct Cell {
  std::size_t i0;
  std::size_t i1;
  T t;  // weight of i1
};

// Locates x in a breakpoint vector. Queries outside the range are clamped and
// carry no derivative; at an interior breakpoint the right-hand cell is used.
template <class T> Cell<T> locate(const std::vector<double>& bp, const T& x) {
  const double xv = value_of(x);
  if (!std::isfinite(xv)) throw InvalidInput("interpolation: non-finite query");
  const std::size_t n = bp.size();
  if (n == 1) return {0, 0, constant_like(x, 0.0)};
  if (xv < bp.front()) return {0, 1, constant_like(x, 0.0)};
  if (xv >= bp.back()) return {n - 2, n - 1, constant_like(x, 1.0)};
  const auto it = std::upper_bound(bp.begin(), bp.end(), xv);
  const std::size_t i = static_cast<std::size_t>(it - bp.begin()) - 1;
  return {i, i + 1, (x - bp[i]) / (bp[i + 1] - bp[i])};
}

}  // namespace detail

struct Grid1 {
  std::vector<double> mach;
  std::vector<double> values;

  void validate(const char* what = "grid1") const {
    detail::check_breakpoints(mach, what);
    if (values.size() != mach.size()) throw DataError(std::string(what) + ": size mismatch");
    for (double v : values)
      if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite value");
  }
};

struct Grid2 {
  std::vector<double> alpha;  // deg
  std::vector<double> mach;
  Eigen::MatrixXd values;     // alpha.size() x mach.size()

  void validate(const char* what = "grid2") const {
    detail::check_breakpoints(alpha, what);
    detail::check_breakpoints(mach, what);
    if (alpha.front() < 0.0) throw DataError(std::string(what) + ": negative alpha breakpoint");
    if (values.rows() != static_cast<Eigen::Index>(alpha.size()) ||
        values.cols() != static_cast<Eigen::Index>(mach.size()))
      throw DataError(std::string(what) + ": value dimensions do not match breakpoints");
    if (!values.allFinite()) throw DataError(std::string(what) + ": non-finite value");
  }
};

struct Grid3 {
  std::vector<double> mach;
  std::vector<double> alpha1;  // deg
  std::vector<double> alpha2;  // deg
  std::vector<double> values;  // row-major [mach][alpha1][alpha2]

  std::size_t index(std::size_t im, std::size_t i1, std::size_t i2) const {
    return (im * alpha1.size() + i1) * alpha2.size() + i2;
  }
  double at(std::size_t im, std::size_t i1, std::size_t i2) const {
    return values[index(im, i1, i2)];
  }

  void validate(const char* what = "grid3") const {
    detail::check_breakpoints(mach, what);
    detail::check_breakpoints(alpha1, what);
    detail::check_breakpoints(alpha2, what);
    if (values.size() != mach.size() * alpha1.size() * alpha2.size())
      throw DataError(std::string(what) + ": value count does not match breakpoints");
    for (double v : values)
      if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite value");
  }
};

template <class T> T interp1(const Grid1& g, const T& mach) {
  auto c = detail::locate(g.mach, mach);
  return g.values[c.i0] + c.t * (g.values[c.i1] - g.values[c.i0]);
}

template <class T> T interp2(const Grid2& g, const T& alpha_deg, const T& mach) {
  auto a = detail::locate(g.alpha, alpha_deg);
  auto m = detail::locate(g.mach, mach);
  const auto& V = g.values;
  const T v0 = V(a.i0, m.i0) + a.t * (V(a.i1, m.i0) - V(a.i0, m.i0));
  const T v1 = V(a.i0, m.i1) + a.t * (V(a.i1, m.i1) - V(a.i0, m.i1));
  return v0 + m.t * (v1 - v0);
}

inline double interp2(const Grid2& g, double alpha_deg, double mach) {
  return interp2<double>(g, alpha_deg, mach);
}

template <class T>
T interp3(const Grid3& g, const T& mach, const T& alpha1_deg, const T& alpha2_deg) {
  auto m = detail::locate(g.mach, mach);
  auto a = detail::locate(g.alpha1, alpha1_deg);
  auto b = detail::locate(g.alpha2, alpha2_deg);
  auto lerp2 = [&](std::size_t im) {
    const T lo = g.at(im, a.i0, b.i0) + b.t * (g.at(im, a.i0, b.i1) - g.at(im, a.i0, b.i0));
    const T hi = g.at(im, a.i1, b.i0) + b.t * (g.at(im, a.i1, b.i1) - g.at(im, a.i1, b.i0));
    return T(lo + a.t * (hi - lo));
  };
  const T v0 = lerp2(m.i0);
  const T v1 = lerp2(m.i1);
  return v0 + m.t * (v1 - v0);
}

inline double interp3(const Grid3& g, double mach, double alpha1_deg, double alpha2_deg) {
  return interp3<double>(g, mach, alpha1_deg, alpha2_deg);
}

struct AeroDatabase {
  Grid2 cd_body;
  Grid2 cl_mod;
  Grid2 cm_mod;
  std::array<Grid3, 2> fin_lift_scale;
  std::array<Grid3, 2> fin_bound_lo;
  std::array<Grid3, 2> fin_bound_hi;
  Grid1 polar_lin;
  Grid1 polar_cst;
  std::string reference_area_note;

  void validate() const {
    cd_body.validate("cd_body");
    cl_mod.validate("cl_mod");
    cm_mod.validate("cm_mod");
    for (const Grid2* g : {&cl_mod, &cm_mod}) {
      if (g->alpha.front() != 0.0)
        throw DataError("modified table must start at alpha = 0");
      for (Eigen::Index j = 0; j < g->values.cols(); ++j)
        if (g->values(0, j) != 0.0)
          throw DataError("modified table must be exactly 0 at alpha = 0");
    }
    for (int i = 0; i < 2; ++i) {
      fin_lift_scale[i].validate("fin_lift_scale");
      fin_bound_lo[i].validate("fin_bound_lo");
      fin_bound_hi[i].validate("fin_bound_hi");
      if (fin_bound_lo[i].values.size() != fin_bound_hi[i].values.size())
        throw DataError("fin bound tables differ in size");
      for (std::size_t k = 0; k < fin_bound_lo[i].values.size(); ++k) {
        if (fin_bound_lo[i].values[k] > 0.0 || fin_bound_hi[i].values[k] < 0.0)
          throw DataError("fin bounds must satisfy lo <= 0 <= hi");
      }
    }
    polar_lin.validate("polar_lin");
    polar_cst.validate("polar_cst");
  }
};

// C*csc(alpha) with an exact zero row at alpha = 0.
inline Grid2 build_modified_table(const Grid2& raw) {
  raw.validate("raw table");
  Grid2 out;
  out.mach = raw.mach;
  const bool has_zero = raw.alpha.front() == 0.0;
  if (has_zero) {
    for (Eigen::Index j = 0; j < raw.values.cols(); ++j)
      if (raw.values(0, j) != 0.0)
        throw DataError("build_modified_table: nonzero coefficient at alpha = 0");
  }
  out.alpha.push_back(0.0);
  for (double a : raw.alpha)
    if (a > 0.0) out.alpha.push_back(a);
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.alpha.size()), raw.values.cols());
  const Eigen::Index offset = has_zero ? 0 : 1;
  for (Eigen::Index i = has_zero ? 1 : 0; i < raw.values.rows(); ++i) {
    const double s = std::sin(raw.alpha[static_cast<std::size_t>(i)] * kDegToRad);
    out.values.row(i + offset) = raw.values.row(i) / s;
  }
  return out;
}

struct FinBounds {
  Vec2d lo;
  Vec2d hi;
};

template <class T> struct FinBoundsT {
  Vec2<T> lo;
  Vec2<T> hi;
};

template <class T>
FinBoundsT<T> fin_bounds(const AeroDatabase& db, const T& mach, const T& alpha1_deg,
                         const T& alpha2_deg) {
  FinBoundsT<T> b;
  for (int i = 0; i < 2; ++i) {
    b.lo[i] = interp3(db.fin_bound_lo[i], mach, alpha1_deg, alpha2_deg);
    b.hi[i] = interp3(db.fin_bound_hi[i], mach, alpha1_deg, alpha2_deg);
  }
  return b;
}

inline FinBounds fin_bounds(const AeroDatabase& db, double mach, double alpha1_deg,
                            double alpha2_deg) {
  auto b = fin_bounds<double>(db, mach, alpha1_deg, alpha2_deg);
  return {b.lo, b.hi};
}

// ---------------------------------------------------------------------------
// Drag polar fit

struct PolarSample {
  double mach;
  double alpha1_deg;
  double alpha2_deg;
  double f_l1;
  double f_l2;
  double f_d;
};

struct PolarFit {
  Grid1 lin;
  Grid1 cst;
};

namespace detail {

struct HullPoint {
  double x;  // f_l1^2 + f_l2^2
  double y;  // f_d
  const PolarSample* s;
};

inline double cross2(const HullPoint& o, const HullPoint& a, const HullPoint& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Lower convex chain of (x, y); collinear points on the chain are kept.
inline std::vector<HullPoint> lower_chain(std::vector<HullPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const HullPoint& a, const HullPoint& b) {
    return std::tie(a.x, a.y, a.s->f_l1, a.s->f_l2) < std::tie(b.x, b.y, b.s->f_l1, b.s->f_l2);
  });
  std::vector<HullPoint> out;
  for (const auto& p : pts) {
    if (!out.empty() && out.back().x == p.x) continue;  // keep lowest y per x
    while (out.size() >= 2 && cross2(out[out.size() - 2], out.back(), p) < 0.0) out.pop_back();
    out.push_back(p);
  }
  return out;
}

}  // namespace detail

inline PolarFit fit_drag_polar(const std::vector<PolarSample>& samples) {
  std::map<double, std::map<std::pair<double, double>, std::vector<const PolarSample*>>> bins;
  for (const auto& s : samples) {
    if (!std::isfinite(s.mach) || !std::isfinite(s.alpha1_deg) || !std::isfinite(s.alpha2_deg) ||
        !std::isfinite(s.f_l1) || !std::isfinite(s.f_l2) || !std::isfinite(s.f_d))
      throw DataError("fit_drag_polar: non-finite sample");
    bins[s.mach][{s.alpha1_deg, s.alpha2_deg}].push_back(&s);
  }
  if (bins.empty()) throw DataError("fit_drag_polar: no samples");

  PolarFit fit;
  for (const auto& [mach, groups] : bins) {
    std::size_t count = 0;
    bool any_lift = false;
    std::vector<detail::HullPoint> surface;
    for (const auto& [angles, members] : groups) {
      std::vector<detail::HullPoint> pts;
      for (const PolarSample* s : members) {
        count++;
        if (s->f_l1 != 0.0 || s->f_l2 != 0.0) any_lift = true;
        pts.push_back({s->f_l1 * s->f_l1 + s->f_l2 * s->f_l2, s->f_d, s});
      }
      auto chain = detail::lower_chain(std::move(pts));
      surface.insert(surface.end(), chain.begin(), chain.end());
    }
    const std::string bin = "mach bin " + std::to_string(mach);
    if (count < 3) throw DataError("fit_drag_polar: fewer than 3 samples in " + bin);
    if (!any_lift) throw DataError("fit_drag_polar: all lift values zero in " + bin);

    Eigen::MatrixXd A(static_cast<Eigen::Index>(surface.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(surface.size()));
    for (std::size_t k = 0; k < surface.size(); ++k) {
      const PolarSample& s = *surface[k].s;
      const double c1 = std::cos(s.alpha1_deg * kDegToRad);
      const double c2 = std::cos(s.alpha2_deg * kDegToRad);
      const auto r = static_cast<Eigen::Index>(k);
      A(r, 0) = c2 * s.f_l1 * s.f_l1 + c1 * s.f_l2 * s.f_l2;
      A(r, 1) = s.f_l1 * s.f_l1 + s.f_l2 * s.f_l2;
      b(r) = s.f_d;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 2)
      throw DataError("fit_drag_polar: degenerate data (rank-deficient fit) in " + bin);
    Eigen::Vector2d c = qr.solve(b);
    fit.lin.mach.push_back(mach);
    fit.lin.values.push_back(c[0]);
    fit.cst.mach.push_back(mach);
    fit.cst.values.push_back(c[1]);
  }
  return fit;
}

}  // namespace rlv
