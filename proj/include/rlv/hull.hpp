#pragma once

// Incremental 3D convex hull. Grows through the degenerate point, segment
// and polygon phases before switching to a closed triangle mesh.

#include <rlv/types.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace rlv {

struct HullVertex {
  Vec3d p;
  std::int64_t key = -1;
};

struct HullFacet {
  std::array<int, 3> v{};  // indices into vertices(), counter-clockwise seen from outside
  Vec3d normal = Vec3d::Zero();
  double area = 0.0;
};

class ConvexHull3 {
 public:
  // Points closer than rel_eps times the coordinate scale count as coincident,
  // collinear or coplanar.
  explicit ConvexHull3(double rel_eps = 1e-10) : rel_eps_(rel_eps) {}

  // Returns true when the hull changed.
  bool insert(const Vec3d& p, std::int64_t key) {
    if (!p.allFinite()) throw InvalidInput("hull: non-finite point");
    scale_ = std::max(scale_, p.cwiseAbs().maxCoeff());
    switch (dim_) {
      case -1:
        verts_.push_back({p, key});
        dim_ = 0;
        return true;
      case 0: return insert_dim0(p, key);
      case 1: return insert_dim1(p, key);
      case 2: return insert_dim2(p, key);
      default: return insert_dim3(p, key);
    }
  }

  // -1 when empty, else the dimension of the affine hull.
  int dimension() const { return dim_; }
  const std::vector<HullVertex>& vertices() const { return verts_; }
  // For a 2D hull these triangulate the polygon, normals along the plane normal.
  const std::vector<HullFacet>& facets() const { return faces_; }
  double eps() const { return rel_eps_ * std::max(1.0, scale_); }

  double volume() const {
    if (dim_ < 3) return 0.0;
    const Vec3d& o = verts_[0].p;
    double v = 0.0;
    for (const auto& f : faces_) {
      const Vec3d a = verts_[f.v[0]].p - o, b = verts_[f.v[1]].p - o, c = verts_[f.v[2]].p - o;
      v += a.dot(b.cross(c));
    }
    return v / 6.0;
  }

  double surface_area() const {
    double a = 0.0;
    for (const auto& f : faces_) a += f.area;
    return a;
  }

  // Signed distance of p above facet f.
  double facet_distance(const HullFacet& f, const Vec3d& p) const {
    return f.normal.dot(p - verts_[f.v[0]].p);
  }

  bool contains(const Vec3d& p) const {
    if (dim_ < 3) return false;
    for (const auto& f : faces_)
      if (facet_distance(f, p) > eps()) return false;
    return true;
  }

 private:
  double rel_eps_;
  double scale_ = 0.0;
  int dim_ = -1;
  std::vector<HullVertex> verts_;
  std::vector<HullFacet> faces_;
  Vec3d plane_n_ = Vec3d::Zero();  // 2D phase

  HullFacet make_facet(int a, int b, int c) const {
    HullFacet f;
    f.v = {a, b, c};
    const Vec3d n = (verts_[b].p - verts_[a].p).cross(verts_[c].p - verts_[a].p);
    const double len = n.norm();
    f.area = 0.5 * len;
    f.normal = len > 0.0 ? Vec3d(n / len) : Vec3d::Zero();
    return f;
  }

  bool insert_dim0(const Vec3d& p, std::int64_t key) {
    if ((p - verts_[0].p).norm() <= eps()) return false;
    verts_.push_back({p, key});
    dim_ = 1;
    return true;
  }

  bool insert_dim1(const Vec3d& p, std::int64_t key) {
    const Vec3d a = verts_[0].p, b = verts_[1].p;
    const Vec3d u = (b - a).normalized();
    const Vec3d ap = p - a;
    const double t = ap.dot(u);
    if ((ap - t * u).norm() > eps()) {
      verts_.push_back({p, key});
      dim_ = 2;
      plane_n_ = (b - a).cross(p - a).normalized();
      rebuild_polygon();
      return true;
    }
    const double len = (b - a).norm();
    if (t < -eps()) {
      verts_[0] = {p, key};
      return true;
    }
    if (t > len + eps()) {
      verts_[1] = {p, key};
      return true;
    }
    return false;
  }

  // 2D hull of verts_ in the plane (monotone chain), counter-clockwise about plane_n_.
  void rebuild_polygon() {
    const Vec3d o = verts_[0].p;
    Vec3d e1 = plane_n_.unitOrthogonal();
    Vec3d e2 = plane_n_.cross(e1);
    struct P2 {
      double x, y;
      int i;
    };
    std::vector<P2> pts;
    for (int i = 0; i < static_cast<int>(verts_.size()); ++i) {
      const Vec3d d = verts_[i].p - o;
      pts.push_back({d.dot(e1), d.dot(e2), i});
    }
    std::sort(pts.begin(), pts.end(), [](const P2& a, const P2& b) {
      return a.x < b.x || (a.x == b.x && (a.y < b.y || (a.y == b.y && a.i < b.i)));
    });
    const double tol = eps() * eps();
    auto cross = [](const P2& o2, const P2& a, const P2& b) {
      return (a.x - o2.x) * (b.y - o2.y) - (a.y - o2.y) * (b.x - o2.x);
    };
    std::vector<P2> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= tol) --k;
      h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
      while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= tol) --k;
      h[k++] = pts[i];
    }
    h.resize(k - 1);
    std::vector<HullVertex> nv;
    for (const auto& q : h) nv.push_back(verts_[q.i]);
    verts_ = std::move(nv);
    faces_.clear();
    for (int i = 1; i + 1 < static_cast<int>(verts_.size()); ++i) {
      HullFacet f = make_facet(0, i, i + 1);
      f.normal = plane_n_;
      faces_.push_back(f);
    }
  }

  bool insert_dim2(const Vec3d& p, std::int64_t key) {
    const double h = plane_n_.dot(p - verts_[0].p);
    if (std::abs(h) <= eps()) {
      std::vector<HullVertex> before = verts_;
      verts_.push_back({p, key});
      rebuild_polygon();
      bool same = before.size() == verts_.size();
      for (std::size_t i = 0; same && i < before.size(); ++i)
        same = before[i].key == verts_[i].key && before[i].p == verts_[i].p;
      return !same;
    }
    // Pyramid over the polygon. Polygon is counter-clockwise about plane_n_.
    const int m = static_cast<int>(verts_.size());
    verts_.push_back({p, key});
    const int apex = m;
    faces_.clear();
    if (h > 0) {
      for (int i = 1; i + 1 < m; ++i) faces_.push_back(make_facet(0, i + 1, i));
      for (int i = 0; i < m; ++i) faces_.push_back(make_facet(i, (i + 1) % m, apex));
    } else {
      for (int i = 1; i + 1 < m; ++i) faces_.push_back(make_facet(0, i, i + 1));
      for (int i = 0; i < m; ++i) faces_.push_back(make_facet((i + 1) % m, i, apex));
    }
    dim_ = 3;
    return true;
  }

  bool insert_dim3(const Vec3d& p, std::int64_t key) {
    const double tol = eps();
    std::vector<char> visible(faces_.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      if (facet_distance(faces_[i], p) > tol) {
        visible[i] = 1;
        any = true;
      }
    }
    if (!any) return false;
    // Horizon: directed edges of visible faces whose twin lies on a hidden face.
    std::map<std::pair<int, int>, int> edges;
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      if (!visible[i]) continue;
      for (int e = 0; e < 3; ++e) edges[{faces_[i].v[e], faces_[i].v[(e + 1) % 3]}] = 1;
    }
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t i = 0; i < faces_.size(); ++i) {
      if (!visible[i]) continue;
      for (int e = 0; e < 3; ++e) {
        const int a = faces_[i].v[e], b = faces_[i].v[(e + 1) % 3];
        if (!edges.count({b, a})) horizon.emplace_back(a, b);
      }
    }
    const int apex = static_cast<int>(verts_.size());
    verts_.push_back({p, key});
    std::vector<HullFacet> nf;
    nf.reserve(faces_.size() + horizon.size());
    for (std::size_t i = 0; i < faces_.size(); ++i)
      if (!visible[i]) nf.push_back(faces_[i]);
    for (const auto& [a, b] : horizon) nf.push_back(make_facet(a, b, apex));
    faces_ = std::move(nf);
    compact();
    return true;
  }

  // Drops vertices no facet references, keeping insertion order.
  void compact() {
    std::vector<int> used(verts_.size(), 0);
    for (const auto& f : faces_)
      for (int v : f.v) used[static_cast<std::size_t>(v)] = 1;
    std::vector<int> remap(verts_.size(), -1);
    std::vector<HullVertex> nv;
    for (std::size_t i = 0; i < verts_.size(); ++i) {
      if (!used[i]) continue;
      remap[i] = static_cast<int>(nv.size());
      nv.push_back(verts_[i]);
    }
    verts_ = std::move(nv);
    for (auto& f : faces_)
      for (int& v : f.v) v = remap[static_cast<std::size_t>(v)];
  }
};

}  // namespace rlv
