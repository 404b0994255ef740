#pragma once

// Per-vertex cotan kernels templated on the scalar type so the same code
// path yields both the double-precision cache and exact forward-mode
// derivatives of the discrete energies.

#include <vector>

#include "helfrich/dual.hpp"
#include "helfrich/mesh.hpp"

namespace helfrich::detail {

template <class T>
struct V3 {
  T x{}, y{}, z{};
};

template <class T> V3<T> operator+(const V3<T>& a, const V3<T>& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
template <class T> V3<T> operator-(const V3<T>& a, const V3<T>& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
template <class T> V3<T> operator*(const T& s, const V3<T>& a) { return {s * a.x, s * a.y, s * a.z}; }
template <class T> T dot(const V3<T>& a, const V3<T>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
template <class T> V3<T> cross(const V3<T>& a, const V3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class T> T norm(const V3<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class T> V3<T> lift(const Vec3& p) { return {T(p.x()), T(p.y()), T(p.z())}; }
inline Vec3 lower(const V3<double>& p) { return {p.x, p.y, p.z}; }

template <class T>
struct LocalVertexGeometry {
  T area{};          // mixed Voronoi area
  V3<T> normal_sum;  // sum of face cross products (twice the area-weighted normal)
  V3<T> stiffness;   // sum_j w_ij (x_j - x_i), i.e. (L x)_i
};

/// Rotate face so that `v` is in slot 0 while preserving the winding.
inline Face rotate_to(const Face& f, int v) {
  if (f[0] == v) return f;
  if (f[1] == v) return {f[1], f[2], f[0]};
  return {f[2], f[0], f[1]};
}

/// Mixed Voronoi area, normal and cotan stiffness for vertex `v`.
/// `pos(i)` returns V3<T>. Degenerate faces yield non-finite values; the
/// double-precision caller checks for them.
template <class T, class PosFn>
LocalVertexGeometry<T> local_vertex_geometry(int v, const std::vector<int>& incident,
                                             const std::vector<Face>& faces, PosFn&& pos) {
  LocalVertexGeometry<T> out;
  for (int f : incident) {
    const Face face = rotate_to(faces[f], v);
    const V3<T> p = pos(face[0]);
    const V3<T> q = pos(face[1]);
    const V3<T> s = pos(face[2]);
    const V3<T> e1 = q - p;
    const V3<T> e2 = s - p;
    const V3<T> c = cross(e1, e2);
    const T twice_area = norm(c);
    // cot of the angles at q and s
    const T cot_q = dot(p - q, s - q) / twice_area;
    const T cot_s = dot(p - s, q - s) / twice_area;
    out.stiffness = out.stiffness + T(0.5) * (cot_s * e1 + cot_q * e2);
    out.normal_sum = out.normal_sum + c;

    const T area = T(0.5) * twice_area;
    const bool obtuse_p = dot(e1, e2) < T(0.0);
    const bool obtuse_q = dot(p - q, s - q) < T(0.0);
    const bool obtuse_s = dot(p - s, q - s) < T(0.0);
    if (obtuse_p) {
      out.area = out.area + T(0.5) * area;
    } else if (obtuse_q || obtuse_s) {
      out.area = out.area + T(0.25) * area;
    } else {
      out.area = out.area + T(0.125) * (dot(e1, e1) * cot_s + dot(e2, e2) * cot_q);
    }
  }
  return out;
}

/// Mean curvature <(Lx)_i / a_i, nu_i>.
template <class T>
T local_mean_curvature(const LocalVertexGeometry<T>& g) {
  const T n = norm(g.normal_sum);
  return dot(g.stiffness, g.normal_sum) / (g.area * n);
}

}  // namespace helfrich::detail
