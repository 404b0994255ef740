#include "helfrich/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace helfrich {

// Surface locator -------------------------------------------------------------

namespace {

struct ClosestOnTriangle {
  Vec3 point;
  Vec3 bary;
};

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
ClosestOnTriangle closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return {a, {1, 0, 0}};
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return {b, {0, 1, 0}};
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, {1 - v, v, 0}};
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return {c, {0, 0, 1}};
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, {1 - w, 0, w}};
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), {0, 1 - w, w}};
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {a + ab * v + ac * w, {1 - v - w, v, w}};
}

}  // namespace

struct SurfaceLocator::Impl {
  TriangleMesh mesh;
  Vec3 lo;
  double cell = 1.0;
  std::array<int, 3> dims{1, 1, 1};
  std::vector<std::vector<int>> cells;

  std::array<int, 3> cell_of(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int k = 0; k < 3; ++k) {
      const int i = static_cast<int>(std::floor((p[k] - lo[k]) / cell));
      c[static_cast<std::size_t>(k)] = std::clamp(i, 0, dims[static_cast<std::size_t>(k)] - 1);
    }
    return c;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims[0]) +
           static_cast<std::size_t>(i);
  }
};

SurfaceLocator::SurfaceLocator(const TriangleMesh& mesh) : impl_(std::make_unique<Impl>()) {
  if (mesh.faces.empty()) throw MeshError("surface locator needs at least one face");
  Impl& m = *impl_;
  m.mesh = mesh;
  Vec3 lo = mesh.vertices.front(), hi = lo;
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  double edge_sum = 0.0;
  for (const Face& f : mesh.faces) edge_sum += (mesh.vertices[f[0]] - mesh.vertices[f[1]]).norm();
  const double mean_edge = edge_sum / static_cast<double>(mesh.faces.size());
  const Vec3 ext = hi - lo;
  m.cell = std::max({2.0 * mean_edge, ext.maxCoeff() / 64.0, 1e-300});
  m.lo = lo;
  for (int k = 0; k < 3; ++k) {
    m.dims[static_cast<std::size_t>(k)] = std::max(1, static_cast<int>(std::ceil(ext[k] / m.cell)) + 1);
  }
  m.cells.assign(static_cast<std::size_t>(m.dims[0]) * static_cast<std::size_t>(m.dims[1]) *
                     static_cast<std::size_t>(m.dims[2]),
                 {});
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    Vec3 flo = mesh.vertices[t[0]], fhi = flo;
    for (int c = 1; c < 3; ++c) {
      flo = flo.cwiseMin(mesh.vertices[t[c]]);
      fhi = fhi.cwiseMax(mesh.vertices[t[c]]);
    }
    const auto a = m.cell_of(flo), b = m.cell_of(fhi);
    for (int k = a[2]; k <= b[2]; ++k)
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i) m.cells[m.index(i, j, k)].push_back(static_cast<int>(f));
  }
}

SurfaceLocator::~SurfaceLocator() = default;
SurfaceLocator::SurfaceLocator(SurfaceLocator&&) noexcept = default;
SurfaceLocator& SurfaceLocator::operator=(SurfaceLocator&&) noexcept = default;

SurfaceLocator::Hit SurfaceLocator::closest(const Vec3& p) const {
  const Impl& m = *impl_;
  Hit best;
  best.distance = std::numeric_limits<double>::infinity();
  const auto c = m.cell_of(p);
  // Distance from p to the outside of the grid block searched so far bounds
  // any unseen face; stop once the best hit beats it.
  Vec3 q = p;
  for (int k = 0; k < 3; ++k) {
    q[k] = std::clamp(p[k], m.lo[k], m.lo[k] + m.cell * m.dims[static_cast<std::size_t>(k)]);
  }
  const double outside = (p - q).norm();
  const int max_ring = std::max({m.dims[0], m.dims[1], m.dims[2]});
  std::vector<char> seen(m.mesh.faces.size(), 0);
  for (int ring = 0; ring <= max_ring; ++ring) {
    for (int k = c[2] - ring; k <= c[2] + ring; ++k) {
      if (k < 0 || k >= m.dims[2]) continue;
      for (int j = c[1] - ring; j <= c[1] + ring; ++j) {
        if (j < 0 || j >= m.dims[1]) continue;
        for (int i = c[0] - ring; i <= c[0] + ring; ++i) {
          if (i < 0 || i >= m.dims[0]) continue;
          if (std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])}) != ring) continue;
          for (int f : m.cells[m.index(i, j, k)]) {
            if (seen[static_cast<std::size_t>(f)]) continue;
            seen[static_cast<std::size_t>(f)] = 1;
            const Face& t = m.mesh.faces[static_cast<std::size_t>(f)];
            const auto r = closest_on_triangle(p, m.mesh.vertices[t[0]], m.mesh.vertices[t[1]], m.mesh.vertices[t[2]]);
            const double d = (r.point - p).norm();
            if (d < best.distance) {
              best.distance = d;
              best.point = r.point;
              best.face = f;
              best.barycentric = r.bary;
            }
          }
        }
      }
    }
    if (best.face >= 0 && best.distance <= outside + ring * m.cell) break;
  }
  return best;
}

double hausdorff_distance(const TriangleMesh& a, const TriangleMesh& b) {
  auto one_sided = [](const TriangleMesh& from, const SurfaceLocator& to) {
    double d = 0.0;
    for (const Vec3& v : from.vertices) d = std::max(d, to.closest(v).distance);
    for (const Face& f : from.faces) {
      const Vec3& p0 = from.vertices[f[0]];
      const Vec3& p1 = from.vertices[f[1]];
      const Vec3& p2 = from.vertices[f[2]];
      d = std::max(d, to.closest((p0 + p1 + p2) / 3.0).distance);
      d = std::max(d, to.closest(0.5 * (p0 + p1)).distance);
      d = std::max(d, to.closest(0.5 * (p1 + p2)).distance);
      d = std::max(d, to.closest(0.5 * (p2 + p0)).distance);
    }
    return d;
  };
  const SurfaceLocator la(a), lb(b);
  return std::max(one_sided(a, lb), one_sided(b, la));
}

VertexField transfer_field(const TriangleMesh& from, const VertexField& field, const TriangleMesh& to) {
  if (field.size() != from.num_vertices()) throw MeshError("transfer_field: field size does not match mesh");
  const SurfaceLocator loc(from);
  VertexField out;
  out.unit = field.unit;
  out.values.resize(to.num_vertices());
  for (std::size_t i = 0; i < to.num_vertices(); ++i) {
    const auto hit = loc.closest(to.vertices[i]);
    const Face& f = from.faces[static_cast<std::size_t>(hit.face)];
    out.values[i] = hit.barycentric[0] * field[static_cast<std::size_t>(f[0])] +
                    hit.barycentric[1] * field[static_cast<std::size_t>(f[1])] +
                    hit.barycentric[2] * field[static_cast<std::size_t>(f[2])];
  }
  return out;
}

// Remeshing -------------------------------------------------------------------

namespace {

class WorkMesh {
 public:
  explicit WorkMesh(const TriangleMesh& m) : pos(m.vertices), faces(m.faces) {
    alive_face.assign(faces.size(), 1);
    alive_vertex.assign(pos.size(), 1);
    vf.resize(pos.size());
    for (std::size_t f = 0; f < faces.size(); ++f)
      for (int v : faces[f]) vf[static_cast<std::size_t>(v)].push_back(static_cast<int>(f));
  }

  std::vector<Vec3> pos;
  std::vector<Face> faces;
  std::vector<char> alive_face;
  std::vector<char> alive_vertex;
  std::vector<std::vector<int>> vf;

  Vec3 normal(const Face& f) const { return (pos[f[1]] - pos[f[0]]).cross(pos[f[2]] - pos[f[0]]); }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vf[static_cast<std::size_t>(v)])
      for (int w : faces[static_cast<std::size_t>(f)])
        if (w != v) out.push_back(w);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  int valence(int v) const { return static_cast<int>(vf[static_cast<std::size_t>(v)].size()); }

  // Faces with directed edge a->b and b->a; -1 when missing.
  std::pair<int, int> edge_faces(int a, int b) const {
    int f0 = -1, f1 = -1;
    for (int f : vf[static_cast<std::size_t>(a)]) {
      const Face& t = faces[static_cast<std::size_t>(f)];
      for (int k = 0; k < 3; ++k) {
        if (t[k] == a && t[(k + 1) % 3] == b) f0 = f;
        if (t[k] == b && t[(k + 1) % 3] == a) f1 = f;
      }
    }
    return {f0, f1};
  }

  static int opposite(const Face& t, int a, int b) {
    for (int v : t)
      if (v != a && v != b) return v;
    return -1;
  }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!alive_face[f]) continue;
      const Face& t = faces[f];
      for (int k = 0; k < 3; ++k) {
        const int a = t[k], b = t[(k + 1) % 3];
        if (a < b) out.emplace_back(a, b);
      }
    }
    return out;
  }

  void remove_face_from(int v, int f) {
    auto& list = vf[static_cast<std::size_t>(v)];
    list.erase(std::remove(list.begin(), list.end(), f), list.end());
  }

  void split(int a, int b) {
    const auto [f0, f1] = edge_faces(a, b);
    const int c = opposite(faces[static_cast<std::size_t>(f0)], a, b);
    const int d = opposite(faces[static_cast<std::size_t>(f1)], a, b);
    const int m = static_cast<int>(pos.size());
    pos.push_back(0.5 * (pos[a] + pos[b]));
    alive_vertex.push_back(1);
    vf.emplace_back();
    auto add_face = [&](Face t) {
      const int id = static_cast<int>(faces.size());
      faces.push_back(t);
      alive_face.push_back(1);
      for (int v : t) vf[static_cast<std::size_t>(v)].push_back(id);
    };
    // f0 = (a,b,c) -> (a,m,c) + (m,b,c); f1 = (b,a,d) -> (b,m,d) + (m,a,d)
    faces[static_cast<std::size_t>(f0)] = {a, m, c};
    remove_face_from(b, f0);
    vf[static_cast<std::size_t>(m)].push_back(f0);
    add_face({m, b, c});
    faces[static_cast<std::size_t>(f1)] = {b, m, d};
    remove_face_from(a, f1);
    vf[static_cast<std::size_t>(m)].push_back(f1);
    add_face({m, a, d});
  }

  bool try_collapse(int a, int b, double high) {
    const auto [f0, f1] = edge_faces(a, b);
    if (f0 < 0 || f1 < 0) return false;
    const int c = opposite(faces[static_cast<std::size_t>(f0)], a, b);
    const int d = opposite(faces[static_cast<std::size_t>(f1)], a, b);
    const auto na = neighbors(a), nb = neighbors(b);
    std::vector<int> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common.size() != 2) return false;
    if (valence(a) + valence(b) - 4 < 3 || valence(c) < 4 || valence(d) < 4) return false;
    const Vec3 p = 0.5 * (pos[a] + pos[b]);
    for (int x : nb)
      if (x != a && (pos[x] - p).norm() > high) return false;
    for (int x : na)
      if (x != b && (pos[x] - p).norm() > high) return false;
    // No face around a or b may flip or degenerate.
    for (int v : {a, b}) {
      for (int f : vf[static_cast<std::size_t>(v)]) {
        if (f == f0 || f == f1) continue;
        Face t = faces[static_cast<std::size_t>(f)];
        const Vec3 before = normal(t);
        Vec3 q[3];
        for (int k = 0; k < 3; ++k) q[k] = (t[k] == a || t[k] == b) ? p : pos[t[k]];
        const Vec3 after = (q[1] - q[0]).cross(q[2] - q[0]);
        if (after.dot(before) <= 0.0 || after.norm() < 1e-3 * before.norm()) return false;
        if (after.normalized().dot(before.normalized()) < 0.5) return false;
      }
    }
    pos[a] = p;
    for (int f : {f0, f1}) {
      alive_face[static_cast<std::size_t>(f)] = 0;
      for (int v : faces[static_cast<std::size_t>(f)]) remove_face_from(v, f);
    }
    for (int f : vf[static_cast<std::size_t>(b)]) {
      for (int& v : faces[static_cast<std::size_t>(f)])
        if (v == b) v = a;
      vf[static_cast<std::size_t>(a)].push_back(f);
    }
    vf[static_cast<std::size_t>(b)].clear();
    alive_vertex[static_cast<std::size_t>(b)] = 0;
    return true;
  }

  bool try_flip(int a, int b, bool delaunay) {
    const auto [f0, f1] = edge_faces(a, b);
    if (f0 < 0 || f1 < 0) return false;
    const int c = opposite(faces[static_cast<std::size_t>(f0)], a, b);
    const int d = opposite(faces[static_cast<std::size_t>(f1)], a, b);
    if (c == d || valence(a) <= 3 || valence(b) <= 3) return false;
    const auto nc = neighbors(c);
    if (std::binary_search(nc.begin(), nc.end(), d)) return false;
    if (delaunay) {
      auto angle = [&](int apex) {
        const Vec3 u = pos[a] - pos[apex], v = pos[b] - pos[apex];
        return std::atan2(u.cross(v).norm(), u.dot(v));
      };
      if (angle(c) + angle(d) <= M_PI + 1e-9) return false;
    } else {
      auto dev = [](int val) { return std::abs(val - 6); };
      const int before = dev(valence(a)) + dev(valence(b)) + dev(valence(c)) + dev(valence(d));
      const int after = dev(valence(a) - 1) + dev(valence(b) - 1) + dev(valence(c) + 1) + dev(valence(d) + 1);
      if (after >= before) return false;
    }
    const Face g0{a, d, c}, g1{b, c, d};
    const Vec3 o0 = normal(faces[static_cast<std::size_t>(f0)]).normalized();
    const Vec3 o1 = normal(faces[static_cast<std::size_t>(f1)]).normalized();
    const Vec3 n0 = normal(g0), n1 = normal(g1);
    if (n0.norm() <= 0.0 || n1.norm() <= 0.0) return false;
    for (const Vec3& n : {n0.normalized(), n1.normalized()})
      for (const Vec3& o : {o0, o1})
        if (n.dot(o) < 0.5) return false;
    remove_face_from(b, f0);
    remove_face_from(a, f1);
    faces[static_cast<std::size_t>(f0)] = g0;
    faces[static_cast<std::size_t>(f1)] = g1;
    vf[static_cast<std::size_t>(d)].push_back(f0);
    vf[static_cast<std::size_t>(c)].push_back(f1);
    return true;
  }

  Vec3 vertex_normal(int v) const {
    Vec3 n = Vec3::Zero();
    for (int f : vf[static_cast<std::size_t>(v)]) n += normal(faces[static_cast<std::size_t>(f)]);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : n;
  }

  TriangleMesh compact() const {
    TriangleMesh out;
    std::vector<int> remap(pos.size(), -1);
    for (std::size_t v = 0; v < pos.size(); ++v) {
      if (!alive_vertex[v] || vf[v].empty()) continue;
      remap[v] = static_cast<int>(out.vertices.size());
      out.vertices.push_back(pos[v]);
    }
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!alive_face[f]) continue;
      const Face& t = faces[f];
      out.faces.push_back({remap[static_cast<std::size_t>(t[0])], remap[static_cast<std::size_t>(t[1])],
                           remap[static_cast<std::size_t>(t[2])]});
    }
    return out;
  }
};

}  // namespace

TriangleMesh remesh(const TriangleMesh& mesh, const RemeshOptions& options, RemeshReport* report) {
  if (!(options.target_edge > 0.0)) throw MeshError("remesh: target_edge must be positive");
  validate_mesh(mesh);
  const int chi_before = euler_characteristic(mesh);
  const SurfaceLocator locator(mesh);

  // Sizing field on the input surface.
  VertexField sizing;
  sizing.values.assign(mesh.num_vertices(), options.target_edge);
  if (options.curvature_adaptive) {
    const GeometryCache cache = build_cache(mesh);
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
      const double k = std::sqrt(std::max(cache.asq[i], 0.0) / 2.0);
      if (k > 0.0) sizing.values[i] = std::min(options.target_edge, options.curvature_angle / k);
    }
  }
  auto target_at = [&](const Vec3& p) {
    if (!options.curvature_adaptive) return options.target_edge;
    const auto hit = locator.closest(p);
    const Face& f = mesh.faces[static_cast<std::size_t>(hit.face)];
    return hit.barycentric[0] * sizing[static_cast<std::size_t>(f[0])] +
           hit.barycentric[1] * sizing[static_cast<std::size_t>(f[1])] +
           hit.barycentric[2] * sizing[static_cast<std::size_t>(f[2])];
  };

  WorkMesh w(mesh);
  RemeshReport rep;
  for (int it = 0; it < options.iterations; ++it) {
    // Split long edges, longest first.
    for (int pass = 0; pass < 8; ++pass) {
      auto edges = w.edges();
      std::vector<std::pair<double, std::pair<int, int>>> todo;
      for (auto [a, b] : edges) {
        const double len = (w.pos[a] - w.pos[b]).norm();
        const double target = target_at(0.5 * (w.pos[a] + w.pos[b]));
        if (len > 4.0 / 3.0 * target) todo.push_back({len, {a, b}});
      }
      if (todo.empty()) break;
      std::sort(todo.begin(), todo.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
      for (const auto& [len, e] : todo) {
        const auto [f0, f1] = w.edge_faces(e.first, e.second);
        if (f0 < 0 || f1 < 0) continue;
        w.split(e.first, e.second);
        ++rep.splits;
      }
    }
    // Collapse short edges.
    for (int pass = 0; pass < 8; ++pass) {
      std::size_t done = 0;
      for (auto [a, b] : w.edges()) {
        if (!w.alive_vertex[static_cast<std::size_t>(a)] || !w.alive_vertex[static_cast<std::size_t>(b)]) continue;
        const double len = (w.pos[a] - w.pos[b]).norm();
        const double target = target_at(0.5 * (w.pos[a] + w.pos[b]));
        if (len >= 0.8 * target) continue;
        if (w.try_collapse(a, b, 4.0 / 3.0 * target)) {
          ++done;
          ++rep.collapses;
        }
      }
      if (done == 0) break;
    }
    // Valence-improving flips.
    for (int pass = 0; pass < 8; ++pass) {
      std::size_t done = 0;
      for (auto [a, b] : w.edges()) {
        if (w.try_flip(a, b, false)) {
          ++done;
          ++rep.flips;
        }
      }
      if (done == 0) break;
    }
    // Tangential relaxation followed by projection.
    std::vector<Vec3> next = w.pos;
    for (std::size_t v = 0; v < w.pos.size(); ++v) {
      if (!w.alive_vertex[v] || w.vf[v].empty()) continue;
      const auto nb = w.neighbors(static_cast<int>(v));
      Vec3 centroid = Vec3::Zero();
      for (int x : nb) centroid += w.pos[x];
      centroid /= static_cast<double>(nb.size());
      const Vec3 n = w.vertex_normal(static_cast<int>(v));
      const Vec3 moved = centroid + n * n.dot(w.pos[v] - centroid);
      next[v] = locator.closest(moved).point;
    }
    // Keep a vertex in place if moving it would flip an incident face.
    for (std::size_t v = 0; v < w.pos.size(); ++v) {
      if (!w.alive_vertex[v]) continue;
      bool ok = true;
      for (int f : w.vf[v]) {
        const Face& t = w.faces[static_cast<std::size_t>(f)];
        Vec3 q[3];
        for (int k = 0; k < 3; ++k) q[k] = t[k] == static_cast<int>(v) ? next[v] : w.pos[t[k]];
        const Vec3 after = (q[1] - q[0]).cross(q[2] - q[0]);
        if (after.dot(w.normal(t)) <= 0.0) {
          ok = false;
          break;
        }
      }
      if (!ok) next[v] = w.pos[v];
    }
    w.pos = std::move(next);
  }
  // Delaunay flips for angle quality.
  for (int pass = 0; pass < 16; ++pass) {
    std::size_t done = 0;
    for (auto [a, b] : w.edges()) {
      if (w.try_flip(a, b, true)) {
        ++done;
        ++rep.flips;
      }
    }
    if (done == 0) break;
  }

  TriangleMesh out = w.compact();
  validate_mesh(out);
  if (euler_characteristic(out) != chi_before) throw MeshError("remesh changed the Euler characteristic");
  if (signed_volume(out) * signed_volume(mesh) < 0.0) throw MeshError("remesh flipped the orientation");
  rep.hausdorff = hausdorff_distance(mesh, out);
  if (rep.hausdorff > options.max_hausdorff_fraction * options.target_edge) {
    throw MeshError("remesh exceeded the Hausdorff tolerance (" + std::to_string(rep.hausdorff) + ")");
  }
  rep.quality = quality_report(out);
  if (report) *report = rep;
  return out;
}

}  // namespace helfrich
