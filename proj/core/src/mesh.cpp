#include "helfrich/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>
#include <unordered_map>

#include <Eigen/Geometry>

namespace helfrich {

namespace {

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

void check_indices(const TriangleMesh& mesh) {
  const int nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= nv) {
        std::ostringstream os;
        os << "face " << f << " references vertex " << face[k] << " out of range [0, " << nv
           << ")";
        throw MeshError(os.str());
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      std::ostringstream os;
      os << "face " << f << " repeats a vertex index";
      throw MeshError(os.str());
    }
  }
}

}  // namespace

MeshTopology build_topology(const TriangleMesh& mesh) {
  check_indices(mesh);
  const std::size_t nv = mesh.vertices.size();
  const std::size_t nf = mesh.faces.size();

  MeshTopology topo;
  topo.vertex_faces.assign(nv, {});
  topo.face_edges.assign(nf, {-1, -1, -1});

  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(nf * 3);
  for (std::size_t f = 0; f < nf; ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const int a = face[(k + 1) % 3];
      const int b = face[(k + 2) % 3];
      auto [it, inserted] = directed.emplace(edge_key(a, b), static_cast<int>(f));
      if (!inserted) {
        std::ostringstream os;
        os << "edge (" << a << ", " << b << ") is traversed in the same direction by faces "
           << it->second << " and " << f << " (non-manifold edge or inconsistent winding)";
        throw MeshError(os.str());
      }
      topo.vertex_faces[face[k]].push_back(static_cast<int>(f));
    }
  }

  std::unordered_map<std::uint64_t, int> edge_index;
  edge_index.reserve(nf * 3 / 2 + 1);
  for (std::size_t f = 0; f < nf; ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const int a = face[(k + 1) % 3];
      const int b = face[(k + 2) % 3];
      const auto twin = directed.find(edge_key(b, a));
      if (twin == directed.end()) {
        std::ostringstream os;
        os << "edge (" << a << ", " << b << ") of face " << f << " has no opposite face (open boundary)";
        throw MeshError(os.str());
      }
      const int lo = std::min(a, b);
      const int hi = std::max(a, b);
      auto [it, inserted] = edge_index.emplace(edge_key(lo, hi), static_cast<int>(topo.edges.size()));
      if (inserted) {
        Edge e;
        e.v0 = a;
        e.v1 = b;
        e.f0 = static_cast<int>(f);
        e.f1 = twin->second;
        topo.edges.push_back(e);
      }
      topo.face_edges[f][k] = it->second;
    }
  }

  topo.vertex_neighbors.assign(nv, {});
  for (const Edge& e : topo.edges) {
    topo.vertex_neighbors[e.v0].push_back(e.v1);
    topo.vertex_neighbors[e.v1].push_back(e.v0);
  }
  return topo;
}

void validate_mesh(const TriangleMesh& mesh, const ValidationOptions& options) {
  if (mesh.vertices.empty() || mesh.faces.empty()) {
    throw MeshError("mesh has no vertices or no faces");
  }
  if (!mesh.tags.empty() && mesh.tags.size() != mesh.vertices.size()) {
    throw MeshError("vertex tag count does not match vertex count");
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (!mesh.vertices[i].allFinite()) {
      std::ostringstream os;
      os << "vertex " << i << " has a non-finite coordinate";
      throw MeshError(os.str());
    }
  }
  const MeshTopology topo = build_topology(mesh);

  // Each vertex must be surrounded by exactly one fan of faces.
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const auto& incident = topo.vertex_faces[v];
    if (incident.empty()) {
      std::ostringstream os;
      os << "vertex " << v << " is not referenced by any face";
      throw MeshError(os.str());
    }
    // Map "outgoing neighbor" -> face for the fan walk.
    std::unordered_map<int, int> next_of;
    for (int f : incident) {
      const Face& face = mesh.faces[f];
      const int k = face[0] == static_cast<int>(v) ? 0 : (face[1] == static_cast<int>(v) ? 1 : 2);
      next_of[face[(k + 1) % 3]] = face[(k + 2) % 3];
    }
    int start = next_of.begin()->first;
    int cur = start;
    std::size_t steps = 0;
    do {
      auto it = next_of.find(cur);
      if (it == next_of.end()) break;
      cur = it->second;
      ++steps;
    } while (cur != start && steps <= incident.size());
    if (steps != incident.size()) {
      std::ostringstream os;
      os << "vertex " << v << " is non-manifold (faces form more than one fan)";
      throw MeshError(os.str());
    }
  }

  const int chi = topo.euler_characteristic(mesh.vertices.size(), mesh.faces.size());
  if (chi % 2 != 0) {
    std::ostringstream os;
    os << "odd Euler characteristic " << chi;
    throw MeshError(os.str());
  }

  const double diag = bounding_box_diagonal(mesh);
  const double floor = options.degenerate_area_floor * diag * diag;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (!(face_area(mesh, static_cast<int>(f)) >= floor)) {
      std::ostringstream os;
      os << "face " << f << " is degenerate (area below " << floor << ")";
      throw MeshError(os.str());
    }
  }
}

int euler_characteristic(const TriangleMesh& mesh) {
  const MeshTopology topo = build_topology(mesh);
  return topo.euler_characteristic(mesh.vertices.size(), mesh.faces.size());
}

int genus(const TriangleMesh& mesh) {
  const int chi = euler_characteristic(mesh);
  const int components = num_components(mesh);
  if (chi % 2 != 0) throw MeshError("odd Euler characteristic");
  // Sum of genera over components.
  return (2 * components - chi) / 2;
}

int num_components(const TriangleMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<int> parent(nv);
  for (std::size_t i = 0; i < nv; ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const Face& f : mesh.faces) {
    for (int k = 1; k < 3; ++k) {
      const int a = find(f[0]);
      const int b = find(f[k]);
      if (a != b) parent[a] = b;
    }
  }
  int count = 0;
  for (std::size_t i = 0; i < nv; ++i) {
    if (find(static_cast<int>(i)) == static_cast<int>(i)) ++count;
  }
  return count;
}

double bounding_box_diagonal(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) return 0.0;
  Vec3 lo = mesh.vertices.front();
  Vec3 hi = lo;
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

Vec3 face_normal_vector(const TriangleMesh& mesh, int f) {
  const Face& face = mesh.faces[f];
  const Vec3& a = mesh.vertices[face[0]];
  return (mesh.vertices[face[1]] - a).cross(mesh.vertices[face[2]] - a);
}

double face_area(const TriangleMesh& mesh, int f) { return 0.5 * face_normal_vector(mesh, f).norm(); }

double signed_volume(const TriangleMesh& mesh) {
  // Shift by the first vertex: the sum is translation invariant on closed
  // meshes and the shift reduces cancellation far from the origin.
  if (mesh.vertices.empty()) return 0.0;
  const Vec3 origin = mesh.vertices.front();
  double sum = 0.0;
  for (const Face& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]] - origin;
    const Vec3 b = mesh.vertices[f[1]] - origin;
    const Vec3 c = mesh.vertices[f[2]] - origin;
    sum += a.dot(b.cross(c));
  }
  return -sum / 6.0;
}

double total_area(const TriangleMesh& mesh) {
  double sum = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) sum += face_area(mesh, static_cast<int>(f));
  return sum;
}

MeshQualityReport quality_report(const TriangleMesh& mesh) {
  MeshQualityReport r;
  r.min_edge_length = std::numeric_limits<double>::infinity();
  r.max_edge_length = 0.0;
  r.min_angle = std::numeric_limits<double>::infinity();
  r.max_angle = 0.0;
  r.min_face_area = std::numeric_limits<double>::infinity();
  double edge_sum = 0.0;
  std::size_t edge_count = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    std::array<double, 3> len{};
    for (int k = 0; k < 3; ++k) {
      len[k] = (mesh.vertices[face[(k + 1) % 3]] - mesh.vertices[face[(k + 2) % 3]]).norm();
      r.min_edge_length = std::min(r.min_edge_length, len[k]);
      r.max_edge_length = std::max(r.max_edge_length, len[k]);
      edge_sum += len[k];
      ++edge_count;
    }
    for (int k = 0; k < 3; ++k) {
      const Vec3 u = mesh.vertices[face[(k + 1) % 3]] - mesh.vertices[face[k]];
      const Vec3 w = mesh.vertices[face[(k + 2) % 3]] - mesh.vertices[face[k]];
      const double angle = std::atan2(u.cross(w).norm(), u.dot(w));
      r.min_angle = std::min(r.min_angle, angle);
      r.max_angle = std::max(r.max_angle, angle);
    }
    const double area = face_area(mesh, static_cast<int>(f));
    r.min_face_area = std::min(r.min_face_area, area);
    const double longest = *std::max_element(len.begin(), len.end());
    const double min_altitude = 2.0 * area / longest;
    const double aspect = area > 0.0 ? longest / min_altitude * (std::sqrt(3.0) / 2.0)
                                     : std::numeric_limits<double>::infinity();
    std::size_t bin = 5;
    if (aspect < 1.5) bin = 0;
    else if (aspect < 2.0) bin = 1;
    else if (aspect < 3.0) bin = 2;
    else if (aspect < 5.0) bin = 3;
    else if (aspect < 10.0) bin = 4;
    ++r.aspect_histogram[bin];
  }
  // Interior edges are visited twice; the mean is unaffected.
  r.mean_edge_length = edge_count ? edge_sum / static_cast<double>(edge_count) : 0.0;
  return r;
}

TriangleMesh flip_winding(const TriangleMesh& mesh) {
  TriangleMesh out = mesh;
  for (Face& f : out.faces) std::swap(f[1], f[2]);
  return out;
}

TriangleMesh orient_for_positive_volume(const TriangleMesh& mesh, OrientationStatus* status) {
  const double volume = signed_volume(mesh);
  const double diag = bounding_box_diagonal(mesh);
  OrientationStatus st;
  TriangleMesh out;
  if (std::abs(volume) <= 1e-14 * diag * diag * diag) {
    st.ambiguous = true;
    out = mesh;
  } else if (volume < 0.0) {
    st.flipped = true;
    out = flip_winding(mesh);
  } else {
    out = mesh;
  }
  st.volume_after = st.flipped ? -volume : volume;
  if (status) *status = st;
  return out;
}

TriangleMesh repair_orientation(const TriangleMesh& mesh) {
  check_indices(mesh);
  const std::size_t nf = mesh.faces.size();
  // Undirected edge -> incident faces.
  std::unordered_map<std::uint64_t, std::vector<int>> incident;
  incident.reserve(nf * 2);
  for (std::size_t f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.faces[f][(k + 1) % 3];
      const int b = mesh.faces[f][(k + 2) % 3];
      incident[edge_key(std::min(a, b), std::max(a, b))].push_back(static_cast<int>(f));
    }
  }
  for (const auto& [key, faces] : incident) {
    if (faces.size() != 2) {
      std::ostringstream os;
      os << "edge (" << (key >> 32) << ", " << (key & 0xffffffffu) << ") has " << faces.size()
         << (faces.size() == 1 ? " incident face (open boundary)" : " incident faces (non-manifold edge)");
      throw MeshError(os.str());
    }
  }

  auto traverses = [&](const Face& face, int a, int b) {
    for (int k = 0; k < 3; ++k) {
      if (face[k] == a && face[(k + 1) % 3] == b) return true;
    }
    return false;
  };

  TriangleMesh out = mesh;
  std::vector<int> component(nf, -1);
  int n_components = 0;
  for (std::size_t seed = 0; seed < nf; ++seed) {
    if (component[seed] >= 0) continue;
    const int comp = n_components++;
    std::queue<int> queue;
    queue.push(static_cast<int>(seed));
    component[seed] = comp;
    while (!queue.empty()) {
      const int f = queue.front();
      queue.pop();
      const Face face = out.faces[f];
      for (int k = 0; k < 3; ++k) {
        const int a = face[k];
        const int b = face[(k + 1) % 3];
        const auto& pair = incident[edge_key(std::min(a, b), std::max(a, b))];
        const int g = pair[0] == f ? pair[1] : pair[0];
        // Consistent iff g traverses b -> a.
        const bool consistent = traverses(out.faces[g], b, a);
        if (component[g] < 0) {
          if (!consistent) std::swap(out.faces[g][1], out.faces[g][2]);
          component[g] = comp;
          queue.push(g);
        } else if (!consistent) {
          throw MeshError("surface is non-orientable; winding cannot be repaired by component-wise flip");
        }
      }
    }
  }

  // Orient each component for positive enclosed volume.
  std::vector<double> volume(n_components, 0.0);
  for (std::size_t f = 0; f < nf; ++f) {
    const Face& face = out.faces[f];
    volume[component[f]] -= out.vertices[face[0]].dot(out.vertices[face[1]].cross(out.vertices[face[2]])) / 6.0;
  }
  for (std::size_t f = 0; f < nf; ++f) {
    if (volume[component[f]] < 0.0) std::swap(out.faces[f][1], out.faces[f][2]);
  }
  return out;
}

// Generators ---------------------------------------------------------------

TriangleMesh make_icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                   {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                   {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  // Counter-clockwise seen from outside.
  const std::vector<Face> outward = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                     {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                     {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                     {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  mesh.faces = outward;
  for (Face& f : mesh.faces) std::swap(f[1], f[2]);
  return mesh;
}

TriangleMesh make_icosphere(int subdivisions, double radius, const Vec3& center, int max_subdivisions) {
  if (subdivisions < 0 || subdivisions > max_subdivisions) {
    std::ostringstream os;
    os << "icosphere subdivision level " << subdivisions << " outside [0, " << max_subdivisions << "]";
    throw MeshError(os.str());
  }
  if (!(radius > 0.0)) throw MeshError("icosphere radius must be positive");

  TriangleMesh mesh = make_icosahedron();
  for (Vec3& v : mesh.vertices) v.normalize();
  for (int level = 0; level < subdivisions; ++level) {
    std::unordered_map<std::uint64_t, int> midpoint;
    midpoint.reserve(mesh.faces.size() * 3);
    auto mid = [&](int a, int b) {
      const std::uint64_t key = edge_key(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> faces;
    faces.reserve(mesh.faces.size() * 4);
    for (const Face& f : mesh.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(faces);
  }
  for (Vec3& v : mesh.vertices) v = center + radius * v;
  return mesh;
}

TriangleMesh make_tetrahedron() {
  TriangleMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  mesh.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  return orient_for_positive_volume(mesh);
}

TriangleMesh make_torus(double major_radius, double minor_radius, int nu, int nv) {
  if (nu < 3 || nv < 3) throw MeshError("torus needs at least 3 samples in each direction");
  if (!(major_radius > minor_radius && minor_radius > 0.0)) {
    throw MeshError("torus radii must satisfy major > minor > 0");
  }
  TriangleMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i) {
    const double u = 2.0 * std::numbers::pi * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double w = 2.0 * std::numbers::pi * j / nv;
      const double rho = major_radius + minor_radius * std::cos(w);
      mesh.vertices.emplace_back(rho * std::cos(u), rho * std::sin(u), minor_radius * std::sin(w));
    }
  }
  auto id = [&](int i, int j) { return ((i % nu) * nv) + (j % nv); };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      mesh.faces.push_back({a, b, c});
      mesh.faces.push_back({a, c, d});
    }
  }
  return orient_for_positive_volume(mesh);
}

TriangleMesh make_ellipsoid(int subdivisions, const Vec3& semi_axes) {
  TriangleMesh mesh = make_icosphere(subdivisions, 1.0);
  for (Vec3& v : mesh.vertices) v = v.cwiseProduct(semi_axes);
  return orient_for_positive_volume(mesh);
}

TriangleMesh rescale(const TriangleMesh& mesh, double scale, const Vec3& center) {
  if (!(scale > 0.0)) throw MeshError("rescale factor must be positive");
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = (v - center) / scale;
  return out;
}

TriangleMesh translate(const TriangleMesh& mesh, const Vec3& offset) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v += offset;
  return out;
}

TriangleMesh merge(const TriangleMesh& a, const TriangleMesh& b) {
  TriangleMesh out = a;
  const int offset = static_cast<int>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (Face f : b.faces) {
    for (int& v : f) v += offset;
    out.faces.push_back(f);
  }
  if (!a.tags.empty() || !b.tags.empty()) {
    out.tags = a.tags;
    out.tags.resize(a.vertices.size(), -1);
    for (std::size_t i = 0; i < b.vertices.size(); ++i) {
      out.tags.push_back(i < b.tags.size() ? b.tags[i] : -1);
    }
  }
  return out;
}

}  // namespace helfrich
