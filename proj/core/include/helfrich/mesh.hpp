#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace helfrich {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed oriented triangle surface. Value type: operations that change the
/// surface return a new mesh.
///
/// Orientation convention: the unit normal of face (a, b, c) is
/// (b - a) x (c - a) normalized, and a properly oriented mesh has
/// non-negative signed volume -1/3 * integral <f, nu>. For an embedded sphere
/// this makes the normal point inward and the mean curvature positive.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  /// Optional per-vertex tags; empty or one per vertex.
  std::vector<std::int64_t> tags;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
};

struct Edge {
  int v0 = -1;
  int v1 = -1;
  /// Face traversing v0 -> v1.
  int f0 = -1;
  /// Face traversing v1 -> v0.
  int f1 = -1;
};

/// Edge and incidence tables derived from a face list. Construction fails on
/// anything that is not a closed, consistently wound 2-manifold.
struct MeshTopology {
  std::vector<Edge> edges;
  std::vector<std::vector<int>> vertex_faces;
  std::vector<std::vector<int>> vertex_neighbors;
  /// face_edges[f][k] is the edge opposite corner k of face f.
  std::vector<std::array<int, 3>> face_edges;

  std::size_t num_edges() const { return edges.size(); }
  int euler_characteristic(std::size_t num_vertices, std::size_t num_faces) const {
    return static_cast<int>(num_vertices) - static_cast<int>(edges.size()) +
           static_cast<int>(num_faces);
  }
};

MeshTopology build_topology(const TriangleMesh& mesh);

struct ValidationOptions {
  /// Faces with area below floor * bbox_diagonal^2 are rejected.
  double degenerate_area_floor = 1e-14;
};

/// Throws MeshError naming the first violated invariant.
void validate_mesh(const TriangleMesh& mesh, const ValidationOptions& options = {});

int euler_characteristic(const TriangleMesh& mesh);
/// (2 - chi) / 2 summed over a single closed component; throws if chi is odd.
int genus(const TriangleMesh& mesh);
/// Number of connected components (by shared vertices).
int num_components(const TriangleMesh& mesh);

double bounding_box_diagonal(const TriangleMesh& mesh);
double face_area(const TriangleMesh& mesh, int f);
/// Unnormalized face normal (b - a) x (c - a); its length is twice the area.
Vec3 face_normal_vector(const TriangleMesh& mesh, int f);

/// -1/3 * integral <f, nu> dmu, i.e. -sum det(a, b, c) / 6 under the
/// orientation convention above. Translation invariant on closed meshes.
double signed_volume(const TriangleMesh& mesh);
double total_area(const TriangleMesh& mesh);

struct MeshQualityReport {
  double min_edge_length = 0.0;
  double max_edge_length = 0.0;
  double mean_edge_length = 0.0;
  double min_angle = 0.0;  // radians
  double max_angle = 0.0;  // radians
  double min_face_area = 0.0;
  /// Counts of faces with aspect ratio (longest edge / shortest altitude,
  /// normalized so equilateral = 1) in [1,1.5), [1.5,2), [2,3), [3,5), [5,10), [10,inf).
  std::array<std::size_t, 6> aspect_histogram{};
};

MeshQualityReport quality_report(const TriangleMesh& mesh);

TriangleMesh flip_winding(const TriangleMesh& mesh);

struct OrientationStatus {
  bool flipped = false;
  /// Signed volume magnitude too small to decide; mesh returned unchanged.
  bool ambiguous = false;
  double volume_after = 0.0;
};

/// Flip all faces if the signed volume is negative. Identity on meshes that
/// already satisfy the convention.
TriangleMesh orient_for_positive_volume(const TriangleMesh& mesh,
                                        OrientationStatus* status = nullptr);

/// Make windings consistent within each connected component (BFS over edge
/// adjacency), then orient every component for positive volume. Throws on
/// non-orientable input.
TriangleMesh repair_orientation(const TriangleMesh& mesh);

// Generators ---------------------------------------------------------------

inline constexpr int kMaxIcosphereLevel = 7;

/// Subdivided icosahedron with every vertex at distance `radius` from center.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0,
                            const Vec3& center = Vec3::Zero(),
                            int max_subdivisions = kMaxIcosphereLevel);
TriangleMesh make_icosahedron();
TriangleMesh make_tetrahedron();
/// Torus of revolution around the z axis; nu samples around the tube axis
/// circle, nv around the tube.
TriangleMesh make_torus(double major_radius, double minor_radius, int nu, int nv);
/// Icosphere scaled anisotropically.
TriangleMesh make_ellipsoid(int subdivisions, const Vec3& semi_axes);

/// Translate then scale: (v - center) / scale.
TriangleMesh rescale(const TriangleMesh& mesh, double scale, const Vec3& center);
TriangleMesh translate(const TriangleMesh& mesh, const Vec3& offset);
/// Concatenate vertex and face lists.
TriangleMesh merge(const TriangleMesh& a, const TriangleMesh& b);

}  // namespace helfrich
