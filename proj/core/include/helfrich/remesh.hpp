#pragma once

#include <memory>
#include <vector>

#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"

namespace helfrich {

struct RemeshOptions {
  double target_edge = 0.0;
  /// Faces whose smallest angle is below this (radians) are improved by flips
  /// and relaxation; the output is checked against it.
  double min_angle_floor = 0.35;
  int iterations = 6;
  /// Shrink the local target to curvature_angle / sqrt(|A|^2 / 2), i.e. an
  /// edge subtends at most this angle of the local curvature radius.
  bool curvature_adaptive = false;
  double curvature_angle = 0.35;
  /// Output vertices are projected back onto the input surface. The run is
  /// rejected if the sampled Hausdorff distance exceeds this multiple of
  /// target_edge.
  double max_hausdorff_fraction = 0.25;
};

struct RemeshReport {
  std::size_t splits = 0;
  std::size_t collapses = 0;
  std::size_t flips = 0;
  double hausdorff = 0.0;
  MeshQualityReport quality;
};

/// Isotropic remeshing (split long, collapse short, valence flips, tangential
/// relaxation with projection onto the input). Genus and orientation are
/// preserved; a change in Euler characteristic throws MeshError.
TriangleMesh remesh(const TriangleMesh& mesh, const RemeshOptions& options, RemeshReport* report = nullptr);

/// Closest-point queries against a fixed triangle mesh, accelerated by a
/// uniform grid over face bounding boxes.
class SurfaceLocator {
 public:
  explicit SurfaceLocator(const TriangleMesh& mesh);
  ~SurfaceLocator();
  SurfaceLocator(SurfaceLocator&&) noexcept;
  SurfaceLocator& operator=(SurfaceLocator&&) noexcept;

  struct Hit {
    Vec3 point;
    int face = -1;
    /// Barycentric coordinates with respect to the face's corners.
    Vec3 barycentric;
    double distance = 0.0;
  };

  Hit closest(const Vec3& p) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Symmetric Hausdorff distance estimated on vertices, edge midpoints and
/// face centroids of both meshes.
double hausdorff_distance(const TriangleMesh& a, const TriangleMesh& b);

/// Barycentric interpolation of a vertex field of `from` onto the vertices
/// of `to` through closest-point projection.
VertexField transfer_field(const TriangleMesh& from, const VertexField& field, const TriangleMesh& to);

}  // namespace helfrich
