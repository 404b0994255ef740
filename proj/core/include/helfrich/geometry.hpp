#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "helfrich/mesh.hpp"

namespace helfrich {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spontaneous curvature c0 (1/length) and area penalty lambda (1/length^2).
struct FlowParams {
  double c0 = 0.0;
  double lambda = 0.0;
  /// lambda < 0 is rejected unless this is set.
  bool allow_negative_lambda = false;

  /// Throws std::invalid_argument on non-finite values or lambda < 0.
  void validate() const;
  /// Parameters of the parabolically rescaled flow f / r.
  FlowParams rescaled(double r) const;
};

/// One value per vertex together with its physical unit.
struct VertexField {
  std::vector<double> values;
  std::string unit;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Per-vertex geometry and global integrals of a mesh snapshot.
///
/// H_i = <(Delta f)_i, nu_i> with the cotan Laplace-Beltrami operator and
/// nu_i the area-weighted vertex normal; K_i is the angle defect over the
/// mixed Voronoi area. Round spheres get H = 2/r > 0.
struct GeometryCache {
  std::shared_ptr<const MeshTopology> topology;

  std::vector<double> area_weight;      // a_i, length^2
  std::vector<Vec3> normal;             // nu_i
  std::vector<Vec3> laplacian_position; // (Delta f)_i, 1/length
  std::vector<double> mean_curvature;   // H_i, 1/length
  std::vector<double> gauss_curvature;  // K_i, 1/length^2
  std::vector<double> a0sq;             // |A0|^2_i, clamped at 0
  std::vector<double> asq;              // |A|^2_i = |A0|^2_i + H_i^2 / 2

  /// Cotan stiffness: L_ij = (cot a + cot b) / 2, L_ii = -sum_j L_ij.
  /// Delta u = M^{-1} L u with M = diag(area_weight).
  SparseMatrix stiffness;

  double total_area = 0.0;
  double signed_volume = 0.0;
  double willmore = 0.0;           // 1/4 sum H^2 a
  double willmore0 = 0.0;          // sum |A0|^2 a
  double total_asq = 0.0;          // sum |A|^2 a
  double mean_curvature_integral = 0.0;
  double angle_defect_total = 0.0; // sum K a, equals 2 pi chi
  double clamp_mass = 0.0;         // sum |min(0, H^2/2 - 2K)| a
  double sup_asq = 0.0;
  double min_edge_length = 0.0;
  double mean_edge_length = 0.0;
  int euler_characteristic = 0;

  std::size_t num_vertices() const { return area_weight.size(); }
};

/// `topology` may be passed to skip re-deriving connectivity when only
/// positions changed.
GeometryCache build_cache(const TriangleMesh& mesh,
                          std::shared_ptr<const MeshTopology> topology = nullptr);

double area(const GeometryCache& cache);
double willmore_energy(const GeometryCache& cache);
/// 1/4 sum (H_i - c0)^2 a_i
double helfrich_energy(const GeometryCache& cache, const FlowParams& params);
/// helfrich_energy + lambda/2 * area
double penalized_energy(const GeometryCache& cache, const FlowParams& params);
double mean_curvature_integral(const GeometryCache& cache);

/// max of |W0 - (2W - 8 pi (1-g))| and |int |A|^2 - (4(W - 2 pi) + 8 pi g)|.
double gauss_bonnet_residual(const GeometryCache& cache, int genus);

/// (2 lambda + c0^2) / (2 lambda) * H_{c0,lambda} - W; non-negative in the
/// continuum. Throws std::invalid_argument when lambda <= 0.
double willmore_bound_residual(const GeometryCache& cache, const FlowParams& params);

/// Delta u = M^{-1} L u for a scalar vertex field.
std::vector<double> apply_laplacian(const GeometryCache& cache, const std::vector<double>& u);

/// Normal speed of the flow:
/// xi = -(Delta H + |A0|^2 H - c0 (|A0|^2 - H^2/2) - (lambda + c0^2/2) H).
/// The velocity is xi_i * nu_i.
VertexField flow_velocity(const GeometryCache& cache, const FlowParams& params);

/// sqrt(sum xi_i^2 a_i), the L2 norm of the velocity.
double velocity_l2_norm(const GeometryCache& cache, const VertexField& xi);

/// Pointwise L2 gradient of H_{c0}: [Delta H + |A0|^2 (H - c0) + c0 H (H - c0) / 2] / 2.
std::vector<double> helfrich_gradient_density(const GeometryCache& cache, const FlowParams& params);

}  // namespace helfrich
