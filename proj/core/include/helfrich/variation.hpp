#pragma once

#include <cstdint>
#include <vector>

#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"

namespace helfrich {

enum class Functional { Area, Volume, Helfrich, Penalized };

/// Discrete value of the functional: area, signed volume, H_{c0} or H_{c0,lambda}.
double functional_value(const TriangleMesh& mesh, const FlowParams& params, Functional functional);

/// Strong-form first variation along the normal field phi_i nu_i:
/// area -sum H phi a, volume -sum phi a, Helfrich sum (grad H_{c0}) phi a,
/// penalized adds -lambda/2 sum H phi a.
double analytic_variation(const GeometryCache& cache, const FlowParams& params, Functional functional,
                          const std::vector<double>& phi);

/// Exact derivative of the discrete functional along the vertex displacement
/// field `direction` (forward-mode dual numbers).
double exact_directional_derivative(const TriangleMesh& mesh, const FlowParams& params, Functional functional,
                                    const std::vector<Vec3>& direction);

/// Exact gradient of the discrete functional with respect to every vertex position.
std::vector<Vec3> discrete_gradient(const TriangleMesh& mesh, const FlowParams& params, Functional functional);

/// Normal speed from the exact discrete gradient of H_{c0,lambda}:
/// xi_i = -2 <grad_i E, nu_i> / a_i. Matches flow_velocity up to
/// discretization error.
VertexField exact_gradient_velocity(const GeometryCache& cache, const TriangleMesh& mesh,
                                    const FlowParams& params);

struct VariationCheck {
  double analytic = 0.0;
  double finite_difference = 0.0;
  double exact_discrete = 0.0;
  double step = 0.0;
};

/// Central finite difference of the functional along phi_i nu_i with step
/// `relative_step * bbox diagonal`, alongside the analytic and exact values.
/// Throws GeometryError if the step underflows relative to the coordinates.
VariationCheck first_variation_check(const TriangleMesh& mesh, const FlowParams& params,
                                     const std::vector<double>& phi, Functional functional,
                                     double relative_step = 1e-5);

/// Smooth random scalar field: a + b.x + c sin(k.x + p) with the
/// coefficients drawn from `seed`, evaluated at the vertices.
std::vector<double> random_smooth_field(const TriangleMesh& mesh, std::uint64_t seed);

}  // namespace helfrich
