#include <gtest/gtest.h>

#include <cmath>

#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"
#include "helfrich/variation.hpp"
#include "test_util.hpp"

namespace helfrich {
namespace {

TEST(FirstVariation, VolumeUnitField) {
  const TriangleMesh m = make_icosphere(4);
  const std::vector<double> one(m.num_vertices(), 1.0);
  const VariationCheck v = first_variation_check(m, FlowParams{}, one, Functional::Volume);
  EXPECT_NEAR(v.analytic, -total_area(m), 1e-12 * total_area(m));
  EXPECT_NEAR(v.analytic, -4.0 * M_PI, 0.01 * 4.0 * M_PI);
  EXPECT_NEAR(v.finite_difference, v.analytic, 1e-3 * std::abs(v.analytic));
}

TEST(FirstVariation, AreaUnitField) {
  const TriangleMesh m = make_icosphere(4);
  const std::vector<double> one(m.num_vertices(), 1.0);
  const VariationCheck v = first_variation_check(m, FlowParams{}, one, Functional::Area);
  EXPECT_NEAR(v.analytic, -8.0 * M_PI, 0.01 * 8.0 * M_PI);
  EXPECT_NEAR(v.finite_difference, v.analytic, 1e-3 * std::abs(v.analytic));
}

TEST(FirstVariation, HopfSphereIsCritical) {
  const TriangleMesh m = make_icosphere(4);
  const std::vector<double> one(m.num_vertices(), 1.0);
  const VariationCheck v = first_variation_check(m, FlowParams{2.0, 0.0}, one, Functional::Helfrich);
  // Scale of the individual terms is |c0 H^2 a| ~ 8 * 4 pi.
  EXPECT_LE(std::abs(v.analytic), 1e-2 * 32.0 * M_PI);
  EXPECT_LE(std::abs(v.finite_difference), 1e-2 * 32.0 * M_PI);
}

TEST(FirstVariation, PenalizedAddsAreaTerm) {
  const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.1, 1);
  const GeometryCache c = build_cache(m);
  const std::vector<double> phi = random_smooth_field(m, 3);
  const FlowParams p{0.7, 0.4};
  const double pen = analytic_variation(c, p, Functional::Penalized, phi);
  const double hel = analytic_variation(c, p, Functional::Helfrich, phi);
  const double area = analytic_variation(c, p, Functional::Area, phi);
  EXPECT_NEAR(pen, hel + 0.5 * p.lambda * area, 1e-12 * (std::abs(pen) + 1.0));
}

TEST(FirstVariation, SecondOrderDecay) {
  const TriangleMesh m = make_icosphere(3);
  const FlowParams p{1.0, 0.0};
  const std::vector<double> phi = random_smooth_field(m, 42);
  for (Functional fn : {Functional::Volume, Functional::Helfrich}) {
    const VariationCheck a = first_variation_check(m, p, phi, fn, 1e-3);
    const VariationCheck b = first_variation_check(m, p, phi, fn, 1e-4);
    const double da = std::abs(a.finite_difference - a.exact_discrete);
    const double db = std::abs(b.finite_difference - b.exact_discrete);
    EXPECT_GE(std::log10(da / db), 1.9);
  }
}

TEST(FirstVariation, StepUnderflowThrows) {
  const TriangleMesh m = make_icosphere(2);
  const std::vector<double> one(m.num_vertices(), 1.0);
  EXPECT_THROW(first_variation_check(m, FlowParams{}, one, Functional::Area, 1e-16), GeometryError);
}

TEST(DiscreteGradient, MatchesDirectionalDerivative) {
  const TriangleMesh m = test::radially_perturbed(make_icosphere(2), 0.1, 5);
  const FlowParams p{-0.6, 0.3};
  std::vector<Vec3> dir(m.num_vertices());
  for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = Vec3(std::sin(1.0 * i), std::cos(2.0 * i), 0.3);
  for (Functional fn : {Functional::Area, Functional::Volume, Functional::Helfrich, Functional::Penalized}) {
    const std::vector<Vec3> g = discrete_gradient(m, p, fn);
    double dot = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) dot += g[i].dot(dir[i]);
    const double dd = exact_directional_derivative(m, p, fn, dir);
    EXPECT_NEAR(dot, dd, 1e-10 * (std::abs(dd) + 1.0));
  }
}

TEST(DiscreteGradient, ExactAndStrongVelocityConverge) {
  const FlowParams p{1.0, 0.5};
  double prev = 1e300;
  for (int level = 2; level <= 4; ++level) {
    const TriangleMesh m = test::radially_perturbed(make_icosphere(level), 0.05, 8);
    const GeometryCache c = build_cache(m);
    const VertexField strong = flow_velocity(c, p);
    const VertexField exact = exact_gradient_velocity(c, m, p);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < c.num_vertices(); ++i) {
      num += std::pow(strong[i] - exact[i], 2) * c.area_weight[i];
      den += std::pow(exact[i], 2) * c.area_weight[i];
    }
    const double rel = std::sqrt(num / den);
    EXPECT_LT(rel, prev) << "level " << level;
    prev = rel;
  }
  EXPECT_LT(prev, 0.2);
}

TEST(FunctionalValue, MatchesCache) {
  const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.1, 6);
  const GeometryCache c = build_cache(m);
  const FlowParams p{0.5, 0.2};
  EXPECT_NEAR(functional_value(m, p, Functional::Area), c.total_area, 1e-12 * c.total_area);
  EXPECT_NEAR(functional_value(m, p, Functional::Volume), c.signed_volume, 1e-12 * c.signed_volume);
  EXPECT_NEAR(functional_value(m, p, Functional::Helfrich), helfrich_energy(c, p), 1e-12 * helfrich_energy(c, p));
  EXPECT_NEAR(functional_value(m, p, Functional::Penalized), penalized_energy(c, p), 1e-12 * penalized_energy(c, p));
}

TEST(RandomSmoothField, DeterministicPerSeed) {
  const TriangleMesh m = make_icosphere(2);
  EXPECT_EQ(random_smooth_field(m, 1), random_smooth_field(m, 1));
  EXPECT_NE(random_smooth_field(m, 1), random_smooth_field(m, 2));
}

}  // namespace
}  // namespace helfrich
