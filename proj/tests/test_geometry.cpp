#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"
#include "test_util.hpp"

namespace helfrich {
namespace {

double max_abs_dev(const std::vector<double>& v, double target) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x - target));
  return m;
}

TEST(BuildCache, SphereMeanCurvatureConverges) {
  double prev = 1e300;
  for (int level = 2; level <= 5; ++level) {
    const GeometryCache c = build_cache(make_icosphere(level));
    const double dev = max_abs_dev(c.mean_curvature, 2.0) / 2.0;
    EXPECT_LT(dev, prev) << "level " << level;
    if (level == 4) EXPECT_LE(dev, 0.02);
    prev = dev;
  }
}

TEST(BuildCache, SphereIsNearlyUmbilic) {
  const GeometryCache c = build_cache(make_icosphere(4));
  EXPECT_LE(*std::max_element(c.a0sq.begin(), c.a0sq.end()), 0.05);
  for (double x : c.a0sq) EXPECT_GE(x, 0.0);
}

TEST(BuildCache, TetrahedronAngleDefect) {
  const GeometryCache c = build_cache(make_tetrahedron());
  EXPECT_NEAR(c.angle_defect_total, 4.0 * M_PI, 1e-14);
}

TEST(BuildCache, AsqSplitHoldsIdentically) {
  for (const TriangleMesh& m : {make_icosphere(3), make_torus(1.0, 0.3, 32, 16),
                                test::radially_perturbed(make_icosphere(3), 0.1, 7)}) {
    const GeometryCache c = build_cache(m);
    for (std::size_t i = 0; i < c.num_vertices(); ++i) {
      const double h = c.mean_curvature[i];
      EXPECT_EQ(c.asq[i], c.a0sq[i] + 0.5 * h * h);
      EXPECT_GE(c.a0sq[i], 0.0);
    }
  }
}

TEST(BuildCache, AreaWeightsSumToArea) {
  const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.1, 3);
  const GeometryCache c = build_cache(m);
  double s = 0.0;
  for (double a : c.area_weight) s += a;
  EXPECT_NEAR(s, total_area(m), 1e-12 * total_area(m));
  EXPECT_NEAR(area(c), total_area(m), 1e-12 * total_area(m));
}

TEST(BuildCache, DegenerateFaceIsNamed) {
  TriangleMesh m = make_icosphere(1);
  m.vertices[m.faces[5][1]] = m.vertices[m.faces[5][0]];
  try {
    build_cache(m);
    FAIL() << "expected GeometryError";
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("face"), std::string::npos);
  }
}

TEST(GaussBonnet, ExactOnAllMeshes) {
  std::vector<TriangleMesh> meshes{make_tetrahedron(), make_torus(1.0, 0.4, 40, 20)};
  for (int l = 0; l <= 5; ++l) meshes.push_back(make_icosphere(l));
  meshes.push_back(test::radially_perturbed(make_icosphere(3), 0.2, 11));
  for (const TriangleMesh& m : meshes) {
    const GeometryCache c = build_cache(m);
    EXPECT_NEAR(c.angle_defect_total, 2.0 * M_PI * c.euler_characteristic, 1e-10);
  }
}

TEST(AreaVolume, SphereLimits) {
  const TriangleMesh m = make_icosphere(5);
  EXPECT_NEAR(total_area(m), 4.0 * M_PI, 1e-3 * 4.0 * M_PI);
  EXPECT_NEAR(signed_volume(m), 4.0 * M_PI / 3.0, 3e-3 * 4.0 * M_PI / 3.0);
  EXPECT_NEAR(signed_volume(make_tetrahedron()), 1.0 / 6.0, 1e-15);
}

TEST(AreaVolume, TranslationInvariance) {
  const TriangleMesh m = make_icosphere(4);
  const double v = signed_volume(m);
  EXPECT_NEAR(signed_volume(translate(m, Vec3(10, 0, 0))), v, 1e-10 * v);
}

TEST(Energies, RoundSphereClosedForm) {
  const GeometryCache c = build_cache(make_icosphere(5));
  const FlowParams p{1.0, 0.5};
  EXPECT_NEAR(penalized_energy(c, p), 2.0 * M_PI, 0.01 * 2.0 * M_PI);
  EXPECT_NEAR(willmore_energy(c), 4.0 * M_PI, 0.01 * 4.0 * M_PI);
  EXPECT_EQ(helfrich_energy(c, FlowParams{}), willmore_energy(c));
  const double r = 1.7;
  const GeometryCache cr = build_cache(make_icosphere(5, r));
  const FlowParams q{-0.8, 0.3};
  const double expected = M_PI * std::pow(2.0 - q.c0 * r, 2) + 2.0 * M_PI * q.lambda * r * r;
  EXPECT_NEAR(penalized_energy(cr, q), expected, 0.01 * expected);
}

TEST(Energies, NonNegative) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c0(-3, 3), lam(0, 2);
  for (int k = 0; k < 20; ++k) {
    const GeometryCache c = build_cache(test::radially_perturbed(make_icosphere(2), 0.15, k));
    const FlowParams p{c0(rng), lam(rng)};
    EXPECT_GE(willmore_energy(c), 0.0);
    EXPECT_GE(helfrich_energy(c, p), 0.0);
    EXPECT_GE(penalized_energy(c, p), helfrich_energy(c, p));
  }
}

TEST(GaussBonnetResidual, SphereRefinement) {
  double prev = 1e300;
  for (int level = 2; level <= 5; ++level) {
    const double res = gauss_bonnet_residual(build_cache(make_icosphere(level)), 0);
    EXPECT_LT(res, prev);
    if (level == 4) EXPECT_LE(res, 0.05);
    prev = res;
  }
}

TEST(GaussBonnetResidual, PerturbedSphereRefinement) {
  // Same smooth field on every level.
  std::vector<double> res;
  for (int level = 3; level <= 5; ++level) {
    res.push_back(gauss_bonnet_residual(build_cache(test::radially_perturbed(make_icosphere(level), 0.05, 2)), 0));
  }
  EXPECT_LT(res[1], res[0]);
  EXPECT_LT(res[2], res[1]);
  EXPECT_LT(res[2], 0.05);
}

TEST(GaussBonnetResidual, TorusWithoutClampIsExact) {
  for (int n : {24, 96}) {
    const GeometryCache c = build_cache(make_torus(1.0, 0.4, n, n / 2));
    EXPECT_EQ(c.clamp_mass, 0.0);
    EXPECT_LT(gauss_bonnet_residual(c, 1), 1e-10);
  }
}

TEST(WillmoreBound, ClosedFormSpheres) {
  const GeometryCache c = build_cache(make_icosphere(5));
  EXPECT_NEAR(willmore_bound_residual(c, FlowParams{1.0, 0.5}), 0.0, 0.01 * 4.0 * M_PI);
  EXPECT_NEAR(willmore_bound_residual(c, FlowParams{1.0, 1.0}), 0.5 * M_PI, 0.01 * 4.0 * M_PI);
  EXPECT_THROW(willmore_bound_residual(c, FlowParams{1.0, 0.0}), std::invalid_argument);
}

TEST(WillmoreBound, PerturbedSpheresProperty) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> c0(-3, 3), lam(0.01, 2);
  for (int k = 0; k < 100; ++k) {
    const GeometryCache c = build_cache(test::radially_perturbed(make_icosphere(2), 0.05, 100 + k));
    const FlowParams p{c0(rng), lam(rng)};
    EXPECT_GE(willmore_bound_residual(c, p), -1e-6 * willmore_energy(c));
  }
}

TEST(FlowVelocity, RoundSphereValues) {
  const GeometryCache c = build_cache(make_icosphere(5));
  struct Case {
    FlowParams p;
    double xi;
  };
  for (const Case& k : {Case{{2.0, 0.0}, 0.0}, Case{{-1.0, 0.0}, 3.0}, Case{{1.0, 0.5}, 0.0}}) {
    const VertexField xi = flow_velocity(c, k.p);
    EXPECT_EQ(xi.size(), c.num_vertices());
    EXPECT_LE(max_abs_dev(xi.values, k.xi), 0.05) << "c0 = " << k.p.c0;
  }
}

TEST(FlowVelocity, RadiusScaling) {
  const double r = 2.0;
  const FlowParams p{-0.5, 0.25};
  const GeometryCache c = build_cache(make_icosphere(5, r));
  const double expected = -2.0 * p.c0 / (r * r) + (2.0 * p.lambda + p.c0 * p.c0) / r;
  EXPECT_LE(max_abs_dev(flow_velocity(c, p).values, expected), 0.02);
}

TEST(MeanCurvatureIntegral, Spheres) {
  EXPECT_NEAR(mean_curvature_integral(build_cache(make_icosphere(5))), 8.0 * M_PI, 0.01 * 8.0 * M_PI);
  const double r = 0.3;
  EXPECT_NEAR(mean_curvature_integral(build_cache(make_icosphere(5, r))), 8.0 * M_PI * r, 0.01 * 8.0 * M_PI * r);
}

TEST(MeanCurvatureIntegral, MirrorReoriented) {
  const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.1, 4);
  TriangleMesh mirror = m;
  for (Vec3& v : mirror.vertices) v.x() = -v.x();
  ASSERT_LT(signed_volume(mirror), 0.0);
  const double a = mean_curvature_integral(build_cache(m));
  const double b = mean_curvature_integral(build_cache(orient_for_positive_volume(mirror)));
  EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
}

TEST(Equivariance, Scaling) {
  const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.1, 9);
  const double s = 3.0;
  TriangleMesh ms = m;
  for (Vec3& v : ms.vertices) v *= s;
  const GeometryCache c = build_cache(m), cs = build_cache(ms);
  for (std::size_t i = 0; i < c.num_vertices(); ++i) {
    EXPECT_NEAR(cs.mean_curvature[i], c.mean_curvature[i] / s, 1e-12 * std::abs(c.mean_curvature[i]) + 1e-14);
    EXPECT_NEAR(cs.gauss_curvature[i], c.gauss_curvature[i] / (s * s), 1e-12 * std::abs(c.gauss_curvature[i]) + 1e-14);
  }
  EXPECT_NEAR(cs.total_area, c.total_area * s * s, 1e-12 * cs.total_area);
  EXPECT_NEAR(cs.signed_volume, c.signed_volume * s * s * s, 1e-12 * cs.signed_volume);
  EXPECT_NEAR(cs.willmore, c.willmore, 1e-12 * c.willmore);
}

TEST(Equivariance, ParabolicEnergyIdentity) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> c0(-3, 3), lam(0, 2), x(-2, 2);
  for (int k = 0; k < 20; ++k) {
    const TriangleMesh m = test::radially_perturbed(make_icosphere(2, 0.5 + 0.1 * k), 0.1, 300 + k);
    const FlowParams p{c0(rng), lam(rng)};
    const Vec3 center(x(rng), x(rng), x(rng));
    const double e = penalized_energy(build_cache(m), p);
    for (double r : {0.5, 1.0, 2.0, 5.0}) {
      const double er = penalized_energy(build_cache(rescale(m, r, center)), p.rescaled(r));
      EXPECT_NEAR(er, e, 1e-12 * e);
    }
  }
}

TEST(FlowParams, Validation) {
  EXPECT_THROW((FlowParams{0.0, -1.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((FlowParams{0.0, -1.0, true}.validate()));
  EXPECT_THROW((FlowParams{std::nan(""), 0.0}.validate()), std::invalid_argument);
  const FlowParams r = FlowParams{1.0, 0.5}.rescaled(2.0);
  EXPECT_EQ(r.c0, 2.0);
  EXPECT_EQ(r.lambda, 2.0);
}

TEST(VertexField, Units) {
  const GeometryCache c = build_cache(make_icosphere(1));
  const VertexField xi = flow_velocity(c, FlowParams{});
  EXPECT_FALSE(xi.unit.empty());
  for (double v : xi.values) EXPECT_TRUE(std::isfinite(v));
}

}  // namespace
}  // namespace helfrich
