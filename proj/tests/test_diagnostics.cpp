#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helfrich/diagnostics.hpp"
#include "helfrich/sphere_ode.hpp"
#include "test_util.hpp"

namespace helfrich {
namespace {

double cap_oracle(double r) { return std::min(2.0 * M_PI * r * r, 8.0 * M_PI); }

TEST(Kappa, WholeSphereInsideBall) {
  const TriangleMesh m = make_icosphere(4);
  const GeometryCache c = build_cache(m);
  const KappaValue k = kappa(m, c, 3.0);
  EXPECT_DOUBLE_EQ(k.value, c.total_asq);
  EXPECT_NEAR(k.value, 8.0 * M_PI, 0.02 * 8.0 * M_PI);
}

TEST(Kappa, CapOracle) {
  const TriangleMesh m = make_icosphere(5);
  const GeometryCache c = build_cache(m);
  EXPECT_NEAR(kappa(m, c, 0.5).value, M_PI / 2.0, 0.05 * M_PI / 2.0);
  EXPECT_NEAR(kappa(m, c, 2.0).value, 8.0 * M_PI, 0.05 * 8.0 * M_PI);
  EXPECT_NEAR(kappa(m, c, 1.99).value, cap_oracle(1.99), 0.05 * cap_oracle(1.99));
}

TEST(Kappa, RejectsNonPositiveRadius) {
  const TriangleMesh m = make_icosphere(1);
  EXPECT_THROW(kappa(m, build_cache(m), 0.0), std::invalid_argument);
}

TEST(Kappa, AlwaysPositiveWithVertexCenters) {
  const TriangleMesh m = make_icosphere(3);
  EXPECT_GT(kappa(m, build_cache(m), 1e-9).value, 0.0);
}

TEST(Kappa, SmallBallHoldsOneVertex) {
  // Icosahedron edges are longer than 1, so a ball of radius 0.5 holds only its center.
  const TriangleMesh m = make_icosphere(0);
  const GeometryCache c = build_cache(m);
  const KappaValue k = kappa(m, c, 0.5);
  ASSERT_GE(k.center_vertex, 0);
  const auto v = static_cast<std::size_t>(k.center_vertex);
  EXPECT_NEAR(k.value, c.asq[v] * c.area_weight[v], 1e-12 * k.value);
}

TEST(Kappa, DisjointSpheresNotDoubleCounted) {
  const TriangleMesh one = make_icosphere(3);
  const TriangleMesh two = merge(one, translate(one, Vec3(10, 0, 0)));
  const double a = kappa(one, build_cache(one), 1.0).value;
  const double b = kappa(two, build_cache(two), 1.0).value;
  EXPECT_NEAR(a, b, 1e-12 * a);
}

TEST(KappaProfile, IncreasingToTotal) {
  const TriangleMesh m = make_icosphere(4);
  const GeometryCache c = build_cache(m);
  const KappaProfile p = kappa_profile(m, c, {0.25, 0.5, 1.0, 2.0, 4.0}, 0.5);
  EXPECT_EQ(p.t, 0.5);
  for (std::size_t i = 1; i < p.kappa.size(); ++i) EXPECT_GE(p.kappa[i], p.kappa[i - 1]);
  EXPECT_DOUBLE_EQ(p.kappa.back(), c.total_asq);
  EXPECT_FALSE(p.subsampled);
  EXPECT_THROW(kappa_profile(m, c, {1.0, 0.5}), std::invalid_argument);
}

TEST(KappaProfile, SubsampledIsFlagged) {
  const TriangleMesh m = make_icosphere(3);
  KappaOptions opt;
  opt.center_stride = 4;
  EXPECT_TRUE(kappa_profile(m, build_cache(m), {0.5, 1.0}, 0.0, opt).subsampled);
}

TEST(KappaProfile, MonotoneOnPerturbedMeshes) {
  for (int seed = 0; seed < 5; ++seed) {
    const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.2, seed);
    const GeometryCache c = build_cache(m);
    const KappaProfile p = kappa_profile(m, c, default_radius_grid(c, m));
    for (std::size_t i = 1; i < p.kappa.size(); ++i) EXPECT_GE(p.kappa[i], p.kappa[i - 1] - 1e-12 * c.total_asq);
    EXPECT_NEAR(p.kappa.back(), c.total_asq, 1e-12 * c.total_asq);
  }
}

TEST(SelectRadius, UnitSphereTarget) {
  const TriangleMesh m = make_icosphere(5);
  const GeometryCache c = build_cache(m);
  std::vector<double> radii;
  for (int i = 1; i <= 40; ++i) radii.push_back(0.05 * i);
  const KappaProfile p = kappa_profile(m, c, radii);
  EXPECT_NEAR(select_blowup_radius(p, 2.0 * M_PI), 1.0, 0.05);
  EXPECT_EQ(select_blowup_radius(p, 1e-12), radii.front());
  EXPECT_THROW(select_blowup_radius(p, 2.0 * c.total_asq), DiagnosticsError);
  EXPECT_THROW(select_blowup_radius(p, 0.0), DiagnosticsError);
}

TEST(BlowUpFrame, IdentityRescale) {
  const TriangleMesh m = make_icosphere(2);
  const TriangleMesh same = rescale(m, 1.0, Vec3::Zero());
  EXPECT_EQ(same.vertices, m.vertices);
  EXPECT_EQ(same.faces, m.faces);
}

TEST(BlowUpFrame, EnergyIdentityAndParams) {
  const FlowParams p{2.0, 0.0};
  const FlowState s = make_initial_state(make_icosphere(4), p, SteppingPolicy{});
  const BlowUpFrame f = extract_blowup_frame(s, p, 0.25 * s.cache.total_asq);
  EXPECT_GT(f.r, 0.0);
  EXPECT_DOUBLE_EQ(f.rescaled_params.c0, f.r * 2.0);
  EXPECT_DOUBLE_EQ(f.rescaled_params.lambda, 0.0);
  const double e = penalized_energy(build_cache(f.rescaled_mesh), f.rescaled_params);
  EXPECT_NEAR(e, f.penalized, 1e-12 * std::max(1.0, f.penalized));
}

TEST(BlowUpFrame, HopfSphereRadiusIsStable) {
  const FlowParams p{2.0, 0.0};
  SteppingPolicy policy;
  policy.horizon = 0.5;
  policy.gradient_tolerance = 0.0;
  const FlowState start = make_initial_state(make_icosphere(3), p, policy);
  const BlowUpFrame first = extract_blowup_frame(start, p, 0.25 * start.cache.total_asq);
  const FlowResult res = run_flow(make_icosphere(3), p, policy);
  const BlowUpFrame last = extract_blowup_frame(res.final_state, p, 0.25 * start.cache.total_asq);
  EXPECT_NEAR(last.r, first.r, 0.01 * first.r);
}

class ShrinkerRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const FlowParams p{-1.0, 0.0};
    SteppingPolicy policy;
    policy.gradient_tolerance = 0.0;
    recorder = new BlowUpRecorder(p);
    result = new FlowResult(run_flow(make_icosphere(3), p, policy, {recorder}));
  }
  static void TearDownTestSuite() {
    delete recorder;
    delete result;
  }
  static BlowUpRecorder* recorder;
  static FlowResult* result;
};
BlowUpRecorder* ShrinkerRun::recorder = nullptr;
FlowResult* ShrinkerRun::result = nullptr;

TEST_F(ShrinkerRun, FramesAreRoundAndCentered) {
  const auto& frames = recorder->frames();
  ASSERT_GE(frames.size(), 5u);
  const BlowUpFrame& f = frames.back();
  const GeometryCache c = build_cache(f.rescaled_mesh);
  double r = 0.0;
  for (const Vec3& v : f.rescaled_mesh.vertices) r += v.norm();
  r /= static_cast<double>(f.rescaled_mesh.num_vertices());
  EXPECT_GT(r, 0.1);
  EXPECT_LT(r, 10.0);
  EXPECT_LT(c.willmore0, 1e-2);
}

TEST_F(ShrinkerRun, RadiusTracksSqrtArea) {
  const auto& frames = recorder->frames();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const double ratio = frames[i].r / frames[i - 1].r;
    const double expected = std::sqrt(frames[i].area / frames[i - 1].area);
    EXPECT_NEAR(ratio, expected, 0.2 * expected);
  }
}

TEST_F(ShrinkerRun, FramesPrecedeExtinction) {
  const double t_end = result->report.final_time;
  for (const BlowUpFrame& f : recorder->frames()) EXPECT_LT(f.t + std::pow(f.r, 4) * 0.05, t_end);
}

TEST_F(ShrinkerRun, ClassifiedAsRoundShrinker) {
  const SingularityClassification c = classify_singularity(recorder->frames());
  EXPECT_EQ(c.verdict, SingularityVerdict::RoundShrinker);
  EXPECT_LT(c.fit_residual, 0.02);
  EXPECT_NEAR(c.willmore.back(), 4.0 * M_PI, 0.05 * 4.0 * M_PI);
}

TEST_F(ShrinkerRun, MonitorsTrackBudget) {
  ASSERT_FALSE(recorder->monitors().empty());
  for (const HypothesisRecord& h : recorder->monitors()) {
    EXPECT_TRUE(h.mean_curvature_positive);
    ASSERT_TRUE(h.remaining_time_budget.has_value());
    EXPECT_GT(*h.remaining_time_budget, 0.0);
  }
}

TEST_F(ShrinkerRun, FramesAndProfileWritten) {
  const auto dir = test::temp_dir() / "frames";
  write_frame(dir, 3, recorder->frames().front());
  EXPECT_TRUE(std::filesystem::exists(dir / "0003.off"));
  std::ifstream meta(dir / "0003.meta");
  std::string first;
  std::getline(meta, first);
  EXPECT_EQ(first.rfind("t = ", 0), 0u);

  const FlowState& s = result->final_state;
  std::ostringstream csv;
  write_kappa_profile(csv, kappa_profile(s.mesh, s.cache, {0.01, 0.1}, s.t));
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,r,kappa,cx,cy,cz");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

BlowUpFrame synthetic_frame(const TriangleMesh& m, double t, double area) {
  BlowUpFrame f;
  f.t = t;
  f.r = 1.0;
  f.rescaled_mesh = m;
  const GeometryCache c = build_cache(m);
  f.willmore = c.willmore;
  f.penalized = c.willmore;
  f.area = area;
  return f;
}

TEST(Classify, EllipsoidIsNotRound) {
  const TriangleMesh e = make_ellipsoid(3, Vec3(2.0, 1.0, 1.0));
  std::vector<BlowUpFrame> frames{synthetic_frame(e, 0, 1.0), synthetic_frame(e, 1, 0.25), synthetic_frame(e, 2, 0.05)};
  const SingularityClassification c = classify_singularity(frames);
  EXPECT_EQ(c.verdict, SingularityVerdict::NonRoundConcentration);
  EXPECT_GT(c.fit_residual, 0.02);
}

TEST(Classify, ConvergedRunIsNone) {
  // Round frames at constant area: no concentration.
  const FlowParams p{1.0, 0.5};
  BlowUpRecorder rec(p);
  const FlowResult res = run_flow(make_icosphere(3, 1.0), p, SteppingPolicy{}, {&rec});
  ASSERT_EQ(res.report.reason, TerminationReason::Converged);
  std::vector<BlowUpFrame> frames(3, rec.frames().front());
  EXPECT_EQ(classify_singularity(frames).verdict, SingularityVerdict::None);
}

TEST(Classify, NeedsThreeFrames) {
  EXPECT_THROW(classify_singularity({}), DiagnosticsError);
}

TEST(FitSphere, RecoversCenterAndRadius) {
  const TriangleMesh m = make_icosphere(3, 2.5, Vec3(1, -2, 3));
  const SphereFit f = fit_sphere(m.vertices);
  EXPECT_NEAR(f.radius, 2.5, 1e-10);
  EXPECT_LT((f.center - Vec3(1, -2, 3)).norm(), 1e-10);
  EXPECT_LT(f.residual, 1e-12);
  EXPECT_THROW(fit_sphere({Vec3::Zero()}), DiagnosticsError);
}

TEST(Monitors, ThresholdExamples) {
  const FlowParams eq{1.0, 0.5};
  const FlowState s = make_initial_state(make_icosphere(4), eq, SteppingPolicy{});
  const HypothesisRecord h = hypothesis_monitors(s, eq);
  ASSERT_TRUE(h.energy_threshold.has_value());
  EXPECT_NEAR(*h.energy_threshold, 4.0 * M_PI, 1e-12);
  EXPECT_TRUE(h.below_threshold.value_or(false));
  EXPECT_FALSE(h.t_bound.has_value());
  EXPECT_NEAR(h.mean_curvature_integral, 8.0 * M_PI, 0.02 * 8.0 * M_PI);
  EXPECT_TRUE(h.mean_curvature_positive);

  const FlowParams shrink{-1.0, 0.0};
  FlowState t = make_initial_state(make_icosphere(4), shrink, SteppingPolicy{});
  t.initial_energy = 9.0 * M_PI;
  const HypothesisRecord g = hypothesis_monitors(t, shrink);
  ASSERT_TRUE(g.t_bound.has_value());
  EXPECT_NEAR(*g.t_bound, 260.0, 1e-10);
  EXPECT_NEAR(*g.remaining_time_budget, 260.0, 1e-10);
}

}  // namespace
}  // namespace helfrich
