#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helfrich/flow.hpp"
#include "helfrich/sphere_ode.hpp"
#include "test_util.hpp"

namespace helfrich {
namespace {

double mean_radius(const TriangleMesh& m) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& v : m.vertices) c += v;
  c /= static_cast<double>(m.num_vertices());
  double r = 0.0;
  for (const Vec3& v : m.vertices) r += (v - c).norm();
  return r / static_cast<double>(m.num_vertices());
}

SteppingPolicy no_convergence() {
  SteppingPolicy p;
  p.gradient_tolerance = 0.0;
  return p;
}

TEST(Step, StationaryHopfSphere) {
  SteppingPolicy policy = no_convergence();
  policy.horizon = 1.0;
  const FlowResult res = run_flow(make_icosphere(4), FlowParams{2.0, 0.0}, policy);
  EXPECT_EQ(res.report.reason, TerminationReason::HorizonReached);
  EXPECT_DOUBLE_EQ(res.report.final_time, 1.0);
  double drift = 0.0;
  for (const Vec3& v : res.final_state.mesh.vertices) drift = std::max(drift, std::abs(v.norm() - 1.0));
  EXPECT_LE(drift, 0.01);
}

TEST(Step, ExplicitShrinkingSphereRate) {
  SteppingPolicy policy;
  policy.mode = SteppingMode::Explicit;
  policy.dt_init = 1e-5;
  policy.cfl_coefficient = 1e6;
  const FlowParams p{-1.0, 0.0};
  const TriangleMesh m = make_icosphere(4);
  const FlowState s = make_initial_state(m, p, policy);
  const StepResult r = step(s, p, policy);
  ASSERT_TRUE(r.accepted);
  EXPECT_DOUBLE_EQ(r.state.t, 1e-5);
  const double dr = mean_radius(m) - mean_radius(r.state.mesh);
  EXPECT_NEAR(dr, 3e-5, 0.05 * 3e-5);
}

TEST(Step, EnergyIncreaseIsRejected) {
  SteppingPolicy policy;
  policy.mode = SteppingMode::Explicit;
  policy.cfl_coefficient = 1e12;
  policy.max_displacement = 1e12;
  policy.dt_init = 1.0;
  const FlowParams p{0.0, 0.0};
  const FlowState s = make_initial_state(test::radially_perturbed(make_icosphere(3), 0.1, 1), p, policy);
  const StepResult r = step(s, p, policy);
  EXPECT_FALSE(r.accepted);
  EXPECT_DOUBLE_EQ(r.state.dt, s.dt * policy.shrink);
  EXPECT_EQ(r.state.rejections, s.rejections + 1);
  EXPECT_EQ(r.state.t, s.t);
  EXPECT_EQ(r.state.step_index, s.step_index);
  EXPECT_EQ(r.state.mesh.vertices, s.mesh.vertices);
}

TEST(Step, AcceptedStepsDecreaseEnergy) {
  const FlowParams p{0.5, 0.3};
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 40;
  const FlowResult res = run_flow(test::radially_perturbed(make_icosphere(3), 0.1, 2), p, policy);
  for (std::size_t i = 1; i < res.series.size(); ++i) {
    EXPECT_LE(res.series[i].penalized - res.series[i - 1].penalized,
              policy.energy_tolerance * std::abs(res.series.front().penalized));
    EXPECT_GE(res.series[i].t, res.series[i - 1].t);
  }
}

TEST(RunFlow, EquilibriumAttraction) {
  const FlowParams p{1.0, 0.5};
  const FlowResult res = run_flow(make_icosphere(4, 1.5), p, SteppingPolicy{});
  EXPECT_EQ(res.report.reason, TerminationReason::Converged);
  EXPECT_NEAR(mean_radius(res.final_state.mesh), 1.0, 0.02);
  EXPECT_LT(res.final_state.cache.willmore0, 1e-3);
}

TEST(RunFlow, ShrinkingSphereCollapses) {
  const FlowParams p{-1.0, 0.0};
  const FlowResult res = run_flow(make_icosphere(3), p, no_convergence());
  EXPECT_EQ(res.report.reason, TerminationReason::SingularAreaCollapse);
  EXPECT_TRUE(is_singular(res.report.reason));
  EXPECT_NEAR(res.report.final_time, *extinction_time_closed_form(1.0, p), 0.15 * 0.121860);
  EXPECT_LT(res.report.area_ratio, SteppingPolicy{}.area_floor);
}

TEST(RunFlow, HopfSphereConvergesAtLooseTolerance) {
  SteppingPolicy policy;
  const FlowState s = make_initial_state(make_icosphere(4), FlowParams{2.0, 0.0}, policy);
  const double g0 = velocity_l2_norm(s.cache, flow_velocity(s.cache, FlowParams{2.0, 0.0}));
  policy.gradient_tolerance = 2.0 * g0;
  policy.convergence_window = 1;
  const FlowResult res = run_flow(make_icosphere(4), FlowParams{2.0, 0.0}, policy);
  EXPECT_EQ(res.report.reason, TerminationReason::Converged);
  EXPECT_EQ(res.report.steps, 0u);
}

TEST(RunFlow, StepBudget) {
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 3;
  const FlowResult res = run_flow(make_icosphere(2), FlowParams{-1.0, 0.0}, policy);
  EXPECT_EQ(res.report.reason, TerminationReason::StepBudget);
  EXPECT_EQ(res.report.steps, 3u);
  EXPECT_EQ(res.series.size(), 4u);
}

TEST(RunFlow, RecordCadence) {
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 10;
  policy.record_every = 4;
  const FlowResult res = run_flow(make_icosphere(2), FlowParams{-1.0, 0.0}, policy);
  // Start, steps 4 and 8, and the final state.
  EXPECT_EQ(res.series.size(), 4u);
}

TEST(RunFlow, DeterministicReplay) {
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 30;
  const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.05, 3);
  const FlowResult a = run_flow(m, FlowParams{-0.5, 0.2}, policy);
  const FlowResult b = run_flow(m, FlowParams{-0.5, 0.2}, policy);
  EXPECT_EQ(a.final_state.mesh.vertices, b.final_state.mesh.vertices);
  EXPECT_EQ(a.final_state.t, b.final_state.t);
}

TEST(RunFlow, TranslationEquivariance) {
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 20;
  const TriangleMesh m = test::radially_perturbed(make_icosphere(3), 0.05, 4);
  const Vec3 shift(0.75, -0.5, 0.25);
  const FlowResult a = run_flow(m, FlowParams{-1.0, 0.0}, policy);
  const FlowResult b = run_flow(translate(m, shift), FlowParams{-1.0, 0.0}, policy);
  ASSERT_EQ(a.report.steps, b.report.steps);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    EXPECT_LE((b.final_state.mesh.vertices[i] - shift - a.final_state.mesh.vertices[i]).norm(), 1e-9);
  }
}

TEST(RunFlow, ParabolicRescalingOfTrajectories) {
  const double r = 2.0;
  const FlowParams p{-1.0, 0.0};
  SteppingPolicy policy = no_convergence();
  policy.horizon = 0.05;
  SteppingPolicy twin = policy;
  twin.dt_init /= std::pow(r, 4);
  twin.horizon /= std::pow(r, 4);
  const TriangleMesh m = make_icosphere(3);
  const FlowResult a = run_flow(m, p, policy);
  const FlowResult b = run_flow(rescale(m, r, Vec3::Zero()), p.rescaled(r), twin);
  ASSERT_EQ(a.series.size(), b.series.size());
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    EXPECT_NEAR(b.series[i].t * std::pow(r, 4), a.series[i].t, 1e-12 * a.series[i].t);
    EXPECT_NEAR(b.series[i].area * r * r, a.series[i].area, 1e-10 * a.series[i].area);
  }
}

TEST(RunFlow, WillmoreControlAlongFlow) {
  const FlowParams p{1.0, 0.5};
  const FlowResult res = run_flow(make_icosphere(3, 0.6), p, SteppingPolicy{});
  const double bound = (2 * p.lambda + p.c0 * p.c0) / (2 * p.lambda) * res.series.front().penalized;
  for (const TimeSeriesRecord& rec : res.series) EXPECT_LE(rec.willmore, bound + 1e-6);
}

TEST(Policy, Validation) {
  SteppingPolicy p;
  EXPECT_NO_THROW(p.validate());
  p.shrink = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SteppingPolicy{};
  p.growth = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SteppingPolicy{};
  p.dt_init = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SteppingPolicy{};
  p.checkpoint_every = 5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

class CheckpointTest : public ::testing::Test {
 protected:
  std::filesystem::path dir = test::temp_dir() / "checkpoints";
  FlowParams params{-1.0, 0.0};
};

TEST_F(CheckpointTest, RoundTripAtStep50) {
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 50;
  const FlowResult first = run_flow(make_icosphere(3), params, policy);
  const FlowState& s = first.final_state;
  ASSERT_EQ(s.step_index, 50u);
  const CheckpointFiles files = checkpoint(s, params, dir, "rt");
  const FlowState back = restore(files, params);
  EXPECT_EQ(back.mesh.faces, s.mesh.faces);
  EXPECT_EQ(back.mesh.vertices, s.mesh.vertices);
  EXPECT_EQ(back.t, s.t);
  EXPECT_EQ(back.dt, s.dt);
  EXPECT_EQ(back.step_index, s.step_index);

  FlowState x = s, y = back;
  for (int k = 0; k < 10; ++k) {
    const StepResult rx = step(x, params, policy);
    const StepResult ry = step(y, params, policy);
    ASSERT_EQ(rx.accepted, ry.accepted);
    EXPECT_NEAR(ry.state.energy, rx.state.energy, 1e-12 * std::abs(rx.state.energy));
    x = rx.state;
    y = ry.state;
  }
}

TEST_F(CheckpointTest, MismatchedParamsRefused) {
  const FlowState s = make_initial_state(make_icosphere(2), params, SteppingPolicy{});
  const CheckpointFiles files = checkpoint(s, params, dir, "mismatch");
  EXPECT_THROW(restore(files, FlowParams{-1.0, 0.1}), FlowError);
}

TEST_F(CheckpointTest, CorruptOrMissingFilesRefused) {
  const FlowState s = make_initial_state(make_icosphere(2), params, SteppingPolicy{});
  const CheckpointFiles files = checkpoint(s, params, dir, "corrupt");
  std::ofstream(files.meta) << "format = helfrich-checkpoint-1\nt = banana\n";
  EXPECT_THROW(restore(files, params), FlowError);
  EXPECT_THROW(restore(CheckpointFiles{dir / "nope.off", dir / "nope.meta"}, params), FlowError);
}

TEST_F(CheckpointTest, CadenceWritesFiles) {
  const auto cdir = test::temp_dir() / "cadence";
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 6;
  policy.checkpoint_every = 3;
  policy.checkpoint_dir = cdir;
  run_flow(make_icosphere(2), params, policy);
  EXPECT_TRUE(std::filesystem::exists(cdir / "checkpoint_0000003.off"));
  EXPECT_TRUE(std::filesystem::exists(cdir / "checkpoint_0000006.meta"));

  const auto none = test::temp_dir() / "no_cadence";
  policy.checkpoint_every = 0;
  policy.checkpoint_dir = none;
  run_flow(make_icosphere(2), params, policy);
  EXPECT_FALSE(std::filesystem::exists(none));
}

TEST_F(CheckpointTest, ResumeContinuesTrajectory) {
  SteppingPolicy policy = no_convergence();
  policy.max_steps = 40;
  const FlowResult full = run_flow(make_icosphere(2), params, policy);
  policy.max_steps = 20;
  const FlowResult half = run_flow(make_icosphere(2), params, policy);
  const FlowState back = restore(checkpoint(half.final_state, params, dir, "resume"), params);
  policy.max_steps = 40;
  const FlowResult rest = resume_flow(back, params, policy);
  EXPECT_EQ(rest.final_state.mesh.vertices, full.final_state.mesh.vertices);
}

TEST(Series, HeaderOrderAndPrecision) {
  std::ostringstream out;
  write_series_header(out);
  EXPECT_EQ(out.str(),
            "t,dt,area,volume,willmore,willmore0,helfrich,penalized,int_H,sup_Asq,grad_norm,clamp_mass,"
            "step_rejections\n");
  std::ostringstream row;
  TimeSeriesRecord r;
  r.t = 1.0 / 3.0;
  write_series_row(row, r);
  EXPECT_EQ(row.str().substr(0, 20), "0.33333333333333331,");
  EXPECT_EQ(std::stod(row.str().substr(0, 19)), 1.0 / 3.0);
}

}  // namespace
}  // namespace helfrich
