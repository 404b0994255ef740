#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"
#include "helfrich/series.hpp"

namespace helfrich {

class FlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SteppingMode { Explicit, SemiImplicit };

/// StrongForm uses flow_velocity; ExactDiscrete uses the exact gradient of
/// the discrete energy (validation mode, slower).
enum class GradientMode { StrongForm, ExactDiscrete };

struct RemeshPolicy {
  bool enabled = false;
  /// Remesh when the smallest angle drops below this (radians).
  double min_angle_floor = 0.2;
  /// Remesh when the mean edge length drifts from the target by more than this factor.
  double drift_factor = 2.0;
  /// Below this fraction of the initial area the target edge follows sqrt(area).
  double scale_adaptive_area_fraction = 1e-3;
};

/// Step-size control and termination settings for the flow.
///
/// Time carries units of length^4. All length-based limits are relative to
/// the current minimum edge length h_min, so the policy behaves identically
/// under parabolic rescaling when dt_init is rescaled by r^-4.
struct SteppingPolicy {
  SteppingMode mode = SteppingMode::SemiImplicit;
  GradientMode gradient_mode = GradientMode::StrongForm;
  double dt_init = 1e-4;
  double dt_max = std::numeric_limits<double>::infinity();
  /// Explicit mode: dt <= cfl_coefficient * h_min^4.
  double cfl_coefficient = 0.02;
  /// Both modes: max_i |xi_i| * dt <= max_displacement * h_min.
  double max_displacement = 0.25;
  double growth = 1.25;
  double shrink = 0.5;
  /// Reject a step when the penalized energy grows by more than
  /// energy_tolerance * |E(0)|.
  double energy_tolerance = 1e-10;
  /// dt below dt_collapse_coefficient * h_min^4 terminates the run.
  double dt_collapse_coefficient = 1e-6;
  std::size_t max_consecutive_rejections = 60;
  std::size_t max_steps = 1'000'000;
  double horizon = std::numeric_limits<double>::infinity();
  /// Converged once sqrt(sum xi^2 a) stays below this for `convergence_window`
  /// consecutive accepted steps. Zero disables the check.
  double gradient_tolerance = 1e-6;
  std::size_t convergence_window = 50;
  /// Area collapse is declared once A(f) < area_floor * A(f_0).
  double area_floor = 1e-4;
  /// Curvature blow-up: sup |A|^2 * A(f) above this while dt collapses.
  double blowup_threshold = 1e4;
  /// Emit a time-series record every this many accepted steps (>= 1).
  std::size_t record_every = 1;
  RemeshPolicy remesh;
  /// Write a checkpoint every this many accepted steps; 0 disables.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct FlowState {
  double t = 0.0;
  TriangleMesh mesh;
  GeometryCache cache;
  double dt = 0.0;
  std::size_t step_index = 0;
  std::size_t rejections = 0;
  /// H_{c0,lambda} of the current mesh.
  double energy = 0.0;
  /// H_{c0,lambda} and area at t = 0; anchor the energy tolerance and the area floor.
  double initial_energy = 0.0;
  double initial_area = 0.0;
  double initial_mean_edge = 0.0;
  /// Consecutive accepted steps with the gradient norm below tolerance.
  std::size_t converged_steps = 0;
};

FlowState make_initial_state(const TriangleMesh& mesh, const FlowParams& params,
                             const SteppingPolicy& policy);

struct StepResult {
  FlowState state;
  bool accepted = false;
  /// Energy change of the tentative step (accepted or not).
  double energy_change = 0.0;
  /// Set when the rejection was caused by a flipped or collapsed face.
  bool geometry_rejection = false;
};

/// One attempted step. On rejection the returned state equals the input
/// except for a reduced dt and an incremented rejection count.
StepResult step(const FlowState& state, const FlowParams& params, const SteppingPolicy& policy);

/// Proposed dt for the next attempt: state.dt clipped by the displacement,
/// CFL and horizon limits.
double limited_dt(const FlowState& state, const VertexField& xi, const SteppingPolicy& policy);

enum class TerminationReason {
  Converged,
  SingularAreaCollapse,
  SingularCurvatureBlowup,
  DtCollapse,
  HorizonReached,
  StepBudget,
};

std::string to_string(TerminationReason reason);
bool is_singular(TerminationReason reason);

struct TerminationReport {
  TerminationReason reason = TerminationReason::StepBudget;
  double final_time = 0.0;
  std::size_t steps = 0;
  std::size_t rejections = 0;
  double final_area = 0.0;
  double final_willmore = 0.0;
  double final_helfrich = 0.0;
  double final_penalized = 0.0;
  double gradient_norm = 0.0;
  /// A(f_end) / A(f_0).
  double area_ratio = 0.0;
  /// sup |A|^2 * A(f) at the end and at the start.
  double curvature_scale_final = 0.0;
  double curvature_scale_initial = 0.0;
  std::size_t remesh_count = 0;
};

/// Receives immutable snapshots from run_flow.
class FlowObserver {
 public:
  virtual ~FlowObserver() = default;
  virtual void on_start(const FlowState& /*state*/, const TimeSeriesRecord& /*record*/) {}
  virtual void on_record(const FlowState& /*state*/, const TimeSeriesRecord& /*record*/) {}
  virtual void on_finish(const FlowState& /*state*/, const TerminationReport& /*report*/) {}
};

struct FlowResult {
  std::vector<TimeSeriesRecord> series;
  FlowState final_state;
  TerminationReport report;
};

FlowResult run_flow(const TriangleMesh& initial, const FlowParams& params, const SteppingPolicy& policy,
                    const std::vector<FlowObserver*>& observers = {});

/// Continue from an existing state (e.g. one restored from a checkpoint).
FlowResult resume_flow(FlowState state, const FlowParams& params, const SteppingPolicy& policy,
                       const std::vector<FlowObserver*>& observers = {});

TimeSeriesRecord make_record(const FlowState& state, const FlowParams& params);

// Checkpoints ---------------------------------------------------------------

struct CheckpointFiles {
  std::filesystem::path mesh;
  std::filesystem::path meta;
};

/// Stable 64-bit FNV-1a hash of (c0, lambda) printed with 17 digits.
std::uint64_t params_hash(const FlowParams& params);

/// Writes <dir>/<stem>.off and <dir>/<stem>.meta.
CheckpointFiles checkpoint(const FlowState& state, const FlowParams& params,
                           const std::filesystem::path& dir, const std::string& stem);

/// Restores a state written by checkpoint(). Throws FlowError when files are
/// missing or corrupt, or when `params` does not match the stored hash.
FlowState restore(const CheckpointFiles& files, const FlowParams& params);

}  // namespace helfrich
