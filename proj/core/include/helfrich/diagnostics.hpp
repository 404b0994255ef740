#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "helfrich/flow.hpp"
#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"

namespace helfrich {

class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KappaValue {
  double value = 0.0;
  Vec3 center = Vec3::Zero();
  int center_vertex = -1;
};

struct KappaOptions {
  /// Scan every `center_stride`-th vertex as a ball center (1 = all).
  std::size_t center_stride = 1;
};

/// kappa(r) = max over vertex centers x of sum_{|v_i - x| < r} |A|^2_i a_i.
/// Ties go to the lowest vertex index. Throws std::invalid_argument for r <= 0.
KappaValue kappa(const TriangleMesh& mesh, const GeometryCache& cache, double r, const KappaOptions& options = {});

struct KappaProfile {
  double t = 0.0;
  std::vector<double> radii;
  std::vector<double> kappa;
  std::vector<Vec3> centers;
  /// True when centers were subsampled.
  bool subsampled = false;
};

/// kappa over an increasing radius grid. Throws DiagnosticsError if the
/// values are not non-decreasing in r.
KappaProfile kappa_profile(const TriangleMesh& mesh, const GeometryCache& cache, const std::vector<double>& radii,
                           double t = 0.0, const KappaOptions& options = {});

/// `count` radii spaced geometrically from the smallest edge length to the
/// bounding-box diagonal.
std::vector<double> default_radius_grid(const GeometryCache& cache, const TriangleMesh& mesh, std::size_t count = 32);

/// Smallest radius with kappa >= target, linearly interpolated between grid
/// points. Throws DiagnosticsError unless 0 < target < kappa at the largest
/// radius.
double select_blowup_radius(const KappaProfile& profile, double kappa_target);

struct BlowUpFrame {
  double t = 0.0;
  double r = 0.0;
  Vec3 center = Vec3::Zero();
  TriangleMesh rescaled_mesh;
  FlowParams rescaled_params;
  /// Quantities of f(t_j) itself.
  double area = 0.0;
  double willmore = 0.0;
  double penalized = 0.0;
  double kappa_target = 0.0;
};

/// Blow-up frame at the state's time: r_j from the kappa profile, x_j the
/// kappa argmax at r_j, mesh (f - x_j) / r_j with parameters (r_j c0, r_j^2
/// lambda). Verifies the energy identity to 1e-12 relative.
BlowUpFrame extract_blowup_frame(const FlowState& state, const FlowParams& params, double kappa_target,
                                 const KappaOptions& options = {});

struct SphereFit {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  /// RMS of |v - center| - radius, divided by radius.
  double residual = 0.0;
};

/// Algebraic least-squares sphere followed by one Gauss-Newton refinement.
SphereFit fit_sphere(const std::vector<Vec3>& points);

enum class SingularityVerdict { RoundShrinker, NonRoundConcentration, None };

std::string to_string(SingularityVerdict verdict);

struct ClassificationOptions {
  double fit_threshold = 0.02;
  /// Willmore energy of the last frames within this fraction of 4 pi.
  double willmore_tolerance = 0.05;
  std::size_t willmore_frames = 3;
  /// Allowed growth of |W - 4 pi| between consecutive frames, as a fraction of 4 pi.
  double trend_slack = 1e-3;
  /// Frames concentrate when the area shrinks below this fraction of the first frame's.
  double concentration_area_ratio = 0.5;
};

struct SingularityClassification {
  SingularityVerdict verdict = SingularityVerdict::None;
  double fit_residual = 0.0;
  std::vector<double> willmore;
  std::vector<double> penalized;
  bool willmore_near_sphere = false;
  bool willmore_trending = false;
  bool concentrating = false;
};

/// Needs at least three frames; throws DiagnosticsError otherwise.
SingularityClassification classify_singularity(const std::vector<BlowUpFrame>& frames,
                                               const ClassificationOptions& options = {});

struct HypothesisRecord {
  double t = 0.0;
  double mean_curvature_integral = 0.0;
  bool mean_curvature_positive = false;
  double willmore0 = 0.0;
  double initial_energy = 0.0;
  std::optional<double> energy_threshold;
  std::optional<bool> below_threshold;
  std::optional<double> t_bound;
  /// t_bound - t when c0 < 0.
  std::optional<double> remaining_time_budget;
};

HypothesisRecord hypothesis_monitors(const FlowState& state, const FlowParams& params);

/// Observer that extracts a blow-up frame at the start and whenever the
/// area falls below half of the area at the previous frame.
class BlowUpRecorder : public FlowObserver {
 public:
  /// kappa_target_fraction of the initial sum |A|^2 a becomes the target.
  explicit BlowUpRecorder(FlowParams params, double kappa_target_fraction = 0.25, double area_ratio = 0.5);

  void on_start(const FlowState& state, const TimeSeriesRecord& record) override;
  void on_record(const FlowState& state, const TimeSeriesRecord& record) override;

  const std::vector<BlowUpFrame>& frames() const { return frames_; }
  const std::vector<HypothesisRecord>& monitors() const { return monitors_; }
  double kappa_target() const { return kappa_target_; }

 private:
  void emit(const FlowState& state);

  FlowParams params_;
  double fraction_;
  double area_ratio_;
  double kappa_target_ = 0.0;
  double next_area_ = 0.0;
  std::vector<BlowUpFrame> frames_;
  std::vector<HypothesisRecord> monitors_;
};

/// Writes <dir>/<NNNN>.off and <dir>/<NNNN>.meta.
void write_frame(const std::filesystem::path& dir, std::size_t index, const BlowUpFrame& frame);
/// CSV with columns t,r,kappa,cx,cy,cz; `header` controls the first row.
void write_kappa_profile(std::ostream& out, const KappaProfile& profile, bool header = true);

}  // namespace helfrich
