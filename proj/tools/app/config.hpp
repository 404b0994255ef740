#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "helfrich/flow.hpp"
#include "helfrich/geometry.hpp"
#include "helfrich/mesh.hpp"

namespace helfrich::app {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Either a mesh file or a built-in generator.
struct MeshSource {
  std::optional<std::filesystem::path> path;
  std::string generator = "icosphere";
  int level = 4;
  double radius = 1.0;
  Vec3 center = Vec3::Zero();
  Vec3 semi_axes = Vec3::Ones();
  double torus_major = 1.0;
  double torus_minor = 0.4;
  int torus_nu = 48;
  int torus_nv = 24;
};

struct DiagnosticsConfig {
  double kappa_target_fraction = 0.25;
  double frame_area_ratio = 0.5;
  /// Radii for kappa.csv; empty selects the default geometric grid.
  std::vector<double> kappa_radii;
  bool frames = true;
};

struct RunConfig {
  MeshSource mesh;
  FlowParams params;
  SteppingPolicy policy;
  DiagnosticsConfig diagnostics;
  std::filesystem::path out_dir = "helfrich_out";
  std::uint64_t seed = 1;
  /// ODE horizon when the flow horizon is infinite.
  double ode_horizon = 100.0;
  /// Checkpoint stem (without extension) to resume from.
  std::optional<std::filesystem::path> resume;
  /// rescale subcommand: f -> (f - scale_center) / scale.
  double scale = 1.0;
  Vec3 scale_center = Vec3::Zero();
  /// validate subcommand.
  std::vector<std::string> suites;
  bool fast = false;
  bool quiet = false;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; '#' starts a comment. Throws ConfigError on
/// malformed lines, naming `source` and the line number.
KeyValues parse_key_values(std::istream& in, const std::string& source);

/// "KEY=VALUE" -> pair. Throws ConfigError when '=' is missing.
std::pair<std::string, std::string> parse_override(const std::string& text);

/// Applies file entries (relative paths resolved against `base_dir`) then
/// overrides (resolved against the working directory). Unknown keys,
/// malformed values and missing mesh files throw ConfigError.
RunConfig build_config(const KeyValues& file_entries, const std::filesystem::path& base_dir,
                       const KeyValues& overrides);

RunConfig load_run_config(const std::optional<std::filesystem::path>& config_path,
                          const std::vector<std::string>& overrides);

TriangleMesh make_mesh(const MeshSource& source);

/// Documented key list, printed by `--help-config`.
std::string config_reference();

}  // namespace helfrich::app
