#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "helfrich/mesh_io.hpp"

namespace helfrich::app {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_integer(key, v);
  if (n < 0) throw ConfigError("key '" + key + "': must be >= 0");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected on/off, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::string s = v;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(to_double(key, tok));
  return out;
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto xs = to_list(key, v);
  if (xs.size() != 3) throw ConfigError("key '" + key + "': expected three numbers");
  return {xs[0], xs[1], xs[2]};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value,
                                  const std::filesystem::path& base)>;

struct KeyInfo {
  Setter set;
  const char* help;
};

const std::map<std::string, KeyInfo>& key_table() {
  static const std::map<std::string, KeyInfo> table = {
      // mesh
      {"mesh", {[](RunConfig& c, auto&, auto& v, auto& b) { c.mesh.path = resolve(b, v); },
                "input mesh file (.off or .obj); overrides the generator"}},
      {"generator", {[](RunConfig& c, auto& k, auto& v, auto&) {
                       if (v != "icosphere" && v != "ellipsoid" && v != "torus" && v != "tetrahedron") {
                         throw ConfigError("key '" + k + "': unknown generator '" + v + "'");
                       }
                       c.mesh.generator = v;
                     },
                     "icosphere | ellipsoid | torus | tetrahedron (default icosphere)"}},
      {"level", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.level = static_cast<int>(to_integer(k, v)); },
                 "subdivision level for icosphere/ellipsoid (default 4)"}},
      {"radius", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.radius = to_double(k, v); },
                  "icosphere radius; also r0 for the ode subcommand (default 1)"}},
      {"center", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.center = to_vec3(k, v); },
                  "generator center, three numbers (default 0 0 0)"}},
      {"semi_axes", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.semi_axes = to_vec3(k, v); },
                     "ellipsoid semi-axes (default 1 1 1)"}},
      {"torus_major", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.torus_major = to_double(k, v); },
                       "torus tube-center radius (default 1)"}},
      {"torus_minor", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.torus_minor = to_double(k, v); },
                       "torus tube radius (default 0.4)"}},
      {"torus_nu", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.torus_nu = static_cast<int>(to_integer(k, v)); },
                    "torus segments around the axis (default 48)"}},
      {"torus_nv", {[](RunConfig& c, auto& k, auto& v, auto&) { c.mesh.torus_nv = static_cast<int>(to_integer(k, v)); },
                    "torus segments around the tube (default 24)"}},
      // flow parameters
      {"c0", {[](RunConfig& c, auto& k, auto& v, auto&) { c.params.c0 = to_double(k, v); },
              "spontaneous curvature, 1/length (default 0)"}},
      {"lambda", {[](RunConfig& c, auto& k, auto& v, auto&) { c.params.lambda = to_double(k, v); },
                  "area penalty, 1/length^2 (default 0)"}},
      {"allow_negative_lambda",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.params.allow_negative_lambda = to_bool(k, v); },
        "accept lambda < 0 (default off)"}},
      // stepping
      {"mode", {[](RunConfig& c, auto& k, auto& v, auto&) {
                  if (v == "explicit") {
                    c.policy.mode = SteppingMode::Explicit;
                  } else if (v == "semi_implicit") {
                    c.policy.mode = SteppingMode::SemiImplicit;
                  } else {
                    throw ConfigError("key '" + k + "': expected explicit or semi_implicit");
                  }
                },
                "explicit | semi_implicit (default semi_implicit)"}},
      {"gradient_mode", {[](RunConfig& c, auto& k, auto& v, auto&) {
                           if (v == "strong") {
                             c.policy.gradient_mode = GradientMode::StrongForm;
                           } else if (v == "exact") {
                             c.policy.gradient_mode = GradientMode::ExactDiscrete;
                           } else {
                             throw ConfigError("key '" + k + "': expected strong or exact");
                           }
                         },
                         "strong | exact (default strong)"}},
      {"dt_init", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.dt_init = to_double(k, v); },
                   "first trial step, length^4 (default 1e-4)"}},
      {"dt_max", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.dt_max = to_double(k, v); },
                  "largest step (default inf)"}},
      {"cfl", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.cfl_coefficient = to_double(k, v); },
               "explicit mode: dt <= cfl * h_min^4 (default 0.02)"}},
      {"max_displacement",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.max_displacement = to_double(k, v); },
        "per-step vertex motion limit in units of h_min (default 0.25)"}},
      {"growth", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.growth = to_double(k, v); },
                  "dt growth after an accepted step (default 1.25)"}},
      {"shrink", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.shrink = to_double(k, v); },
                  "dt shrink after a rejected step (default 0.5)"}},
      {"energy_tolerance",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.energy_tolerance = to_double(k, v); },
        "allowed energy increase per step relative to |E0| (default 1e-10)"}},
      {"dt_collapse", {[](RunConfig& c, auto& k, auto& v, auto&) {
                         c.policy.dt_collapse_coefficient = to_double(k, v);
                       },
                       "dt floor coefficient times h_min^4 (default 1e-6)"}},
      {"max_rejections", {[](RunConfig& c, auto& k, auto& v, auto&) {
                            c.policy.max_consecutive_rejections = to_count(k, v);
                          },
                          "consecutive rejections before dt collapse (default 60)"}},
      {"max_steps", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.max_steps = to_count(k, v); },
                     "accepted-step budget (default 1000000)"}},
      {"horizon", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.horizon = to_double(k, v); },
                   "final time (default inf)"}},
      {"gradient_tolerance",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.gradient_tolerance = to_double(k, v); },
        "convergence threshold on sqrt(sum xi^2 a); 0 disables (default 1e-6)"}},
      {"convergence_window",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.convergence_window = to_count(k, v); },
        "consecutive samples below the threshold (default 50)"}},
      {"area_floor", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.area_floor = to_double(k, v); },
                      "area collapse at this fraction of the initial area (default 1e-4)"}},
      {"blowup_threshold",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.blowup_threshold = to_double(k, v); },
        "sup |A|^2 * area above which a dt collapse counts as blow-up (default 1e4)"}},
      {"record_every", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.record_every = to_count(k, v); },
                        "series row cadence in accepted steps (default 1)"}},
      {"checkpoint_every",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.checkpoint_every = to_count(k, v); },
        "checkpoint cadence in accepted steps; 0 disables (default 0)"}},
      {"checkpoint_dir", {[](RunConfig& c, auto&, auto& v, auto& b) { c.policy.checkpoint_dir = resolve(b, v); },
                          "checkpoint directory (default <out>/checkpoints)"}},
      {"resume", {[](RunConfig& c, auto&, auto& v, auto& b) { c.resume = resolve(b, v); },
                  "checkpoint stem (path without .off/.meta) to continue from"}},
      {"remesh", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.remesh.enabled = to_bool(k, v); },
                  "remesh during the flow (default off)"}},
      {"remesh_min_angle",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.remesh.min_angle_floor = to_double(k, v); },
        "remesh trigger: smallest angle in radians (default 0.2)"}},
      {"remesh_drift", {[](RunConfig& c, auto& k, auto& v, auto&) { c.policy.remesh.drift_factor = to_double(k, v); },
                        "remesh trigger: mean edge drift factor (default 2)"}},
      // diagnostics
      {"kappa_target_fraction", {[](RunConfig& c, auto& k, auto& v, auto&) {
                                   c.diagnostics.kappa_target_fraction = to_double(k, v);
                                 },
                                 "blow-up target as a fraction of the initial sum |A|^2 a (default 0.25)"}},
      {"frame_area_ratio",
       {[](RunConfig& c, auto& k, auto& v, auto&) { c.diagnostics.frame_area_ratio = to_double(k, v); },
        "emit a frame when the area drops by this factor (default 0.5)"}},
      {"kappa_radii", {[](RunConfig& c, auto& k, auto& v, auto&) { c.diagnostics.kappa_radii = to_list(k, v); },
                       "radius grid for kappa.csv (default geometric grid)"}},
      {"frames", {[](RunConfig& c, auto& k, auto& v, auto&) { c.diagnostics.frames = to_bool(k, v); },
                  "write blow-up frames for singular runs (default on)"}},
      // misc
      {"out", {[](RunConfig& c, auto&, auto& v, auto& b) { c.out_dir = resolve(b, v); },
               "output directory (default helfrich_out)"}},
      {"seed", {[](RunConfig& c, auto& k, auto& v, auto&) { c.seed = static_cast<std::uint64_t>(to_integer(k, v)); },
                "seed for randomized validation cases (default 1)"}},
      {"ode_horizon", {[](RunConfig& c, auto& k, auto& v, auto&) { c.ode_horizon = to_double(k, v); },
                       "ode subcommand horizon when horizon is inf (default 100)"}},
      {"scale", {[](RunConfig& c, auto& k, auto& v, auto&) { c.scale = to_double(k, v); },
                 "rescale subcommand: length scale r (default 1)"}},
      {"scale_center", {[](RunConfig& c, auto& k, auto& v, auto&) { c.scale_center = to_vec3(k, v); },
                        "rescale subcommand: center x (default 0 0 0)"}},
      {"suite", {[](RunConfig& c, auto&, auto& v, auto&) {
                   std::string s = v;
                   for (char& ch : s) {
                     if (ch == ',') ch = ' ';
                   }
                   std::istringstream in(s);
                   std::string name;
                   c.suites.clear();
                   while (in >> name) c.suites.push_back(name);
                 },
                 "validate subcommand: comma-separated suites (default all)"}},
      {"fast", {[](RunConfig& c, auto& k, auto& v, auto&) { c.fast = to_bool(k, v); },
                "validate subcommand: coarser meshes and tolerances (default off)"}},
  };
  return table;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value, const std::filesystem::path& base) {
  const auto& table = key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.set(cfg, key, value, base);
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || trim(text.substr(0, eq)).empty()) {
    throw ConfigError("override '" + text + "' is not KEY=VALUE");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

RunConfig build_config(const KeyValues& file_entries, const std::filesystem::path& base_dir,
                       const KeyValues& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : file_entries) apply(cfg, k, v, base_dir);
  for (const auto& [k, v] : overrides) apply(cfg, k, v, {});
  if (cfg.policy.checkpoint_every > 0 && cfg.policy.checkpoint_dir.empty()) {
    cfg.policy.checkpoint_dir = cfg.out_dir / "checkpoints";
  }

  try {
    cfg.params.validate();
    cfg.policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.mesh.path && !std::filesystem::exists(*cfg.mesh.path)) {
    throw ConfigError("mesh file not found: " + cfg.mesh.path->string());
  }
  if (cfg.resume) {
    for (const char* ext : {".off", ".meta"}) {
      std::filesystem::path p = *cfg.resume;
      p += ext;
      if (!std::filesystem::exists(p)) throw ConfigError("checkpoint file not found: " + p.string());
    }
  }
  if (!(cfg.mesh.radius > 0.0)) throw ConfigError("radius must be positive");
  if (!(cfg.diagnostics.kappa_target_fraction > 0.0 && cfg.diagnostics.kappa_target_fraction < 1.0)) {
    throw ConfigError("kappa_target_fraction must lie in (0, 1)");
  }
  if (!(cfg.diagnostics.frame_area_ratio > 0.0 && cfg.diagnostics.frame_area_ratio < 1.0)) {
    throw ConfigError("frame_area_ratio must lie in (0, 1)");
  }
  for (std::size_t i = 1; i < cfg.diagnostics.kappa_radii.size(); ++i) {
    if (!(cfg.diagnostics.kappa_radii[i] > cfg.diagnostics.kappa_radii[i - 1])) {
      throw ConfigError("kappa_radii must be increasing");
    }
  }
  if (!cfg.diagnostics.kappa_radii.empty() && !(cfg.diagnostics.kappa_radii.front() > 0.0)) {
    throw ConfigError("kappa_radii must be positive");
  }
  return cfg;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& config_path,
                          const std::vector<std::string>& overrides) {
  KeyValues file_entries;
  std::filesystem::path base;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw ConfigError("cannot open config file " + config_path->string());
    file_entries = parse_key_values(in, config_path->string());
    base = config_path->parent_path();
  }
  KeyValues ov;
  for (const std::string& o : overrides) ov.push_back(parse_override(o));
  return build_config(file_entries, base, ov);
}

TriangleMesh make_mesh(const MeshSource& source) {
  if (source.path) return load_mesh(*source.path);
  try {
    if (source.generator == "icosphere") return make_icosphere(source.level, source.radius, source.center);
    if (source.generator == "ellipsoid") {
      return translate(make_ellipsoid(source.level, source.semi_axes), source.center);
    }
    if (source.generator == "torus") {
      return translate(make_torus(source.torus_major, source.torus_minor, source.torus_nu, source.torus_nv),
                       source.center);
    }
    if (source.generator == "tetrahedron") return translate(make_tetrahedron(), source.center);
  } catch (const MeshError& e) {
    throw ConfigError(std::string("mesh generator: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mesh generator: ") + e.what());
  }
  throw ConfigError("unknown generator '" + source.generator + "'");
}

std::string config_reference() {
  std::ostringstream os;
  os << "Configuration keys (file lines 'key = value', '#' comments; --override KEY=VALUE):\n";
  for (const auto& [key, info] : key_table()) os << "  " << key << "\n      " << info.help << '\n';
  return os.str();
}

}  // namespace helfrich::app
