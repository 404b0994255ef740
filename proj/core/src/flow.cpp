#include "helfrich/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <Eigen/SparseCholesky>
#ifdef HELFRICH_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "helfrich/mesh_io.hpp"
#include "helfrich/remesh.hpp"
#include "helfrich/variation.hpp"

namespace helfrich {

void SteppingPolicy::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("stepping policy: ") + name + " must be positive");
  };
  positive(dt_init, "dt_init");
  positive(dt_max, "dt_max");
  positive(cfl_coefficient, "cfl_coefficient");
  positive(max_displacement, "max_displacement");
  positive(horizon, "horizon");
  positive(area_floor, "area_floor");
  positive(blowup_threshold, "blowup_threshold");
  if (!(energy_tolerance >= 0.0)) throw std::invalid_argument("stepping policy: energy_tolerance must be >= 0");
  if (!(dt_collapse_coefficient >= 0.0)) {
    throw std::invalid_argument("stepping policy: dt_collapse_coefficient must be >= 0");
  }
  if (!(gradient_tolerance >= 0.0)) throw std::invalid_argument("stepping policy: gradient_tolerance must be >= 0");
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("stepping policy: shrink must lie in (0, 1)");
  if (!(growth > 1.0)) throw std::invalid_argument("stepping policy: growth must exceed 1");
  if (record_every == 0) throw std::invalid_argument("stepping policy: record_every must be >= 1");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) {
    throw std::invalid_argument("stepping policy: checkpoint_dir required when checkpointing");
  }
}

std::string to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::Converged: return "converged";
    case TerminationReason::SingularAreaCollapse: return "singular_area_collapse";
    case TerminationReason::SingularCurvatureBlowup: return "singular_curvature_blowup";
    case TerminationReason::DtCollapse: return "dt_collapse";
    case TerminationReason::HorizonReached: return "horizon_reached";
    case TerminationReason::StepBudget: return "step_budget";
  }
  return "unknown";
}

bool is_singular(TerminationReason reason) {
  return reason == TerminationReason::SingularAreaCollapse || reason == TerminationReason::SingularCurvatureBlowup;
}

FlowState make_initial_state(const TriangleMesh& mesh, const FlowParams& params, const SteppingPolicy& policy) {
  params.validate();
  policy.validate();
  FlowState s;
  s.mesh = mesh;
  s.cache = build_cache(mesh);
  s.dt = std::min(policy.dt_init, policy.dt_max);
  s.energy = penalized_energy(s.cache, params);
  s.initial_energy = s.energy;
  s.initial_area = s.cache.total_area;
  s.initial_mean_edge = s.cache.mean_edge_length;
  return s;
}

double limited_dt(const FlowState& state, const VertexField& xi, const SteppingPolicy& policy) {
  double dt = std::min(state.dt, policy.dt_max);
  const double h = state.cache.min_edge_length;
  double vmax = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) vmax = std::max(vmax, std::abs(xi[i]));
  if (vmax > 0.0) dt = std::min(dt, policy.max_displacement * h / vmax);
  if (policy.mode == SteppingMode::Explicit) dt = std::min(dt, policy.cfl_coefficient * h * h * h * h);
  if (std::isfinite(policy.horizon)) {
    const double remaining = policy.horizon - state.t;
    if (remaining > 0.0) dt = std::min(dt, remaining);
  }
  return dt;
}

namespace {

/// Solve (M + dt L M^-1 L) D = dt M V for the displacement D.
std::vector<Vec3> semi_implicit_displacement(const GeometryCache& cache, const std::vector<Vec3>& velocity,
                                             double dt) {
  const Eigen::Index n = static_cast<Eigen::Index>(cache.num_vertices());
  Eigen::VectorXd inv_mass(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_mass[i] = 1.0 / cache.area_weight[static_cast<std::size_t>(i)];
  const SparseMatrix& L = cache.stiffness;
  SparseMatrix system = SparseMatrix(L * inv_mass.asDiagonal()) * L;
  system *= dt;
  for (Eigen::Index i = 0; i < n; ++i) system.coeffRef(i, i) += cache.area_weight[static_cast<std::size_t>(i)];

#ifdef HELFRICH_HAVE_CHOLMOD
  Eigen::CholmodSupernodalLLT<SparseMatrix> solver;
#else
  Eigen::SimplicialLDLT<SparseMatrix> solver;
#endif
  solver.compute(system);
  if (solver.info() != Eigen::Success) throw FlowError("semi-implicit system factorization failed");

  Eigen::MatrixXd rhs(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs.row(i) = (dt * cache.area_weight[static_cast<std::size_t>(i)]) * velocity[static_cast<std::size_t>(i)].transpose();
  }
  const Eigen::MatrixXd sol = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !sol.allFinite()) throw FlowError("semi-implicit solve failed");
  std::vector<Vec3> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = sol.row(i).transpose();
  return out;
}

bool faces_consistent(const TriangleMesh& before, const TriangleMesh& after) {
  for (std::size_t f = 0; f < before.faces.size(); ++f) {
    const Vec3 n0 = face_normal_vector(before, static_cast<int>(f));
    const Vec3 n1 = face_normal_vector(after, static_cast<int>(f));
    if (!(n0.dot(n1) > 0.0)) return false;
  }
  return true;
}

}  // namespace

StepResult step(const FlowState& state, const FlowParams& params, const SteppingPolicy& policy) {
  const VertexField xi = policy.gradient_mode == GradientMode::ExactDiscrete
                             ? exact_gradient_velocity(state.cache, state.mesh, params)
                             : flow_velocity(state.cache, params);
  const double dt = limited_dt(state, xi, policy);
  const std::size_t nv = state.mesh.num_vertices();

  std::vector<Vec3> velocity(nv);
  for (std::size_t i = 0; i < nv; ++i) velocity[i] = xi[i] * state.cache.normal[i];

  std::vector<Vec3> displacement;
  if (policy.mode == SteppingMode::Explicit) {
    displacement.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) displacement[i] = dt * velocity[i];
  } else {
    displacement = semi_implicit_displacement(state.cache, velocity, dt);
  }

  TriangleMesh trial = state.mesh;
  for (std::size_t i = 0; i < nv; ++i) trial.vertices[i] += displacement[i];

  StepResult result;
  auto reject = [&](bool geometric) {
    result.state = state;
    result.state.dt = dt * policy.shrink;
    result.state.rejections = state.rejections + 1;
    result.accepted = false;
    result.geometry_rejection = geometric;
    return result;
  };

  if (!faces_consistent(state.mesh, trial)) return reject(true);
  GeometryCache cache;
  try {
    cache = build_cache(trial, state.cache.topology);
  } catch (const GeometryError&) {
    return reject(true);
  }
  const double energy = penalized_energy(cache, params);
  result.energy_change = energy - state.energy;
  if (!std::isfinite(energy) || result.energy_change > policy.energy_tolerance * std::abs(state.initial_energy)) {
    return reject(false);
  }

  result.accepted = true;
  result.state = state;
  result.state.mesh = std::move(trial);
  result.state.cache = std::move(cache);
  result.state.t = state.t + dt;
  result.state.dt = std::min(dt * policy.growth, policy.dt_max);
  result.state.step_index = state.step_index + 1;
  result.state.energy = energy;
  return result;
}

TimeSeriesRecord make_record(const FlowState& state, const FlowParams& params) {
  const GeometryCache& c = state.cache;
  TimeSeriesRecord r;
  r.t = state.t;
  r.dt = state.dt;
  r.area = c.total_area;
  r.volume = c.signed_volume;
  r.willmore = c.willmore;
  r.willmore0 = c.willmore0;
  r.helfrich = helfrich_energy(c, params);
  r.penalized = r.helfrich + 0.5 * params.lambda * c.total_area;
  r.mean_curvature_integral = c.mean_curvature_integral;
  r.sup_asq = c.sup_asq;
  r.gradient_norm = velocity_l2_norm(c, flow_velocity(c, params));
  r.clamp_mass = c.clamp_mass;
  r.step_rejections = state.rejections;
  return r;
}

namespace {

bool needs_remesh(const FlowState& state, const SteppingPolicy& policy, double target) {
  const MeshQualityReport q = quality_report(state.mesh);
  if (q.min_angle < policy.remesh.min_angle_floor) return true;
  const double ratio = state.cache.mean_edge_length / target;
  return ratio > policy.remesh.drift_factor || ratio < 1.0 / policy.remesh.drift_factor;
}

double remesh_target(const FlowState& state, const SteppingPolicy& policy) {
  const double fraction = state.cache.total_area / state.initial_area;
  if (fraction < policy.remesh.scale_adaptive_area_fraction) {
    return state.initial_mean_edge * std::sqrt(fraction);
  }
  return state.initial_mean_edge;
}

TerminationReport make_report(const FlowState& state, const FlowParams& params, TerminationReason reason,
                              double initial_curvature_scale, std::size_t remesh_count) {
  TerminationReport r;
  r.reason = reason;
  r.final_time = state.t;
  r.steps = state.step_index;
  r.rejections = state.rejections;
  r.final_area = state.cache.total_area;
  r.final_willmore = state.cache.willmore;
  r.final_helfrich = helfrich_energy(state.cache, params);
  r.final_penalized = penalized_energy(state.cache, params);
  r.gradient_norm = velocity_l2_norm(state.cache, flow_velocity(state.cache, params));
  r.area_ratio = state.cache.total_area / state.initial_area;
  r.curvature_scale_final = state.cache.sup_asq * state.cache.total_area;
  r.curvature_scale_initial = initial_curvature_scale;
  r.remesh_count = remesh_count;
  return r;
}

}  // namespace

FlowResult run_flow(const TriangleMesh& initial, const FlowParams& params, const SteppingPolicy& policy,
                    const std::vector<FlowObserver*>& observers) {
  return resume_flow(make_initial_state(initial, params, policy), params, policy, observers);
}

FlowResult resume_flow(FlowState state, const FlowParams& params, const SteppingPolicy& policy,
                       const std::vector<FlowObserver*>& observers) {
  params.validate();
  policy.validate();
  FlowResult result;
  const double initial_curvature_scale = state.cache.sup_asq * state.cache.total_area;
  std::size_t remesh_count = 0;
  std::size_t consecutive_rejections = 0;

  auto emit = [&](const TimeSeriesRecord& rec, bool start) {
    result.series.push_back(rec);
    for (FlowObserver* o : observers) {
      if (start) {
        o->on_start(state, rec);
      } else {
        o->on_record(state, rec);
      }
    }
  };

  TimeSeriesRecord record = make_record(state, params);
  emit(record, true);
  auto update_convergence = [&](double gradient_norm) {
    if (policy.gradient_tolerance > 0.0 && gradient_norm < policy.gradient_tolerance) {
      ++state.converged_steps;
    } else {
      state.converged_steps = 0;
    }
  };
  if (state.step_index == 0) update_convergence(record.gradient_norm);

  TerminationReason reason = TerminationReason::StepBudget;
  for (;;) {
    if (state.cache.total_area < policy.area_floor * state.initial_area) {
      reason = TerminationReason::SingularAreaCollapse;
      break;
    }
    if (policy.gradient_tolerance > 0.0 && state.converged_steps >= policy.convergence_window) {
      reason = TerminationReason::Converged;
      break;
    }
    if (state.t >= policy.horizon) {
      reason = TerminationReason::HorizonReached;
      break;
    }
    if (state.step_index >= policy.max_steps) {
      reason = TerminationReason::StepBudget;
      break;
    }

    StepResult sr = step(state, params, policy);
    if (!sr.accepted) {
      state = std::move(sr.state);
      ++consecutive_rejections;
      const double h = state.cache.min_edge_length;
      const double floor = policy.dt_collapse_coefficient * h * h * h * h;
      if (state.dt < floor || consecutive_rejections > policy.max_consecutive_rejections) {
        const double scale = state.cache.sup_asq * state.cache.total_area;
        reason = scale > policy.blowup_threshold ? TerminationReason::SingularCurvatureBlowup
                                                 : TerminationReason::DtCollapse;
        break;
      }
      continue;
    }
    consecutive_rejections = 0;
    state = std::move(sr.state);

    if (policy.remesh.enabled) {
      const double target = remesh_target(state, policy);
      if (needs_remesh(state, policy, target)) {
        RemeshOptions opts;
        opts.target_edge = target;
        opts.min_angle_floor = policy.remesh.min_angle_floor;
        try {
          TriangleMesh remeshed = remesh(state.mesh, opts);
          GeometryCache cache = build_cache(remeshed);
          state.mesh = std::move(remeshed);
          state.cache = std::move(cache);
          state.energy = penalized_energy(state.cache, params);
          state.converged_steps = 0;
          ++remesh_count;
        } catch (const MeshError&) {
          // Keep the current mesh; the next accepted step retries.
        } catch (const GeometryError&) {
        }
      }
    }

    const bool record_now = state.step_index % policy.record_every == 0;
    const TimeSeriesRecord rec = make_record(state, params);
    update_convergence(rec.gradient_norm);
    if (record_now) emit(rec, false);

    if (policy.checkpoint_every > 0 && state.step_index % policy.checkpoint_every == 0) {
      std::ostringstream stem;
      stem << "checkpoint_" << std::setw(7) << std::setfill('0') << state.step_index;
      checkpoint(state, params, policy.checkpoint_dir, stem.str());
    }
  }

  // Make sure the terminal state is represented in the series.
  if (result.series.empty() || result.series.back().t != state.t) {
    emit(make_record(state, params), false);
  }
  result.report = make_report(state, params, reason, initial_curvature_scale, remesh_count);
  for (FlowObserver* o : observers) o->on_finish(state, result.report);
  result.final_state = std::move(state);
  return result;
}

// Checkpoints ---------------------------------------------------------------

std::uint64_t params_hash(const FlowParams& params) {
  std::ostringstream os;
  os << std::setprecision(17) << "c0=" << params.c0 << ";lambda=" << params.lambda;
  const std::string s = os.str();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

CheckpointFiles checkpoint(const FlowState& state, const FlowParams& params, const std::filesystem::path& dir,
                           const std::string& stem) {
  std::filesystem::create_directories(dir);
  CheckpointFiles files{dir / (stem + ".off"), dir / (stem + ".meta")};
  save_mesh(files.mesh, state.mesh, MeshFormat::Off);
  std::ofstream meta(files.meta);
  if (!meta) throw FlowError("cannot write checkpoint metadata " + files.meta.string());
  meta << std::setprecision(17);
  meta << "format = helfrich-checkpoint-1\n";
  meta << "t = " << state.t << '\n';
  meta << "dt = " << state.dt << '\n';
  meta << "step_index = " << state.step_index << '\n';
  meta << "rejections = " << state.rejections << '\n';
  meta << "initial_energy = " << state.initial_energy << '\n';
  meta << "initial_area = " << state.initial_area << '\n';
  meta << "initial_mean_edge = " << state.initial_mean_edge << '\n';
  meta << "converged_steps = " << state.converged_steps << '\n';
  meta << "c0 = " << params.c0 << '\n';
  meta << "lambda = " << params.lambda << '\n';
  meta << "params_hash = " << params_hash(params) << '\n';
  if (!meta) throw FlowError("write failed for " + files.meta.string());
  return files;
}

FlowState restore(const CheckpointFiles& files, const FlowParams& params) {
  std::ifstream meta(files.meta);
  if (!meta) throw FlowError("missing checkpoint metadata " + files.meta.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  const char* required[] = {"format", "t", "dt", "step_index", "rejections", "initial_energy",
                            "initial_area", "initial_mean_edge", "converged_steps", "params_hash"};
  for (const char* key : required) {
    if (!kv.count(key)) throw FlowError(std::string("corrupt checkpoint: missing key '") + key + "'");
  }
  if (kv["format"] != "helfrich-checkpoint-1") throw FlowError("corrupt checkpoint: unknown format");
  std::uint64_t stored_hash = 0;
  try {
    stored_hash = std::stoull(kv["params_hash"]);
  } catch (const std::exception&) {
    throw FlowError("corrupt checkpoint: bad params_hash");
  }
  if (stored_hash != params_hash(params)) {
    throw FlowError("checkpoint was written with different flow parameters (c0 = " + kv["c0"] +
                    ", lambda = " + kv["lambda"] + ")");
  }

  TriangleMesh mesh;
  {
    std::ifstream in(files.mesh);
    if (!in) throw FlowError("missing checkpoint mesh " + files.mesh.string());
    try {
      mesh = read_off(in);
      validate_mesh(mesh);
    } catch (const MeshError& e) {
      throw FlowError(std::string("corrupt checkpoint mesh: ") + e.what());
    }
  }

  FlowState s;
  try {
    s.t = std::stod(kv["t"]);
    s.dt = std::stod(kv["dt"]);
    s.step_index = std::stoull(kv["step_index"]);
    s.rejections = std::stoull(kv["rejections"]);
    s.initial_energy = std::stod(kv["initial_energy"]);
    s.initial_area = std::stod(kv["initial_area"]);
    s.initial_mean_edge = std::stod(kv["initial_mean_edge"]);
    s.converged_steps = std::stoull(kv["converged_steps"]);
  } catch (const std::exception&) {
    throw FlowError("corrupt checkpoint: malformed numeric field");
  }
  s.mesh = std::move(mesh);
  s.cache = build_cache(s.mesh);
  s.energy = penalized_energy(s.cache, params);
  return s;
}

}  // namespace helfrich
