#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "helfrich/diagnostics.hpp"
#include "helfrich/flow.hpp"
#include "helfrich/mesh_io.hpp"
#include "helfrich/sphere_ode.hpp"
#include "json.hpp"
#include "validation.hpp"

namespace helfrich::app {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const TheoryBounds& b) {
  return {{"r_star", opt(b.r_star)},
          {"t_bound", opt(b.t_bound)},
          {"en_threshold", opt(b.en_threshold)},
          {"beta_upper", opt(b.beta_upper)},
          {"willmore_ctrl_factor", opt(b.willmore_ctrl_factor)},
          {"inconsistent_energy", b.inconsistent_energy},
          {"notes", b.notes}};
}

json to_json(const FlowParams& p) { return {{"c0", p.c0}, {"lambda", p.lambda}}; }

json to_json(const TerminationReport& r) {
  return {{"reason", to_string(r.reason)},
          {"final_time", r.final_time},
          {"steps", r.steps},
          {"rejections", r.rejections},
          {"final_area", r.final_area},
          {"final_willmore", r.final_willmore},
          {"final_helfrich", r.final_helfrich},
          {"final_penalized", r.final_penalized},
          {"gradient_norm", r.gradient_norm},
          {"area_ratio", r.area_ratio},
          {"curvature_scale_initial", r.curvature_scale_initial},
          {"curvature_scale_final", r.curvature_scale_final},
          {"remesh_count", r.remesh_count}};
}

json to_json(const HypothesisRecord& h) {
  return {{"t", h.t},
          {"mean_curvature_integral", h.mean_curvature_integral},
          {"mean_curvature_positive", h.mean_curvature_positive},
          {"willmore0", h.willmore0},
          {"initial_energy", h.initial_energy},
          {"energy_threshold", opt(h.energy_threshold)},
          {"below_threshold", opt(h.below_threshold)},
          {"t_bound", opt(h.t_bound)},
          {"remaining_time_budget", opt(h.remaining_time_budget)}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path.string());
  out << std::setw(2) << j << '\n';
  if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

double mean_radius(const TriangleMesh& mesh) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& v : mesh.vertices) c += v;
  c /= static_cast<double>(mesh.num_vertices());
  double r = 0.0;
  for (const Vec3& v : mesh.vertices) r += (v - c).norm();
  return r / static_cast<double>(mesh.num_vertices());
}

class CsvSeriesObserver : public FlowObserver {
 public:
  explicit CsvSeriesObserver(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::ios_base::failure("cannot write " + path.string());
    write_series_header(out_);
  }
  void on_start(const FlowState&, const TimeSeriesRecord& r) override { write_series_row(out_, r); }
  void on_record(const FlowState&, const TimeSeriesRecord& r) override { write_series_row(out_, r); }
  void on_finish(const FlowState&, const TerminationReport&) override {
    out_.flush();
    if (!out_) throw std::ios_base::failure("write failed for series.csv");
  }

 private:
  std::ofstream out_;
};

class ProgressObserver : public FlowObserver {
 public:
  explicit ProgressObserver(std::ostream& log) : log_(log) {}
  void on_start(const FlowState&, const TimeSeriesRecord& r) override { print(r); }
  void on_record(const FlowState&, const TimeSeriesRecord& r) override {
    if (++count_ % 100 == 0) print(r);
  }
  void on_finish(const FlowState& s, const TerminationReport& rep) override {
    log_ << "finished: " << to_string(rep.reason) << " at t = " << s.t << " after " << rep.steps << " steps ("
         << rep.rejections << " rejected)\n";
  }

 private:
  void print(const TimeSeriesRecord& r) {
    log_ << "t = " << r.t << "  dt = " << r.dt << "  E = " << r.penalized << "  A = " << r.area
         << "  |xi| = " << r.gradient_norm << '\n';
  }
  std::ostream& log_;
  std::size_t count_ = 0;
};

}  // namespace

int cmd_flow(const RunConfig& cfg, std::ostream& log) {
  std::filesystem::create_directories(cfg.out_dir);
  FlowState initial;
  if (cfg.resume) {
    CheckpointFiles files{*cfg.resume, *cfg.resume};
    files.mesh += ".off";
    files.meta += ".meta";
    initial = restore(files, cfg.params);
  } else {
    initial = make_initial_state(make_mesh(cfg.mesh), cfg.params, cfg.policy);
  }
  const double initial_energy = initial.initial_energy;

  CsvSeriesObserver csv(cfg.out_dir / "series.csv");
  BlowUpRecorder recorder(cfg.params, cfg.diagnostics.kappa_target_fraction, cfg.diagnostics.frame_area_ratio);
  ProgressObserver progress(log);
  std::vector<FlowObserver*> observers{&csv, &recorder};
  if (!cfg.quiet) observers.push_back(&progress);

  const FlowResult result = resume_flow(std::move(initial), cfg.params, cfg.policy, observers);
  const bool singular = is_singular(result.report.reason);

  json summary;
  summary["command"] = "flow";
  summary["params"] = to_json(cfg.params);
  summary["verdict"] = to_string(result.report.reason);
  summary["termination"] = to_json(result.report);
  const TheoryBounds bounds = theory_bounds(cfg.params, initial_energy);
  summary["theory_bounds"] = to_json(bounds);
  json cmp;
  cmp["initial_energy"] = initial_energy;
  cmp["en_threshold"] = opt(bounds.en_threshold);
  cmp["initial_energy_below_threshold"] =
      bounds.en_threshold ? json(initial_energy <= *bounds.en_threshold) : json(nullptr);
  cmp["final_time"] = result.report.final_time;
  cmp["t_bound"] = opt(bounds.t_bound);
  cmp["final_time_below_t_bound"] =
      bounds.t_bound ? json(result.report.final_time < *bounds.t_bound) : json(nullptr);
  const FlowState& fin = result.final_state;
  if (bounds.willmore_ctrl_factor) {
    cmp["willmore_bound"] = *bounds.willmore_ctrl_factor * initial_energy;
    cmp["final_willmore_within_bound"] = fin.cache.willmore <= *bounds.willmore_ctrl_factor * initial_energy;
  }
  summary["threshold_comparison"] = cmp;
  summary["final_mean_radius"] = mean_radius(fin.mesh);
  summary["final_willmore0"] = fin.cache.willmore0;
  summary["hypothesis_monitor"] = to_json(hypothesis_monitors(fin, cfg.params));

  if (!cfg.mesh.path && !cfg.resume && cfg.mesh.generator == "icosphere") {
    json ref;
    const SphereOdeSolution ode = integrate_sphere_ode(cfg.mesh.radius, cfg.params, result.report.final_time);
    ref["r0"] = cfg.mesh.radius;
    ref["ode_terminal"] = to_string(ode.terminal);
    ref["ode_radius_at_final_time"] = ode.radius_at(result.report.final_time, cfg.params);
    ref["extinction_time"] = opt(extinction_time_closed_form(cfg.mesh.radius, cfg.params));
    ref["sphere_energy_initial"] = sphere_energy(cfg.mesh.radius, cfg.params);
    summary["sphere_reference"] = ref;
  }

  json cls;
  if (singular && recorder.frames().size() >= 3) {
    const SingularityClassification c = classify_singularity(recorder.frames());
    cls = {{"verdict", to_string(c.verdict)},
           {"fit_residual", c.fit_residual},
           {"willmore", c.willmore},
           {"penalized", c.penalized},
           {"willmore_near_sphere", c.willmore_near_sphere},
           {"willmore_trending", c.willmore_trending},
           {"concentrating", c.concentrating}};
  } else {
    cls = {{"verdict", "none"},
           {"reason", singular ? "fewer than three blow-up frames" : "run did not terminate singular"}};
  }
  summary["classification"] = cls;
  summary["frame_count"] = recorder.frames().size();
  summary["kappa_target"] = recorder.kappa_target();
  summary["frame_cadence"] = "area_ratio " + std::to_string(cfg.diagnostics.frame_area_ratio);

  if (singular && cfg.diagnostics.frames) {
    const auto dir = cfg.out_dir / "frames";
    for (std::size_t i = 0; i < recorder.frames().size(); ++i) write_frame(dir, i, recorder.frames()[i]);
    std::ofstream kcsv(dir / "kappa.csv");
    if (!kcsv) throw std::ios_base::failure("cannot write kappa.csv");
    const GeometryCache& cache = fin.cache;
    const auto radii =
        cfg.diagnostics.kappa_radii.empty() ? default_radius_grid(cache, fin.mesh) : cfg.diagnostics.kappa_radii;
    write_kappa_profile(kcsv, kappa_profile(fin.mesh, cache, radii, fin.t));
    summary["frames_dir"] = dir.string();
  }
  write_json(cfg.out_dir / "summary.json", summary);
  if (!cfg.quiet) log << "wrote " << (cfg.out_dir / "summary.json").string() << '\n';
  return singular ? kExitSingular : kExitOk;
}

int cmd_ode(const RunConfig& cfg, std::ostream& log) {
  std::filesystem::create_directories(cfg.out_dir);
  const double r0 = cfg.mesh.radius;
  const double horizon = std::isfinite(cfg.policy.horizon) ? cfg.policy.horizon : cfg.ode_horizon;
  const SphereOdeSolution sol = integrate_sphere_ode(r0, cfg.params, horizon);

  std::ofstream csv(cfg.out_dir / "ode.csv");
  if (!csv) throw std::ios_base::failure("cannot write ode.csv");
  csv << "t,r,energy\n" << std::setprecision(17);
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    csv << sol.times[i] << ',' << sol.radii[i] << ',' << sphere_energy(sol.radii[i], cfg.params) << '\n';
  }
  if (sol.terminal == OdeTerminal::Extinct) {
    csv << sol.terminal_time << ",0," << sphere_energy(0.0, cfg.params) << '\n';
  } else if (sol.times.back() < horizon) {
    csv << horizon << ',' << sol.radii.back() << ',' << sphere_energy(sol.radii.back(), cfg.params) << '\n';
  }
  if (!csv) throw std::ios_base::failure("write failed for ode.csv");

  const double e0 = sphere_energy(r0, cfg.params);
  json summary;
  summary["command"] = "ode";
  summary["params"] = to_json(cfg.params);
  summary["r0"] = r0;
  summary["horizon"] = horizon;
  summary["terminal"] = to_string(sol.terminal);
  summary["terminal_time"] = sol.terminal_time;
  summary["final_radius"] = sol.terminal == OdeTerminal::Extinct ? 0.0 : sol.radii.back();
  summary["extinction_time_closed_form"] = opt(extinction_time_closed_form(r0, cfg.params));
  summary["initial_energy"] = e0;
  summary["theory_bounds"] = to_json(theory_bounds(cfg.params, e0));
  write_json(cfg.out_dir / "summary.json", summary);
  if (!cfg.quiet) log << std::setw(2) << summary << '\n';
  return kExitOk;
}

int cmd_energy(const RunConfig& cfg, std::ostream& log) {
  std::filesystem::create_directories(cfg.out_dir);
  const TriangleMesh mesh = make_mesh(cfg.mesh);
  const GeometryCache cache = build_cache(mesh);
  const int g = genus(mesh);
  const double e = penalized_energy(cache, cfg.params);
  const MeshQualityReport q = quality_report(mesh);

  json j;
  j["command"] = "energy";
  j["params"] = to_json(cfg.params);
  j["vertices"] = mesh.num_vertices();
  j["faces"] = mesh.faces.size();
  j["euler_characteristic"] = cache.euler_characteristic;
  j["genus"] = g;
  j["area"] = cache.total_area;
  j["volume"] = cache.signed_volume;
  j["willmore"] = cache.willmore;
  j["willmore0"] = cache.willmore0;
  j["total_asq"] = cache.total_asq;
  j["helfrich"] = helfrich_energy(cache, cfg.params);
  j["penalized"] = e;
  j["mean_curvature_integral"] = cache.mean_curvature_integral;
  j["angle_defect_total"] = cache.angle_defect_total;
  j["gauss_bonnet_expected"] = 2.0 * M_PI * cache.euler_characteristic;
  j["angle_defect_residual"] = std::abs(cache.angle_defect_total - 2.0 * M_PI * cache.euler_characteristic);
  j["gauss_bonnet_residual"] = gauss_bonnet_residual(cache, g);
  j["clamp_mass"] = cache.clamp_mass;
  j["willmore_bound_residual"] =
      cfg.params.lambda > 0.0 ? json(willmore_bound_residual(cache, cfg.params)) : json(nullptr);
  j["theory_bounds"] = to_json(theory_bounds(cfg.params, e));
  j["quality"] = {{"min_edge", q.min_edge_length},
                  {"max_edge", q.max_edge_length},
                  {"mean_edge", q.mean_edge_length},
                  {"min_angle", q.min_angle},
                  {"max_angle", q.max_angle},
                  {"aspect_histogram", q.aspect_histogram}};
  write_json(cfg.out_dir / "energy.json", j);
  if (!cfg.quiet) log << std::setw(2) << j << '\n';
  return kExitOk;
}

int cmd_rescale(const RunConfig& cfg, std::ostream& log) {
  if (!(cfg.scale > 0.0) || !std::isfinite(cfg.scale)) throw ConfigError("scale must be positive and finite");
  std::filesystem::create_directories(cfg.out_dir);
  const TriangleMesh mesh = make_mesh(cfg.mesh);
  const TriangleMesh out = rescale(mesh, cfg.scale, cfg.scale_center);
  const FlowParams rp = cfg.params.rescaled(cfg.scale);
  const double before = penalized_energy(build_cache(mesh), cfg.params);
  const double after = penalized_energy(build_cache(out), rp);
  const double rel = std::abs(after - before) / std::max(std::abs(before), 1e-300);
  save_mesh(cfg.out_dir / "rescaled.off", out, MeshFormat::Off);

  json j;
  j["command"] = "rescale";
  j["scale"] = cfg.scale;
  j["center"] = {cfg.scale_center.x(), cfg.scale_center.y(), cfg.scale_center.z()};
  j["params"] = to_json(cfg.params);
  j["rescaled_params"] = to_json(rp);
  j["energy"] = before;
  j["rescaled_energy"] = after;
  j["energy_identity_relative_error"] = rel;
  j["energy_identity_holds"] = rel <= 1e-12;
  j["mesh"] = (cfg.out_dir / "rescaled.off").string();
  write_json(cfg.out_dir / "rescale.json", j);
  if (!cfg.quiet) log << std::setw(2) << j << '\n';
  return rel <= 1e-12 ? kExitOk : kExitValidation;
}

int cmd_validate(const RunConfig& cfg, std::ostream& log) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<std::string> names = cfg.suites.empty() ? suite_names() : cfg.suites;
  ValidationOptions opts{cfg.fast, cfg.seed};
  json report = json::array();
  bool all = true;
  for (const std::string& name : names) {
    const SuiteResult r = run_suite(name, opts);
    all = all && r.passed;
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(2) << r.seconds
        << " s)\n";
    log.unsetf(std::ios_base::floatfield);
    if (!cfg.quiet || !r.passed) {
      for (const std::string& d : r.details) log << "    " << d << '\n';
    }
    report.push_back({{"suite", r.name}, {"passed", r.passed}, {"seconds", r.seconds}, {"details", r.details},
                      {"data", r.data}});
  }
  write_json(cfg.out_dir / "validate.json", {{"fast", cfg.fast}, {"suites", report}, {"passed", all}});
  return all ? kExitOk : kExitValidation;
}

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MeshError& e) {
    err << "mesh error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FlowError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const GeometryError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const DiagnosticsError& e) {
    err << "diagnostics error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace helfrich::app
