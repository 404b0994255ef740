#include "validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "config.hpp"
#include "helfrich/diagnostics.hpp"
#include "helfrich/flow.hpp"
#include "helfrich/sphere_ode.hpp"
#include "helfrich/variation.hpp"

namespace helfrich::app {

using nlohmann::json;

namespace {

class Report {
 public:
  explicit Report(SuiteResult& r) : r_(r) {}
  void check(bool ok, const std::string& what) {
    r_.details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    all_ = all_ && ok;
  }
  bool passed() const { return all_; }

 private:
  SuiteResult& r_;
  bool all_ = true;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double mean_radius(const TriangleMesh& mesh) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& v : mesh.vertices) c += v;
  c /= static_cast<double>(mesh.num_vertices());
  double r = 0.0;
  for (const Vec3& v : mesh.vertices) r += (v - c).norm();
  return r / static_cast<double>(mesh.num_vertices());
}

TriangleMesh perturbed(TriangleMesh mesh, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (Vec3& v : mesh.vertices) v *= 1.0 + u(rng);
  return mesh;
}

/// Largest per-step rise of the penalized energy relative to |E0|.
double worst_energy_rise(const std::vector<TimeSeriesRecord>& series) {
  double worst = 0.0;
  const double e0 = std::abs(series.front().penalized);
  for (std::size_t i = 1; i < series.size(); ++i) {
    worst = std::max(worst, (series[i].penalized - series[i - 1].penalized) / std::max(e0, 1e-300));
  }
  return worst;
}

void suite_identities(const ValidationOptions& opt, SuiteResult& out, Report& rep) {
  std::vector<std::pair<std::string, TriangleMesh>> meshes;
  meshes.emplace_back("tetrahedron", make_tetrahedron());
  for (int l = 0; l <= (opt.fast ? 4 : 5); ++l) meshes.emplace_back("icosphere" + std::to_string(l), make_icosphere(l));
  meshes.emplace_back("torus", make_torus(1.0, 0.4, 48, 24));
  double worst_gb = 0.0, worst_asq = 0.0;
  for (const auto& [name, mesh] : meshes) {
    const GeometryCache c = build_cache(mesh);
    const double gb = std::abs(c.angle_defect_total - 2.0 * M_PI * c.euler_characteristic);
    worst_gb = std::max(worst_gb, gb);
    for (std::size_t i = 0; i < c.num_vertices(); ++i) {
      const double h = c.mean_curvature[i];
      worst_asq = std::max(worst_asq,
                           std::abs(c.asq[i] - (c.a0sq[i] + 0.5 * h * h)) / std::max(1.0, std::abs(c.asq[i])));
    }
    out.data["gauss_bonnet"][name] = gb;
  }
  rep.check(worst_gb <= 1e-10, "Gauss-Bonnet residual " + fmt(worst_gb) + " <= 1e-10");
  rep.check(worst_asq <= 1e-14, "|A|^2 split residual " + fmt(worst_asq));

  std::mt19937_64 rng(opt.seed);
  const int count = opt.fast ? 5 : 20;
  double worst = 0.0;
  std::uniform_real_distribution<double> c0d(-3.0, 3.0), ld(0.0, 2.0), xd(-1.0, 1.0);
  for (int k = 0; k < count; ++k) {
    const TriangleMesh mesh = perturbed(make_icosphere(2 + k % 2, 0.5 + 0.1 * k), rng, 0.1);
    const FlowParams p{c0d(rng), ld(rng)};
    const Vec3 x(xd(rng), xd(rng), xd(rng));
    const double e = penalized_energy(build_cache(mesh), p);
    for (double r : {0.5, 1.0, 2.0, 5.0}) {
      const double er = penalized_energy(build_cache(rescale(mesh, r, x)), p.rescaled(r));
      worst = std::max(worst, rel_err(er, e));
    }
  }
  out.data["rescaling_identity_worst"] = worst;
  rep.check(worst <= 1e-12, "rescaling energy identity worst " + fmt(worst) + " <= 1e-12 on " +
                                std::to_string(count) + " meshes");
}

void suite_gradients(const ValidationOptions& opt, SuiteResult& out, Report& rep) {
  const int level = opt.fast ? 3 : 4;
  const TriangleMesh mesh = make_icosphere(level);
  const GeometryCache cache = build_cache(mesh);
  const FlowParams params{1.0, 0.0};
  const double analytic_tol = opt.fast ? 1e-2 : 2e-3;
  const int fields = opt.fast ? 2 : 5;
  const double eps = std::numeric_limits<double>::epsilon();
  const double bbox = bounding_box_diagonal(mesh);
  const std::pair<Functional, const char*> functionals[] = {
      {Functional::Area, "area"}, {Functional::Volume, "volume"}, {Functional::Helfrich, "helfrich"}};
  for (int k = 0; k < fields; ++k) {
    const std::vector<double> phi = random_smooth_field(mesh, opt.seed + k);
    double phi_scale = 0.0;
    for (double v : phi) phi_scale = std::max(phi_scale, std::abs(v));
    for (const auto& [fn, name] : functionals) {
      const double value = functional_value(mesh, params, fn);
      std::vector<double> disc;
      VariationCheck last;
      for (double step : {1e-3, 1e-4, 1e-5}) {
        last = first_variation_check(mesh, params, phi, fn, step);
        disc.push_back(std::abs(last.finite_difference - last.exact_discrete));
      }
      // Below this a central difference is dominated by rounding of E.
      auto floor_at = [&](double step) { return 64.0 * eps * std::abs(value) / (step * bbox * phi_scale); };
      bool order_ok = true;
      std::vector<double> orders;
      const double steps[] = {1e-3, 1e-4, 1e-5};
      for (int i = 0; i + 1 < 3; ++i) {
        const double ord = std::log10(disc[i] / std::max(disc[i + 1], 1e-300));
        orders.push_back(ord);
        if (ord < 1.9 && disc[i + 1] > floor_at(steps[i + 1])) order_ok = false;
      }
      const double ana = rel_err(last.analytic, last.finite_difference);
      const std::string tag = std::string(name) + " field " + std::to_string(k);
      out.data[tag] = {{"discrepancy", disc}, {"orders", orders}, {"analytic_relative", ana}};
      rep.check(order_ok, tag + " FD order " + fmt(orders[0]) + ", " + fmt(orders[1]));
      rep.check(ana <= analytic_tol, tag + " analytic vs FD " + fmt(ana) + " <= " + fmt(analytic_tol));
    }
  }
}

struct RadiusProbe : FlowObserver {
  std::vector<double> t, r;
  void on_start(const FlowState& s, const TimeSeriesRecord&) override { push(s); }
  void on_record(const FlowState& s, const TimeSeriesRecord&) override { push(s); }
  void push(const FlowState& s) {
    t.push_back(s.t);
    r.push_back(mean_radius(s.mesh));
  }
};

void suite_rescaling(const ValidationOptions& opt, SuiteResult& out, Report& rep) {
  const int level = opt.fast ? 2 : 3;
  const TriangleMesh mesh = make_icosphere(level, 1.0);
  const FlowParams params{-1.0, 0.0};
  SteppingPolicy policy;
  policy.gradient_tolerance = 0.0;
  policy.horizon = 0.08;
  const double r = 2.0;
  SteppingPolicy twin_policy = policy;
  twin_policy.dt_init = policy.dt_init / std::pow(r, 4);
  twin_policy.horizon = policy.horizon / std::pow(r, 4);

  RadiusProbe a, b;
  const FlowResult ra = run_flow(mesh, params, policy, {&a});
  const FlowResult rb = run_flow(rescale(mesh, r, Vec3::Zero()), params.rescaled(r), twin_policy, {&b});
  rep.check(a.r.size() == b.r.size(), "matched record counts " + std::to_string(a.r.size()) + " / " +
                                          std::to_string(b.r.size()));
  const std::size_t n = std::min(a.r.size(), b.r.size());
  double worst_r = 0.0, worst_t = 0.0;
  std::vector<double> sampled;
  for (int k = 1; k <= 10 && n > 1; ++k) {
    const std::size_t i = (n - 1) * k / 10;
    worst_r = std::max(worst_r, rel_err(b.r[i] * r, a.r[i]));
    worst_t = std::max(worst_t, rel_err(b.t[i] * std::pow(r, 4), a.t[i]));
    sampled.push_back(a.t[i]);
  }
  out.data["checkpoint_times"] = sampled;
  out.data["worst_radius_relative"] = worst_r;
  out.data["worst_time_relative"] = worst_t;
  rep.check(ra.report.steps == rb.report.steps, "matched step counts");
  rep.check(worst_r <= 1e-6, "back-scaled radius mismatch " + fmt(worst_r) + " <= 1e-6 at 10 checkpoints");
  rep.check(worst_t <= 1e-12, "back-scaled time mismatch " + fmt(worst_t));
}

void suite_ode_oracle(const ValidationOptions& opt, SuiteResult& out, Report& rep) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> rd(0.1, 3.0), cd(-3.0, -0.1), ld(0.0, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const FlowParams p{cd(rng), ld(rng)};
    const double r0 = rd(rng);
    const double closed = *extinction_time_closed_form(r0, p);
    const SphereOdeSolution sol = integrate_sphere_ode(r0, p, 10.0 * closed + 1.0);
    if (sol.terminal != OdeTerminal::Extinct) {
      rep.check(false, "case " + std::to_string(k) + " did not go extinct");
      continue;
    }
    worst = std::max(worst, rel_err(sol.terminal_time, closed));
  }
  out.data["worst_relative"] = worst;
  rep.check(worst <= 1e-8, "extinction closed form vs integration worst " + fmt(worst) + " <= 1e-8 (50 cases)");

  const FlowParams shrink{-1.0, 0.0};
  const double t = *extinction_time_closed_form(1.0, shrink);
  rep.check(std::abs(t - 0.121860) < 1e-6, "(c0, lambda) = (-1, 0), r0 = 1: T = " + fmt(t));
  const FlowParams eq{1.0, 0.5};
  const SphereOdeSolution s = integrate_sphere_ode(2.0, eq, 100.0);
  rep.check(s.terminal == OdeTerminal::EquilibriumReached && std::abs(s.radii.back() - 1.0) < 1e-8,
            "(1, 0.5), r0 = 2 reaches r* = 1");
}

void suite_shrinker(const ValidationOptions& opt, SuiteResult& out, Report& rep) {
  const int level = opt.fast ? 3 : 4;
  const double tol = opt.fast ? 0.15 : 0.10;
  const FlowParams params{-1.0, 0.0};
  SteppingPolicy policy;
  policy.gradient_tolerance = 0.0;
  BlowUpRecorder recorder(params);
  const FlowResult res = run_flow(make_icosphere(level, 1.0), params, policy, {&recorder});
  const double expected = *extinction_time_closed_form(1.0, params);
  const TheoryBounds bounds = theory_bounds(params, res.series.front().penalized);
  const double t_end = res.report.final_time;
  out.data["level"] = level;
  out.data["final_time"] = t_end;
  out.data["steps"] = res.report.steps;
  rep.check(res.report.reason == TerminationReason::SingularAreaCollapse,
            "termination " + to_string(res.report.reason));
  rep.check(rel_err(t_end, expected) <= tol,
            "T = " + fmt(t_end) + " within " + fmt(100 * tol) + "% of " + fmt(expected));
  rep.check(bounds.t_bound && t_end < *bounds.t_bound, "T below T_bound " + fmt(bounds.t_bound.value_or(0.0)));
  const double rise = worst_energy_rise(res.series);
  rep.check(rise <= 1e-10, "energy rise per step " + fmt(rise) + " <= 1e-10 E0");
  if (recorder.frames().size() < 3) {
    rep.check(false, "fewer than three blow-up frames");
    return;
  }
  const SingularityClassification c = classify_singularity(recorder.frames());
  out.data["frames"] = recorder.frames().size();
  out.data["willmore"] = c.willmore;
  rep.check(c.verdict == SingularityVerdict::RoundShrinker, "classification " + to_string(c.verdict));
}

void suite_equilibrium(const ValidationOptions& opt, SuiteResult& out, Report& rep) {
  const int level = opt.fast ? 3 : 4;
  const FlowParams params{1.0, 0.5};
  const std::vector<double> starts = opt.fast ? std::vector<double>{1.5} : std::vector<double>{0.6, 1.5};
  for (double r0 : starts) {
    SteppingPolicy policy;
    const FlowResult res = run_flow(make_icosphere(level, r0), params, policy);
    const double radius = mean_radius(res.final_state.mesh);
    const SphereOdeSolution ode = integrate_sphere_ode(r0, params, res.report.final_time);
    double worst_energy = 0.0, worst_willmore = -1e300;
    const double e0 = res.series.front().penalized;
    for (const TimeSeriesRecord& rec : res.series) {
      worst_energy = std::max(worst_energy, rel_err(rec.penalized, sphere_energy(ode.radius_at(rec.t, params), params)));
      worst_willmore = std::max(worst_willmore, rec.willmore - 2.0 * e0);
    }
    const std::string tag = "r0 = " + fmt(r0);
    out.data[tag] = {{"radius", radius},
                     {"final_time", res.report.final_time},
                     {"willmore0", res.final_state.cache.willmore0},
                     {"energy_vs_ode", worst_energy}};
    rep.check(res.report.reason == TerminationReason::Converged, tag + " termination " + to_string(res.report.reason));
    rep.check(std::abs(radius - 1.0) <= 0.02, tag + " final radius " + fmt(radius));
    rep.check(res.final_state.cache.willmore0 < 1e-3, tag + " final W0 " + fmt(res.final_state.cache.willmore0));
    rep.check(worst_energy <= 0.03, tag + " energy vs sphere ODE " + fmt(worst_energy) + " <= 3%");
    rep.check(worst_willmore <= 1e-6, tag + " Willmore control margin " + fmt(worst_willmore));
    const double rise = worst_energy_rise(res.series);
    rep.check(rise <= 1e-10, tag + " energy rise per step " + fmt(rise));
  }

  SteppingPolicy hopf;
  hopf.horizon = 1.0;
  hopf.gradient_tolerance = 0.0;
  const FlowResult res = run_flow(make_icosphere(level, 1.0), FlowParams{2.0, 0.0}, hopf);
  double dev = 0.0;
  for (const Vec3& v : res.final_state.mesh.vertices) dev = std::max(dev, std::abs(v.norm() - 1.0));
  out.data["hopf_max_deviation"] = dev;
  rep.check(dev <= 0.01, "(2, 0) sphere deviation at t = 1: " + fmt(dev) + " <= 1%");
}

using SuiteFn = void (*)(const ValidationOptions&, SuiteResult&, Report&);

const std::vector<std::pair<std::string, SuiteFn>>& suites() {
  static const std::vector<std::pair<std::string, SuiteFn>> s = {
      {"identities", suite_identities}, {"gradients", suite_gradients}, {"rescaling", suite_rescaling},
      {"ode_oracle", suite_ode_oracle}, {"shrinker", suite_shrinker},   {"equilibrium", suite_equilibrium}};
  return s;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : suites()) n.push_back(s.first);
    return n;
  }();
  return names;
}

SuiteResult run_suite(const std::string& name, const ValidationOptions& options) {
  const auto it = std::find_if(suites().begin(), suites().end(), [&](const auto& s) { return s.first == name; });
  if (it == suites().end()) throw ConfigError("unknown validation suite '" + name + "'");
  SuiteResult result;
  result.name = name;
  Report report(result);
  const auto t0 = std::chrono::steady_clock::now();
  it->second(options, result, report);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.passed = report.passed();
  return result;
}

}  // namespace helfrich::app
