#include "helfrich/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "helfrich/mesh_io.hpp"
#include "helfrich/sphere_ode.hpp"

namespace helfrich {

namespace {

class PointGrid {
 public:
  PointGrid(const std::vector<Vec3>& points, double cell) : points_(points) {
    lo_ = points.front();
    Vec3 hi = lo_;
    for (const Vec3& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo_).maxCoeff();
    cell_ = std::max(cell, extent / 64.0);
    if (!(cell_ > 0.0)) cell_ = 1.0;
    for (int k = 0; k < 3; ++k) dims_[k] = static_cast<int>(std::floor((hi[k] - lo_[k]) / cell_)) + 1;
    start_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
    std::vector<std::size_t> key(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      key[i] = index(coord(points[i]));
      ++start_[key[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(points.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) items_[fill[key[i]]++] = static_cast<int>(i);
  }

  // Sum of weight_i over points with |p_i - x| < r; visits cells in a fixed order.
  double ball_sum(const Vec3& x, double r, const std::vector<double>& weight) const {
    const auto c = coord(x);
    const int reach = static_cast<int>(std::ceil(r / cell_));
    const double r2 = r * r;
    double sum = 0.0;
    for (int k = std::max(0, c[2] - reach); k <= std::min(dims_[2] - 1, c[2] + reach); ++k)
      for (int j = std::max(0, c[1] - reach); j <= std::min(dims_[1] - 1, c[1] + reach); ++j)
        for (int i = std::max(0, c[0] - reach); i <= std::min(dims_[0] - 1, c[0] + reach); ++i) {
          const std::size_t cell = index({i, j, k});
          for (std::size_t n = start_[cell]; n < start_[cell + 1]; ++n) {
            const int p = items_[n];
            if ((points_[static_cast<std::size_t>(p)] - x).squaredNorm() < r2) sum += weight[static_cast<std::size_t>(p)];
          }
        }
    return sum;
  }

 private:
  std::array<int, 3> coord(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int k = 0; k < 3; ++k) {
      c[k] = std::clamp(static_cast<int>(std::floor((p[k] - lo_[k]) / cell_)), 0, dims_[k] - 1);
    }
    return c;
  }
  std::size_t index(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  const std::vector<Vec3>& points_;
  Vec3 lo_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::size_t> start_;
  std::vector<int> items_;
};

std::vector<double> asq_mass(const GeometryCache& cache) {
  std::vector<double> w(cache.num_vertices());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = cache.asq[i] * cache.area_weight[i];
  return w;
}

KappaValue kappa_with(const TriangleMesh& mesh, const GeometryCache& cache, const PointGrid& grid,
                      const std::vector<double>& weight, double r, const KappaOptions& options) {
  if (!(r > 0.0)) throw std::invalid_argument("kappa: radius must be positive");
  KappaValue best;
  if (r > bounding_box_diagonal(mesh)) {
    best.value = cache.total_asq;
    best.center = mesh.vertices.front();
    best.center_vertex = 0;
    return best;
  }
  const std::size_t stride = std::max<std::size_t>(options.center_stride, 1);
  best.value = -1.0;
  for (std::size_t v = 0; v < mesh.num_vertices(); v += stride) {
    const double s = grid.ball_sum(mesh.vertices[v], r, weight);
    if (s > best.value) {
      best.value = s;
      best.center = mesh.vertices[v];
      best.center_vertex = static_cast<int>(v);
    }
  }
  return best;
}

}  // namespace

KappaValue kappa(const TriangleMesh& mesh, const GeometryCache& cache, double r, const KappaOptions& options) {
  if (!(r > 0.0)) throw std::invalid_argument("kappa: radius must be positive");
  const PointGrid grid(mesh.vertices, r);
  return kappa_with(mesh, cache, grid, asq_mass(cache), r, options);
}

KappaProfile kappa_profile(const TriangleMesh& mesh, const GeometryCache& cache, const std::vector<double>& radii,
                           double t, const KappaOptions& options) {
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] > radii[i - 1])) throw std::invalid_argument("kappa_profile: radii must be increasing");
  }
  KappaProfile p;
  p.t = t;
  p.subsampled = options.center_stride > 1;
  const std::vector<double> weight = asq_mass(cache);
  for (double r : radii) {
    const PointGrid grid(mesh.vertices, r);
    const KappaValue k = kappa_with(mesh, cache, grid, weight, r, options);
    p.radii.push_back(r);
    p.kappa.push_back(k.value);
    p.centers.push_back(k.center);
  }
  // Balls are nested at every center, so the sup cannot decrease; allow
  // only summation-order roundoff.
  const double slack = 1e-12 * std::max(cache.total_asq, 1e-300);
  for (std::size_t i = 1; i < p.kappa.size(); ++i) {
    if (p.kappa[i] < p.kappa[i - 1] - slack) {
      std::ostringstream os;
      os << "kappa profile decreases between r = " << p.radii[i - 1] << " and r = " << p.radii[i];
      throw DiagnosticsError(os.str());
    }
  }
  return p;
}

std::vector<double> default_radius_grid(const GeometryCache& cache, const TriangleMesh& mesh, std::size_t count) {
  if (count < 2) throw std::invalid_argument("default_radius_grid: need at least two radii");
  const double lo = cache.min_edge_length;
  const double hi = bounding_box_diagonal(mesh);
  std::vector<double> r(count);
  for (std::size_t i = 0; i < count; ++i) {
    r[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return r;
}

double select_blowup_radius(const KappaProfile& profile, double kappa_target) {
  if (profile.kappa.empty()) throw DiagnosticsError("select_blowup_radius: empty profile");
  if (!(kappa_target > 0.0)) throw DiagnosticsError("select_blowup_radius: target must be positive");
  if (kappa_target > profile.kappa.back()) {
    throw DiagnosticsError("select_blowup_radius: target exceeds the total curvature energy");
  }
  if (profile.kappa.front() >= kappa_target) return profile.radii.front();
  for (std::size_t i = 1; i < profile.kappa.size(); ++i) {
    if (profile.kappa[i] >= kappa_target) {
      const double k0 = profile.kappa[i - 1], k1 = profile.kappa[i];
      const double s = k1 > k0 ? (kappa_target - k0) / (k1 - k0) : 1.0;
      return profile.radii[i - 1] + s * (profile.radii[i] - profile.radii[i - 1]);
    }
  }
  return profile.radii.back();
}

BlowUpFrame extract_blowup_frame(const FlowState& state, const FlowParams& params, double kappa_target,
                                 const KappaOptions& options) {
  const KappaProfile profile =
      kappa_profile(state.mesh, state.cache, default_radius_grid(state.cache, state.mesh), state.t, options);
  BlowUpFrame f;
  f.t = state.t;
  f.kappa_target = kappa_target;
  f.r = select_blowup_radius(profile, kappa_target);
  f.center = kappa(state.mesh, state.cache, f.r, options).center;
  f.rescaled_mesh = rescale(state.mesh, f.r, f.center);
  f.rescaled_params = params.rescaled(f.r);
  f.area = state.cache.total_area;
  f.willmore = state.cache.willmore;
  f.penalized = penalized_energy(state.cache, params);

  const double rescaled_energy = penalized_energy(build_cache(f.rescaled_mesh), f.rescaled_params);
  // W is scale invariant and bounds the rounding of each term.
  const double scale = std::max({std::abs(f.penalized), f.willmore, 1e-300});
  if (std::abs(rescaled_energy - f.penalized) > 1e-12 * scale) {
    std::ostringstream os;
    os << std::setprecision(17) << "blow-up frame energy identity violated: " << f.penalized << " vs "
       << rescaled_energy;
    throw DiagnosticsError(os.str());
  }
  return f;
}

SphereFit fit_sphere(const std::vector<Vec3>& points) {
  if (points.size() < 4) throw DiagnosticsError("fit_sphere: need at least four points");
  // |x|^2 = 2 c.x + d, with d = R^2 - |c|^2.
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& p = points[static_cast<std::size_t>(i)];
    a.row(i) << 2.0 * p.x(), 2.0 * p.y(), 2.0 * p.z(), 1.0;
    b[i] = p.squaredNorm();
  }
  const Eigen::Vector4d sol = a.colPivHouseholderQr().solve(b);
  SphereFit fit;
  fit.center = sol.head<3>();
  fit.radius = std::sqrt(std::max(sol[3] + fit.center.squaredNorm(), 0.0));

  // One Gauss-Newton step on r_i = |x_i - c| - R.
  Eigen::MatrixXd j(n, 4);
  Eigen::VectorXd res(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 d = points[static_cast<std::size_t>(i)] - fit.center;
    const double len = d.norm();
    const Vec3 u = len > 0.0 ? Vec3(d / len) : Vec3::Zero();
    j.row(i) << -u.x(), -u.y(), -u.z(), -1.0;
    res[i] = len - fit.radius;
  }
  const Eigen::Vector4d step = j.colPivHouseholderQr().solve(-res);
  fit.center += step.head<3>();
  fit.radius += step[3];

  double ss = 0.0;
  for (const Vec3& p : points) {
    const double e = (p - fit.center).norm() - fit.radius;
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(points.size())) / fit.radius;
  return fit;
}

std::string to_string(SingularityVerdict verdict) {
  switch (verdict) {
    case SingularityVerdict::RoundShrinker: return "round_shrinker";
    case SingularityVerdict::NonRoundConcentration: return "non_round_concentration";
    case SingularityVerdict::None: return "none";
  }
  return "unknown";
}

SingularityClassification classify_singularity(const std::vector<BlowUpFrame>& frames,
                                               const ClassificationOptions& options) {
  if (frames.size() < 3) throw DiagnosticsError("classify_singularity: need at least three frames");
  SingularityClassification c;
  c.fit_residual = fit_sphere(frames.back().rescaled_mesh.vertices).residual;
  for (const BlowUpFrame& f : frames) {
    c.willmore.push_back(f.willmore);
    c.penalized.push_back(f.penalized);
  }
  c.concentrating = frames.back().area < options.concentration_area_ratio * frames.front().area;

  const double sphere = 4.0 * M_PI;
  const std::size_t k = std::min(options.willmore_frames, frames.size());
  c.willmore_near_sphere = true;
  c.willmore_trending = true;
  for (std::size_t i = frames.size() - k; i < frames.size(); ++i) {
    const double gap = std::abs(frames[i].willmore - sphere);
    if (gap > options.willmore_tolerance * sphere) c.willmore_near_sphere = false;
    if (i > frames.size() - k) {
      const double prev = std::abs(frames[i - 1].willmore - sphere);
      if (gap > prev + options.trend_slack * sphere) c.willmore_trending = false;
    }
  }

  const bool round = c.fit_residual < options.fit_threshold;
  if (!round) {
    c.verdict = SingularityVerdict::NonRoundConcentration;
  } else if (c.concentrating && c.willmore_near_sphere && c.willmore_trending) {
    c.verdict = SingularityVerdict::RoundShrinker;
  } else {
    c.verdict = SingularityVerdict::None;
  }
  return c;
}

HypothesisRecord hypothesis_monitors(const FlowState& state, const FlowParams& params) {
  HypothesisRecord h;
  h.t = state.t;
  h.mean_curvature_integral = state.cache.mean_curvature_integral;
  h.mean_curvature_positive = h.mean_curvature_integral > 0.0;
  h.willmore0 = state.cache.willmore0;
  h.initial_energy = state.initial_energy;
  const TheoryBounds bounds = theory_bounds(params, state.initial_energy);
  h.energy_threshold = bounds.en_threshold;
  if (bounds.en_threshold) h.below_threshold = state.initial_energy <= *bounds.en_threshold;
  h.t_bound = bounds.t_bound;
  if (bounds.t_bound) h.remaining_time_budget = *bounds.t_bound - state.t;
  return h;
}

BlowUpRecorder::BlowUpRecorder(FlowParams params, double kappa_target_fraction, double area_ratio)
    : params_(params), fraction_(kappa_target_fraction), area_ratio_(area_ratio) {
  if (!(fraction_ > 0.0 && fraction_ < 1.0)) throw std::invalid_argument("kappa target fraction must lie in (0, 1)");
  if (!(area_ratio_ > 0.0 && area_ratio_ < 1.0)) throw std::invalid_argument("area ratio must lie in (0, 1)");
}

void BlowUpRecorder::emit(const FlowState& state) {
  frames_.push_back(extract_blowup_frame(state, params_, kappa_target_));
  monitors_.push_back(hypothesis_monitors(state, params_));
  next_area_ = area_ratio_ * state.cache.total_area;
}

void BlowUpRecorder::on_start(const FlowState& state, const TimeSeriesRecord&) {
  kappa_target_ = fraction_ * state.cache.total_asq;
  emit(state);
}

void BlowUpRecorder::on_record(const FlowState& state, const TimeSeriesRecord&) {
  if (state.cache.total_area <= next_area_) emit(state);
}

void write_frame(const std::filesystem::path& dir, std::size_t index, const BlowUpFrame& frame) {
  std::filesystem::create_directories(dir);
  std::ostringstream stem;
  stem << std::setw(4) << std::setfill('0') << index;
  save_mesh(dir / (stem.str() + ".off"), frame.rescaled_mesh, MeshFormat::Off);
  std::ofstream meta(dir / (stem.str() + ".meta"));
  if (!meta) throw DiagnosticsError("cannot write frame metadata in " + dir.string());
  meta << std::setprecision(17);
  meta << "t = " << frame.t << '\n';
  meta << "r = " << frame.r << '\n';
  meta << "center = " << frame.center.x() << ' ' << frame.center.y() << ' ' << frame.center.z() << '\n';
  meta << "c0 = " << frame.rescaled_params.c0 << '\n';
  meta << "lambda = " << frame.rescaled_params.lambda << '\n';
  meta << "kappa_target = " << frame.kappa_target << '\n';
  meta << "area = " << frame.area << '\n';
  meta << "willmore = " << frame.willmore << '\n';
  meta << "penalized = " << frame.penalized << '\n';
  meta << "cadence = area_halving\n";
  if (!meta) throw DiagnosticsError("write failed for frame " + stem.str());
}

void write_kappa_profile(std::ostream& out, const KappaProfile& profile, bool header) {
  if (header) out << "t,r,kappa,cx,cy,cz\n";
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (std::size_t i = 0; i < profile.radii.size(); ++i) {
    const Vec3& c = profile.centers[i];
    out << profile.t << ',' << profile.radii[i] << ',' << profile.kappa[i] << ',' << c.x() << ',' << c.y() << ','
        << c.z() << '\n';
  }
  out.precision(precision);
}

}  // namespace helfrich
