#include "helfrich/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "local_kernels.hpp"

namespace helfrich {

void FlowParams::validate() const {
  if (!std::isfinite(c0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("flow parameters must be finite");
  }
  if (lambda < 0.0 && !allow_negative_lambda) {
    throw std::invalid_argument("lambda must be non-negative (set allow_negative_lambda to override)");
  }
}

FlowParams FlowParams::rescaled(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("rescaling radius must be positive");
  FlowParams out = *this;
  out.c0 = r * c0;
  out.lambda = r * r * lambda;
  return out;
}

namespace {

void check_face(const TriangleMesh& mesh, int f) {
  const Face& face = mesh.faces[f];
  const Vec3& p = mesh.vertices[face[0]];
  const Vec3& q = mesh.vertices[face[1]];
  const Vec3& s = mesh.vertices[face[2]];
  const double twice_area = (q - p).cross(s - p).norm();
  const double longest2 = std::max({(q - p).squaredNorm(), (s - q).squaredNorm(), (p - s).squaredNorm()});
  // |cot| of the smallest angle is about longest^2 / (2 area).
  if (!(twice_area > 1e-12 * longest2) || !std::isfinite(twice_area)) {
    std::ostringstream os;
    os << "cotan weight overflow: face " << f << " is degenerate (twice area " << twice_area << ")";
    throw GeometryError(os.str());
  }
}

}  // namespace

GeometryCache build_cache(const TriangleMesh& mesh, std::shared_ptr<const MeshTopology> topology) {
  if (!topology) topology = std::make_shared<const MeshTopology>(build_topology(mesh));
  const std::size_t nv = mesh.vertices.size();
  const std::size_t nf = mesh.faces.size();
  for (std::size_t f = 0; f < nf; ++f) check_face(mesh, static_cast<int>(f));

  GeometryCache c;
  c.topology = topology;
  c.area_weight.resize(nv);
  c.normal.resize(nv);
  c.laplacian_position.resize(nv);
  c.mean_curvature.resize(nv);
  c.gauss_curvature.resize(nv);
  c.a0sq.resize(nv);
  c.asq.resize(nv);

  auto pos = [&](int i) { return detail::lift<double>(mesh.vertices[i]); };

  // Angle sums for the angle defect.
  std::vector<double> angle_sum(nv, 0.0);
  for (const Face& face : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const Vec3 u = mesh.vertices[face[(k + 1) % 3]] - mesh.vertices[face[k]];
      const Vec3 w = mesh.vertices[face[(k + 2) % 3]] - mesh.vertices[face[k]];
      angle_sum[face[k]] += std::atan2(u.cross(w).norm(), u.dot(w));
    }
  }

  for (std::size_t i = 0; i < nv; ++i) {
    const auto g = detail::local_vertex_geometry<double>(static_cast<int>(i), topology->vertex_faces[i],
                                                         mesh.faces, pos);
    if (!(g.area > 0.0)) {
      std::ostringstream os;
      os << "vertex " << i << " has non-positive mixed area";
      throw GeometryError(os.str());
    }
    const Vec3 nsum = detail::lower(g.normal_sum);
    c.area_weight[i] = g.area;
    c.normal[i] = nsum.normalized();
    c.laplacian_position[i] = detail::lower(g.stiffness) / g.area;
    c.mean_curvature[i] = c.laplacian_position[i].dot(c.normal[i]);
    c.gauss_curvature[i] = (2.0 * std::numbers::pi - angle_sum[i]) / g.area;
  }

  // Stiffness matrix assembled per face.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(nf * 12);
  for (const Face& face : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int o = face[k];
      const int a = face[(k + 1) % 3];
      const int b = face[(k + 2) % 3];
      const Vec3 u = mesh.vertices[a] - mesh.vertices[o];
      const Vec3 w = mesh.vertices[b] - mesh.vertices[o];
      const double half_cot = 0.5 * u.dot(w) / u.cross(w).norm();
      triplets.emplace_back(a, b, half_cot);
      triplets.emplace_back(b, a, half_cot);
      triplets.emplace_back(a, a, -half_cot);
      triplets.emplace_back(b, b, -half_cot);
    }
  }
  c.stiffness.resize(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nv));
  c.stiffness.setFromTriplets(triplets.begin(), triplets.end());

  c.total_area = 0.0;
  for (std::size_t f = 0; f < nf; ++f) c.total_area += face_area(mesh, static_cast<int>(f));
  c.signed_volume = signed_volume(mesh);

  double w = 0.0, w0 = 0.0, asq_total = 0.0, h_int = 0.0, defect = 0.0, clamp = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < nv; ++i) {
    const double h = c.mean_curvature[i];
    const double a = c.area_weight[i];
    const double raw = 0.5 * h * h - 2.0 * c.gauss_curvature[i];
    if (raw < 0.0) clamp += -raw * a;
    c.a0sq[i] = std::max(raw, 0.0);
    c.asq[i] = c.a0sq[i] + 0.5 * h * h;
    w += 0.25 * h * h * a;
    w0 += c.a0sq[i] * a;
    asq_total += c.asq[i] * a;
    h_int += h * a;
    defect += c.gauss_curvature[i] * a;
    sup = std::max(sup, c.asq[i]);
  }
  c.willmore = w;
  c.willmore0 = w0;
  c.total_asq = asq_total;
  c.mean_curvature_integral = h_int;
  c.angle_defect_total = defect;
  c.clamp_mass = clamp;
  c.sup_asq = sup;
  c.euler_characteristic = topology->euler_characteristic(nv, nf);

  double emin = std::numeric_limits<double>::infinity(), esum = 0.0;
  for (const Edge& e : topology->edges) {
    const double len = (mesh.vertices[e.v0] - mesh.vertices[e.v1]).norm();
    emin = std::min(emin, len);
    esum += len;
  }
  c.min_edge_length = emin;
  c.mean_edge_length = topology->edges.empty() ? 0.0 : esum / static_cast<double>(topology->edges.size());
  return c;
}

double area(const GeometryCache& cache) { return cache.total_area; }

double willmore_energy(const GeometryCache& cache) { return cache.willmore; }

double helfrich_energy(const GeometryCache& cache, const FlowParams& params) {
  double e = 0.0;
  for (std::size_t i = 0; i < cache.num_vertices(); ++i) {
    const double d = cache.mean_curvature[i] - params.c0;
    e += 0.25 * d * d * cache.area_weight[i];
  }
  return e;
}

double penalized_energy(const GeometryCache& cache, const FlowParams& params) {
  return helfrich_energy(cache, params) + 0.5 * params.lambda * cache.total_area;
}

double mean_curvature_integral(const GeometryCache& cache) { return cache.mean_curvature_integral; }

double gauss_bonnet_residual(const GeometryCache& cache, int genus) {
  const double pi = std::numbers::pi;
  const double g = static_cast<double>(genus);
  const double r1 = std::abs(cache.willmore0 - (2.0 * cache.willmore - 8.0 * pi * (1.0 - g)));
  const double r2 = std::abs(cache.total_asq - (4.0 * (cache.willmore - 2.0 * pi) + 8.0 * pi * g));
  return std::max(r1, r2);
}

double willmore_bound_residual(const GeometryCache& cache, const FlowParams& params) {
  if (!(params.lambda > 0.0)) throw std::invalid_argument("Willmore bound requires lambda > 0");
  const double factor = (2.0 * params.lambda + params.c0 * params.c0) / (2.0 * params.lambda);
  return factor * penalized_energy(cache, params) - cache.willmore;
}

std::vector<double> apply_laplacian(const GeometryCache& cache, const std::vector<double>& u) {
  if (u.size() != cache.num_vertices()) throw std::invalid_argument("field size does not match vertex count");
  const Eigen::Map<const Eigen::VectorXd> uv(u.data(), static_cast<Eigen::Index>(u.size()));
  const Eigen::VectorXd lu = cache.stiffness * uv;
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = lu[static_cast<Eigen::Index>(i)] / cache.area_weight[i];
  return out;
}

VertexField flow_velocity(const GeometryCache& cache, const FlowParams& params) {
  const std::vector<double> lap_h = apply_laplacian(cache, cache.mean_curvature);
  const double c0 = params.c0;
  const double lin = params.lambda + 0.5 * c0 * c0;
  VertexField xi;
  xi.unit = "1/length^3";
  xi.values.resize(cache.num_vertices());
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double h = cache.mean_curvature[i];
    const double a0 = cache.a0sq[i];
    xi[i] = -(lap_h[i] + a0 * h - c0 * (a0 - 0.5 * h * h) - lin * h);
    if (!std::isfinite(xi[i])) {
      std::ostringstream os;
      os << "non-finite flow velocity at vertex " << i;
      throw GeometryError(os.str());
    }
  }
  return xi;
}

double velocity_l2_norm(const GeometryCache& cache, const VertexField& xi) {
  double s = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) s += xi[i] * xi[i] * cache.area_weight[i];
  return std::sqrt(s);
}

std::vector<double> helfrich_gradient_density(const GeometryCache& cache, const FlowParams& params) {
  const std::vector<double> lap_h = apply_laplacian(cache, cache.mean_curvature);
  std::vector<double> out(cache.num_vertices());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double h = cache.mean_curvature[i];
    const double d = h - params.c0;
    out[i] = 0.5 * (lap_h[i] + cache.a0sq[i] * d + 0.5 * params.c0 * h * d);
  }
  return out;
}

}  // namespace helfrich
