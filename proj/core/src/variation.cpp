#include "helfrich/variation.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "local_kernels.hpp"

namespace helfrich {

namespace {

using detail::V3;

template <class T>
T face_area_t(const V3<T>& a, const V3<T>& b, const V3<T>& c) {
  return T(0.5) * detail::norm(detail::cross(b - a, c - a));
}

// -det(a, b, c) / 6 relative to `origin`; sums to the signed volume.
template <class T>
T face_volume_t(const V3<T>& a, const V3<T>& b, const V3<T>& c, const V3<T>& origin) {
  return T(-1.0 / 6.0) * detail::dot(a - origin, detail::cross(b - origin, c - origin));
}

template <class T, class PosFn>
T vertex_helfrich_t(int v, const MeshTopology& topo, const TriangleMesh& mesh, double c0, PosFn&& pos) {
  const auto g = detail::local_vertex_geometry<T>(v, topo.vertex_faces[static_cast<std::size_t>(v)], mesh.faces, pos);
  const T h = detail::local_mean_curvature(g) - c0;
  return T(0.25) * h * h * g.area;
}

bool uses_faces(Functional f) { return f == Functional::Area || f == Functional::Volume || f == Functional::Penalized; }
bool uses_vertices(Functional f) { return f == Functional::Helfrich || f == Functional::Penalized; }

template <class T>
T face_term(Functional functional, const FlowParams& params, const V3<T>& a, const V3<T>& b, const V3<T>& c,
            const V3<T>& origin) {
  switch (functional) {
    case Functional::Area: return face_area_t(a, b, c);
    case Functional::Volume: return face_volume_t(a, b, c, origin);
    case Functional::Penalized: return T(0.5 * params.lambda) * face_area_t(a, b, c);
    case Functional::Helfrich: break;
  }
  return T(0.0);
}

}  // namespace

double functional_value(const TriangleMesh& mesh, const FlowParams& params, Functional functional) {
  // Neumaier summation keeps finite differences clean down to small steps.
  double sum = 0.0, comp = 0.0;
  auto add = [&](double x) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  };
  if (uses_faces(functional)) {
    const Vec3& origin = mesh.vertices.front();
    for (const Face& f : mesh.faces) {
      const V3<double> a = detail::lift<double>(mesh.vertices[f[0]]);
      const V3<double> b = detail::lift<double>(mesh.vertices[f[1]]);
      const V3<double> c = detail::lift<double>(mesh.vertices[f[2]]);
      add(face_term<double>(functional, params, a, b, c, detail::lift<double>(origin)));
    }
  }
  if (uses_vertices(functional)) {
    const GeometryCache cache = build_cache(mesh);
    for (std::size_t i = 0; i < cache.num_vertices(); ++i) {
      const double h = cache.mean_curvature[i] - params.c0;
      add(0.25 * h * h * cache.area_weight[i]);
    }
  }
  return sum + comp;
}

double analytic_variation(const GeometryCache& cache, const FlowParams& params, Functional functional,
                          const std::vector<double>& phi) {
  if (phi.size() != cache.num_vertices()) throw GeometryError("variation field size does not match mesh");
  const std::size_t n = cache.num_vertices();
  double sum = 0.0;
  switch (functional) {
    case Functional::Area:
      for (std::size_t i = 0; i < n; ++i) sum -= cache.mean_curvature[i] * phi[i] * cache.area_weight[i];
      break;
    case Functional::Volume:
      for (std::size_t i = 0; i < n; ++i) sum -= phi[i] * cache.area_weight[i];
      break;
    case Functional::Helfrich:
    case Functional::Penalized: {
      const std::vector<double> grad = helfrich_gradient_density(cache, params);
      const double penalty = functional == Functional::Penalized ? 0.5 * params.lambda : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum += (grad[i] - penalty * cache.mean_curvature[i]) * phi[i] * cache.area_weight[i];
      }
      break;
    }
  }
  return sum;
}

double exact_directional_derivative(const TriangleMesh& mesh, const FlowParams& params, Functional functional,
                                    const std::vector<Vec3>& direction) {
  if (direction.size() != mesh.num_vertices()) throw GeometryError("direction size does not match mesh");
  using D = Dual<1>;
  auto pos = [&](int i) {
    const Vec3& p = mesh.vertices[static_cast<std::size_t>(i)];
    const Vec3& d = direction[static_cast<std::size_t>(i)];
    V3<D> out{D(p.x()), D(p.y()), D(p.z())};
    out.x.d[0] = d.x();
    out.y.d[0] = d.y();
    out.z.d[0] = d.z();
    return out;
  };
  D total(0.0);
  if (uses_faces(functional)) {
    const V3<D> origin = detail::lift<D>(mesh.vertices.front());
    for (const Face& f : mesh.faces) {
      total += face_term<D>(functional, params, pos(f[0]), pos(f[1]), pos(f[2]), origin);
    }
  }
  if (uses_vertices(functional)) {
    const MeshTopology topo = build_topology(mesh);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
      total += vertex_helfrich_t<D>(static_cast<int>(v), topo, mesh, params.c0, pos);
    }
  }
  return total.d[0];
}

std::vector<Vec3> discrete_gradient(const TriangleMesh& mesh, const FlowParams& params, Functional functional) {
  using D = Dual<3>;
  const MeshTopology topo = build_topology(mesh);
  const std::size_t n = mesh.num_vertices();
  std::vector<Vec3> grad(n, Vec3::Zero());
  const V3<D> origin = detail::lift<D>(mesh.vertices.front());
  for (std::size_t j = 0; j < n; ++j) {
    const int seed = static_cast<int>(j);
    auto pos = [&](int i) {
      V3<D> out = detail::lift<D>(mesh.vertices[static_cast<std::size_t>(i)]);
      if (i == seed) {
        out.x.d[0] = 1.0;
        out.y.d[1] = 1.0;
        out.z.d[2] = 1.0;
      }
      return out;
    };
    D local(0.0);
    if (uses_faces(functional)) {
      for (int f : topo.vertex_faces[j]) {
        const Face& t = mesh.faces[static_cast<std::size_t>(f)];
        local += face_term<D>(functional, params, pos(t[0]), pos(t[1]), pos(t[2]), origin);
      }
    }
    if (uses_vertices(functional)) {
      local += vertex_helfrich_t<D>(seed, topo, mesh, params.c0, pos);
      for (int w : topo.vertex_neighbors[j]) local += vertex_helfrich_t<D>(w, topo, mesh, params.c0, pos);
    }
    grad[j] = Vec3(local.d[0], local.d[1], local.d[2]);
  }
  return grad;
}

VertexField exact_gradient_velocity(const GeometryCache& cache, const TriangleMesh& mesh,
                                    const FlowParams& params) {
  const std::vector<Vec3> grad = discrete_gradient(mesh, params, Functional::Penalized);
  VertexField xi;
  xi.unit = "1/length^3";
  xi.values.resize(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    xi.values[i] = -2.0 * grad[i].dot(cache.normal[i]) / cache.area_weight[i];
    if (!std::isfinite(xi.values[i])) throw GeometryError("non-finite exact-gradient velocity");
  }
  return xi;
}

VariationCheck first_variation_check(const TriangleMesh& mesh, const FlowParams& params,
                                     const std::vector<double>& phi, Functional functional, double relative_step) {
  const GeometryCache cache = build_cache(mesh);
  if (phi.size() != mesh.num_vertices()) throw GeometryError("variation field size does not match mesh");
  for (double x : phi) {
    if (!std::isfinite(x)) throw GeometryError("variation field contains non-finite values");
  }
  const double h = relative_step * bounding_box_diagonal(mesh);
  double coord_scale = 0.0;
  for (const Vec3& p : mesh.vertices) coord_scale = std::max(coord_scale, p.cwiseAbs().maxCoeff());
  if (!(h > 0.0) || h < 64.0 * std::numeric_limits<double>::epsilon() * std::max(coord_scale, 1e-300)) {
    throw GeometryError("finite-difference step underflows the coordinate precision");
  }

  std::vector<Vec3> direction(mesh.num_vertices());
  for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = phi[i] * cache.normal[i];

  auto perturbed = [&](double eps) {
    TriangleMesh m = mesh;
    for (std::size_t i = 0; i < m.vertices.size(); ++i) m.vertices[i] += eps * direction[i];
    return functional_value(m, params, functional);
  };

  VariationCheck out;
  out.step = h;
  out.analytic = analytic_variation(cache, params, functional, phi);
  out.finite_difference = (perturbed(h) - perturbed(-h)) / (2.0 * h);
  out.exact_discrete = exact_directional_derivative(mesh, params, functional, direction);
  return out;
}

std::vector<double> random_smooth_field(const TriangleMesh& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 lo = mesh.vertices.front(), hi = lo;
  for (const Vec3& p : mesh.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double radius = std::max(0.5 * (hi - lo).norm(), 1e-300);
  const double a = u(rng);
  const Vec3 b(u(rng), u(rng), u(rng));
  const double c = u(rng);
  const Vec3 k = 3.0 * Vec3(u(rng), u(rng), u(rng));
  const double phase = M_PI * u(rng);
  std::vector<double> phi(mesh.num_vertices());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const Vec3 x = (mesh.vertices[i] - center) / radius;
    phi[i] = a + b.dot(x) + c * std::sin(k.dot(x) + phase);
  }
  return phi;
}

}  // namespace helfrich
