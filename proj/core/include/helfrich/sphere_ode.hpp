#pragma once

#include <optional>
#include <string>
#include <vector>

#include "helfrich/geometry.hpp"

namespace helfrich {

/// r' = (c0 / r)(2 / r - c0) - 2 lambda / r for round spheres of radius r.
/// Throws std::invalid_argument when r <= 0.
double sphere_ode_rhs(double r, const FlowParams& params);

/// H_{c0,lambda} of the round sphere of radius r: pi (2 - c0 r)^2 + 2 pi lambda r^2.
double sphere_energy(double r, const FlowParams& params);

/// Equilibrium radius 2 c0 / (c0^2 + 2 lambda); absent unless c0 > 0.
std::optional<double> equilibrium_radius(const FlowParams& params);

enum class OdeTerminal { EquilibriumReached, Extinct, Horizon };

std::string to_string(OdeTerminal terminal);

struct SphereOdeSolution {
  /// Accepted integrator steps, starting at (0, r0).
  std::vector<double> times;
  std::vector<double> radii;
  OdeTerminal terminal = OdeTerminal::Horizon;
  /// Extinction time, or the time the equilibrium band was entered.
  double terminal_time = 0.0;

  /// Radius at time t by cubic Hermite interpolation between samples (the
  /// right-hand side supplies the slopes). Clamped to the sampled interval;
  /// after extinction the closed-form inverse is not used and 0 is returned.
  double radius_at(double t, const FlowParams& params) const;
};

struct SphereOdeOptions {
  double rtol = 1e-10;
  /// Switch to the closed-form remainder once r < switch_fraction * r0.
  double switch_fraction = 1e-3;
  std::size_t max_steps = 1'000'000;
};

/// Dormand-Prince 5(4) integration with bisection event localization for
/// extinction (r reaching switch_fraction * r0, finished in closed form) and
/// equilibrium (|r - r*| < rtol r*).
SphereOdeSolution integrate_sphere_ode(double r0, const FlowParams& params, double horizon,
                                       const SphereOdeOptions& options = {});

/// T = int_0^{r0} s^2 / ((c0^2 + 2 lambda) s - 2 c0) ds when the sphere
/// shrinks to a point (c0 < 0, or c0 = 0 with lambda > 0); absent otherwise.
std::optional<double> extinction_time_closed_form(double r0, const FlowParams& params);

struct TheoryBounds {
  std::optional<double> r_star;
  /// 4 (E0^2 - (4 pi)^2) / (pi^2 (2 lambda + c0^2)^2), for c0 < 0 and E0 > 4 pi.
  std::optional<double> t_bound;
  /// 2 lambda / (c0^2 + 2 lambda) * 8 pi and half of it.
  std::optional<double> en_threshold;
  std::optional<double> beta_upper;
  /// (2 lambda + c0^2) / (2 lambda), for lambda > 0.
  std::optional<double> willmore_ctrl_factor;
  /// Set when c0 < 0 and E0 <= 4 pi, which no embedded sphere satisfies.
  bool inconsistent_energy = false;
  std::vector<std::string> notes;
};

TheoryBounds theory_bounds(const FlowParams& params, std::optional<double> initial_energy = std::nullopt);

}  // namespace helfrich
