#include "helfrich/sphere_ode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace helfrich {

double sphere_ode_rhs(double r, const FlowParams& params) {
  if (!(r > 0.0)) throw std::invalid_argument("sphere_ode_rhs: radius must be positive");
  return (params.c0 / r) * (2.0 / r - params.c0) - 2.0 * params.lambda / r;
}

double sphere_energy(double r, const FlowParams& params) {
  const double a = 2.0 - params.c0 * r;
  return M_PI * a * a + 2.0 * M_PI * params.lambda * r * r;
}

std::optional<double> equilibrium_radius(const FlowParams& params) {
  if (!(params.c0 > 0.0)) return std::nullopt;
  return 2.0 * params.c0 / (params.c0 * params.c0 + 2.0 * params.lambda);
}

std::string to_string(OdeTerminal terminal) {
  switch (terminal) {
    case OdeTerminal::EquilibriumReached: return "equilibrium_reached";
    case OdeTerminal::Extinct: return "extinct";
    case OdeTerminal::Horizon: return "horizon";
  }
  return "unknown";
}

std::optional<double> extinction_time_closed_form(double r0, const FlowParams& params) {
  if (!(r0 > 0.0)) throw std::invalid_argument("extinction_time_closed_form: r0 must be positive");
  const double kappa = params.c0 * params.c0 + 2.0 * params.lambda;
  if (params.c0 > 0.0 || !(kappa > 0.0)) return std::nullopt;
  const double b = -2.0 * params.c0;
  if (b == 0.0) return r0 * r0 / (2.0 * kappa);
  // With x = kappa s / b the integral is (b^2 / kappa^3) g(X),
  // g(X) = X^2/2 - X + log(1 + X) = sum_{k>=3} (-1)^(k+1) X^k / k.
  const double x = kappa * r0 / b;
  double g = 0.0;
  if (x < 0.05) {
    double term = x * x * x;
    for (int k = 3; k < 40; ++k) {
      const double add = (k % 2 == 1 ? 1.0 : -1.0) * term / k;
      g += add;
      if (std::abs(add) < 1e-18 * std::abs(g)) break;
      term *= x;
    }
  } else {
    g = 0.5 * x * x - x + std::log1p(x);
  }
  return b * b / (kappa * kappa * kappa) * g;
}

double SphereOdeSolution::radius_at(double t, const FlowParams& params) const {
  if (times.empty()) return 0.0;
  if (t <= times.front()) return radii.front();
  if (t >= times.back()) {
    if (terminal == OdeTerminal::Extinct && t >= terminal_time) return 0.0;
    if (terminal == OdeTerminal::Extinct) {
      // Between the switch point and extinction: invert the closed form.
      const double target = terminal_time - t;
      double lo = 0.0, hi = radii.back();
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (*extinction_time_closed_form(mid, params) < target) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      return 0.5 * (lo + hi);
    }
    return radii.back();
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times.begin());
  const std::size_t i = j - 1;
  const double h = times[j] - times[i];
  const double s = (t - times[i]) / h;
  const double y0 = radii[i], y1 = radii[j];
  const double m0 = sphere_ode_rhs(y0, params) * h, m1 = sphere_ode_rhs(y1, params) * h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1;
}

namespace {

struct RkStep {
  double y5;
  double err;
};

// Dormand-Prince 5(4) tableau.
RkStep dopri_step(double y, double h, const FlowParams& p) {
  auto f = [&](double r) { return sphere_ode_rhs(r, p); };
  const double k1 = f(y);
  const double k2 = f(y + h * (1.0 / 5.0) * k1);
  const double k3 = f(y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
  const double k4 = f(y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
  const double k5 =
      f(y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
  const double k6 = f(y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 +
                               49.0 / 176.0 * k4 - 5103.0 / 18656.0 * k5));
  const double y5 = y + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5 +
                             11.0 / 84.0 * k6);
  const double k7 = f(y5);
  const double y4 = y + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4 -
                             92097.0 / 339200.0 * k5 + 187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);
  return {y5, std::abs(y5 - y4)};
}

// Stages evaluate the right-hand side at intermediate radii; a step that
// would pass through r <= 0 is reported as failed.
bool try_step(double y, double h, const FlowParams& p, RkStep& out) {
  try {
    out = dopri_step(y, h, p);
    return std::isfinite(out.y5) && out.y5 > 0.0;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

}  // namespace

SphereOdeSolution integrate_sphere_ode(double r0, const FlowParams& params, double horizon,
                                       const SphereOdeOptions& options) {
  if (!(r0 > 0.0)) throw std::invalid_argument("integrate_sphere_ode: r0 must be positive");
  if (!(horizon >= 0.0)) throw std::invalid_argument("integrate_sphere_ode: horizon must be non-negative");
  params.validate();

  SphereOdeSolution sol;
  sol.times.push_back(0.0);
  sol.radii.push_back(r0);

  const std::optional<double> r_star = equilibrium_radius(params);
  auto at_equilibrium = [&](double r) {
    if (r_star) return std::abs(r - *r_star) < options.rtol * *r_star;
    return sphere_ode_rhs(r, params) == 0.0;
  };
  if (at_equilibrium(r0)) {
    sol.terminal = OdeTerminal::EquilibriumReached;
    return sol;
  }

  const double r_switch = options.switch_fraction * r0;
  const double atol = options.rtol * r0 * options.switch_fraction;
  double t = 0.0, r = r0;
  double h = std::min(1e-3 * r0 * r0 * r0 * r0, horizon > 0.0 ? horizon : 1.0);
  if (std::abs(sphere_ode_rhs(r0, params)) > 0.0) {
    h = std::min(h, 1e-3 * r0 / std::abs(sphere_ode_rhs(r0, params)));
  }

  for (std::size_t n = 0; n < options.max_steps; ++n) {
    if (t >= horizon) {
      sol.terminal = OdeTerminal::Horizon;
      sol.terminal_time = t;
      return sol;
    }
    h = std::min(h, horizon - t);
    RkStep st{};
    if (!try_step(r, h, params, st)) {
      h *= 0.25;
      continue;
    }
    const double scale = atol + options.rtol * std::max(std::abs(r), std::abs(st.y5));
    const double ratio = st.err / scale;
    if (ratio > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(ratio, -0.2));
      continue;
    }

    // Extinction event: bisect the step fraction where r crosses r_switch.
    if (st.y5 <= r_switch) {
      double lo = 0.0, hi = 1.0;
      for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
        const double mid = 0.5 * (lo + hi);
        RkStep part{};
        if (try_step(r, mid * h, params, part) && part.y5 > r_switch) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      RkStep part{};
      try_step(r, lo * h, params, part);
      const double t_switch = t + lo * h;
      const double r_at = lo > 0.0 ? part.y5 : r;
      sol.times.push_back(t_switch);
      sol.radii.push_back(r_at);
      sol.terminal = OdeTerminal::Extinct;
      sol.terminal_time = t_switch + extinction_time_closed_form(r_at, params).value_or(0.0);
      return sol;
    }

    // Equilibrium event: entering the band |r - r*| < rtol r*.
    if (at_equilibrium(st.y5)) {
      double lo = 0.0, hi = 1.0;
      for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
        const double mid = 0.5 * (lo + hi);
        RkStep part{};
        if (try_step(r, mid * h, params, part) && !at_equilibrium(part.y5)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      RkStep part{};
      try_step(r, hi * h, params, part);
      sol.times.push_back(t + hi * h);
      sol.radii.push_back(part.y5);
      sol.terminal = OdeTerminal::EquilibriumReached;
      sol.terminal_time = t + hi * h;
      return sol;
    }

    t += h;
    r = st.y5;
    sol.times.push_back(t);
    sol.radii.push_back(r);
    const double grow = ratio > 0.0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
    h *= std::clamp(grow, 0.2, 5.0);
  }
  throw std::runtime_error("integrate_sphere_ode: step budget exhausted");
}

TheoryBounds theory_bounds(const FlowParams& params, std::optional<double> initial_energy) {
  params.validate();
  TheoryBounds b;
  const double c0 = params.c0, lambda = params.lambda;
  const double kappa = c0 * c0 + 2.0 * lambda;
  b.r_star = equilibrium_radius(params);
  if (kappa > 0.0) {
    b.en_threshold = 2.0 * lambda / kappa * 8.0 * M_PI;
    b.beta_upper = 2.0 * lambda / kappa * 4.0 * M_PI;
  } else {
    b.notes.push_back("c0 = lambda = 0: energy threshold undefined");
  }
  if (lambda > 0.0) {
    b.willmore_ctrl_factor = (2.0 * lambda + c0 * c0) / (2.0 * lambda);
  } else {
    b.notes.push_back("lambda = 0: Willmore control factor undefined");
  }
  if (c0 < 0.0) {
    if (!initial_energy) {
      b.notes.push_back("T_bound needs the initial energy");
    } else if (*initial_energy <= 4.0 * M_PI) {
      b.inconsistent_energy = true;
      b.notes.push_back("E0 <= 4 pi with c0 < 0 is impossible for an embedded sphere");
    } else {
      const double e = *initial_energy;
      const double q = 2.0 * lambda + c0 * c0;
      b.t_bound = 4.0 * (e * e - 16.0 * M_PI * M_PI) / (M_PI * M_PI * q * q);
    }
  }
  return b;
}

}  // namespace helfrich
