#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"

namespace helfrich::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitSingular = 2,
  kExitConfig = 10,
  kExitIo = 11,
  kExitSolver = 12,
  kExitValidation = 13,
  kExitInternal = 14,
};

/// Runs the flow; writes series.csv, summary.json, frames/ and checkpoints
/// under cfg.out_dir. Returns kExitSingular for singular terminations.
int cmd_flow(const RunConfig& cfg, std::ostream& log);
/// Sphere ODE from r0 = cfg.mesh.radius; writes ode.csv and summary.json.
int cmd_ode(const RunConfig& cfg, std::ostream& log);
/// Energies, bounds and identity residuals of the configured mesh; energy.json.
int cmd_energy(const RunConfig& cfg, std::ostream& log);
/// (f - scale_center) / scale with transformed parameters; rescaled.off and rescale.json.
int cmd_rescale(const RunConfig& cfg, std::ostream& log);
/// Validation suites; validate.json. Returns kExitValidation if any fails.
int cmd_validate(const RunConfig& cfg, std::ostream& log);

/// Maps the exception currently being handled to an exit code and prints
/// its message to `err`.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace helfrich::app
