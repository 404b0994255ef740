#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "app/commands.hpp"
#include "app/config.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::string frames;
  std::vector<std::string> overrides;
  bool quiet = false;
  std::vector<std::string> suites;
  bool fast = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "Output directory");
  cmd->add_option("--override", args.overrides, "KEY=VALUE applied after the config file (repeatable)");
  cmd->add_option("--frames", args.frames, "Write blow-up frames for singular runs")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_flag("--quiet", args.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace helfrich::app;
  CLI::App app{"Helfrich flow of closed triangulated surfaces"};
  app.require_subcommand(0, 1);
  bool help_config = false;
  app.add_flag("--help-config", help_config, "List every configuration key");

  CommonArgs args;
  auto* flow = app.add_subcommand("flow", "Run the flow; writes series.csv, summary.json, frames/ and checkpoints");
  auto* ode = app.add_subcommand("ode", "Integrate the sphere radius ODE from r0 = radius");
  auto* energy = app.add_subcommand("energy", "Energies, bounds and identity residuals of a mesh");
  auto* rescale = app.add_subcommand("rescale", "Parabolic rescaling (f - center) / scale of a mesh");
  auto* validate = app.add_subcommand("validate", "Run validation suites");
  for (auto* cmd : {flow, ode, energy, rescale, validate}) add_common(cmd, args);
  validate->add_option("--suite", args.suites, "Suite name (repeatable; default all)");
  validate->add_flag("--fast", args.fast, "Coarser meshes and looser tolerances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (help_config) {
    std::cout << config_reference();
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitConfig;
  }

  try {
    std::vector<std::string> overrides = args.overrides;
    if (!args.out.empty()) overrides.push_back("out=" + args.out);
    if (!args.frames.empty()) overrides.push_back("frames=" + args.frames);
    if (!args.suites.empty()) {
      std::string joined;
      for (const std::string& s : args.suites) joined += (joined.empty() ? "" : ",") + s;
      overrides.push_back("suite=" + joined);
    }
    if (args.fast) overrides.push_back("fast=true");
    std::optional<std::filesystem::path> config;
    if (!args.config.empty()) config = args.config;
    RunConfig cfg = load_run_config(config, overrides);
    cfg.quiet = cfg.quiet || args.quiet;

    if (flow->parsed()) return cmd_flow(cfg, std::cout);
    if (ode->parsed()) return cmd_ode(cfg, std::cout);
    if (energy->parsed()) return cmd_energy(cfg, std::cout);
    if (rescale->parsed()) return cmd_rescale(cfg, std::cout);
    return cmd_validate(cfg, std::cout);
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
}
