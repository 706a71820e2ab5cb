#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "metalens/pipeline.hpp"

namespace {

std::string parent_dir(const std::string& path) {
  const auto p = std::filesystem::path(path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

int run_design_command(const std::string& config_path, const std::string& out,
                       std::optional<std::uint64_t> seed, bool dump_plan,
                       metalens::LensMode expected_mode) {
  metalens::DesignConfig cfg = metalens::parse_config(config_path);
  if (cfg.mode != expected_mode)
    throw metalens::ConfigError("config mode does not match the command");
  if (seed) cfg.seed = *seed;
  const metalens::DesignArtifacts art =
      metalens::run_design(cfg, out, parent_dir(config_path), dump_plan);
  std::cout << "design written to " << out << " (solver=" << art.solver_kind
            << ", total_cost=" << art.solution.total_cost
            << ", diffuse_mass=" << art.solution.map.diffuse_mass << ")\n";
  if (!art.conditions.overall())
    std::cerr << "warning: sufficient-condition checks are inconclusive; "
                 "see report.txt\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metalens: phase design by discrete optimal transport and "
               "ray-trace verification"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool dump_plan = false, dump_landings = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "design configuration file")
          ->required();
    cmd->add_option("--out", out_dir, "design output directory");
    cmd->add_option("--seed", seed, "override the config seed");
  };

  CLI::App* design_single =
      app.add_subcommand("design-single", "design a single metasurface");
  add_common(design_single, true);
  design_single->add_flag("--dump-plan", dump_plan,
                          "write the transport plan to plan.csv");

  CLI::App* design_double =
      app.add_subcommand("design-double", "design a metasurface doublet");
  add_common(design_double, true);
  design_double->add_flag("--dump-plan", dump_plan,
                          "write the transport plan to plan.csv");

  CLI::App* verify = app.add_subcommand(
      "verify", "trace rays through a written design and check the energy");
  add_common(verify, false);
  verify->add_flag("--dump-landings", dump_landings,
                   "write per-ray landing points to landings.csv");

  CLI::App* check = app.add_subcommand(
      "check-conditions", "evaluate the sufficient twist/C3 bounds");
  add_common(check, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (design_single->parsed())
      return run_design_command(config_path, out_dir, seed, dump_plan,
                                metalens::LensMode::Single);
    if (design_double->parsed())
      return run_design_command(config_path, out_dir, seed, dump_plan,
                                metalens::LensMode::Double);
    if (verify->parsed()) {
      const metalens::VerifyOutcome out =
          metalens::run_verify(out_dir, seed, dump_landings);
      std::cout << "l1=" << out.energy.l1
                << " linf_cell=" << out.energy.linf_cell
                << " lost_mass=" << out.energy.lost_mass
                << " rays=" << out.rays
                << " verdict=" << (out.pass ? "PASS" : "FAIL") << "\n";
      return out.pass ? 0 : 2;
    }
    if (check->parsed()) {
      const metalens::DesignConfig cfg = metalens::parse_config(config_path);
      std::string report;
      const int rc = metalens::run_check_conditions(
          cfg, parent_dir(config_path), report);
      std::cout << report;
      return rc;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
