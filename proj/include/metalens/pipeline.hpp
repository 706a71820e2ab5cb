#pragma once

#include <optional>
#include <string>

#include "metalens/conditions.hpp"
#include "metalens/config.hpp"
#include "metalens/optics.hpp"
#include "metalens/ot.hpp"
#include "metalens/phase.hpp"

namespace metalens {

/// Everything assembled by a design run; the same data is persisted to the
/// output directory (phase CSVs, potentials, manifest, report).
struct DesignArtifacts {
  DesignConfig config;
  ConditionReport conditions;
  TransportSolution solution;
  Design design;
  std::string solver_kind;  // "exact" | "sinkhorn"
  double epsilon_used = 0;
};

/// Runs condition checks, solves the transport problem, recovers and
/// integrates the phases, and writes all artifacts into out_dir.
/// config_dir resolves relative csv paths named in the config.
DesignArtifacts run_design(const DesignConfig& cfg, const std::string& out_dir,
                           const std::string& config_dir, bool dump_plan);

struct VerifyOutcome {
  EnergyReport energy;
  long rays = 0;
  double l1_tol = 0;
  bool pass = false;
};

/// Loads a design manifest (never the original config), traces the
/// configured number of stratified rays and writes report.txt.
VerifyOutcome run_verify(const std::string& design_dir,
                         std::optional<std::uint64_t> seed_override,
                         bool dump_landings);

/// Reconstructs the executable Design from a manifest directory.
Design load_design(const std::string& design_dir);

/// Stratified ray positions proportional to the measure's node masses:
/// largest-remainder allocation per node, uniform placement inside each
/// node's quadrature cell, seeded PRNG.
DiscreteMeasure sample_rays(const DiscreteMeasure& nodes, const Grid2& grid,
                            long ray_count, std::uint64_t seed);

/// Builds the cost model (surfaces, phi and indices) from a config.
CostModel build_cost_model(const DesignConfig& cfg, const std::string& base_dir,
                           const Grid2& grid0);

/// check-conditions entry: renders the report; returns 0 when all entries
/// pass and 2 otherwise.
int run_check_conditions(const DesignConfig& cfg, const std::string& config_dir,
                         std::string& report_text);

}  // namespace metalens
