#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "metalens/cost.hpp"
#include "metalens/geometry.hpp"

namespace metalens {

struct DomainSpec {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  int nx = 2, ny = 2;
};

/// Analytic catalog entry or CSV reference for densities and surfaces.
/// kinds: uniform | constant | gaussian | ramp | paraboloid | csv.
struct FieldSpec {
  std::string kind;
  double value = 1;    // constant height / uniform level
  double scale = 1;    // gaussian amplitude, ramp slope
  double offset = 0;   // additive base for analytic surfaces
  double sigma = 1;    // gaussian width
  double cx = 0, cy = 0;  // gaussian / paraboloid center
  double a = 0;        // paraboloid curvature
  char axis = 'x';     // ramp axis
  std::string path;    // csv
};

struct PointSourceSpec {
  bool collimated = true;
  double px = 0, py = 0, pz = -1;
};

struct SolverSpec {
  double epsilon = 0;  // <= 0: auto (1e-3 * mean cost)
  int max_iter = 10000;
  double marginal_tol = 1e-6;
  int exact_cap = 64;
};

struct ConditionSpec {
  double alpha = 0.9;
  double alpha1 = 0.25;
  double alpha2 = 1.0;
};

struct VerifySpec {
  long ray_count = 100000;
  double l1_tol = 0.05;
};

struct DesignConfig {
  LensMode mode = LensMode::Single;
  std::uint64_t seed = 42;
  DomainSpec domain0, domain1;
  FieldSpec density0, density1;
  FieldSpec surface_f, surface_g;
  double beta = 0;
  double n1 = 1, n2 = 1, n3 = 1;
  PointSourceSpec field;
  SolverSpec solver;
  ConditionSpec conditions;
  VerifySpec verify;
};

/// Parses the sectioned key-value format ([section] headers, key = value,
/// '#' comments). Throws ConfigError with line/field diagnostics.
DesignConfig parse_config(const std::string& path);
DesignConfig parse_config_text(const std::string& text,
                               const std::string& origin = "<string>");

namespace io {
struct Sections;
}
/// Builds a config from already-parsed sections (also used for manifests,
/// which embed the same sections).
DesignConfig config_from_sections(const io::Sections& raw);

/// Semantic validation beyond parsing (mode-consistent fields, positive
/// tolerances, resolutions >= 2). Throws ConfigError naming the field.
void validate_config(const DesignConfig& cfg);

/// Materializations of the specs. `base_dir` resolves relative csv paths.
ScalarField make_density(const FieldSpec& spec, const DomainSpec& domain,
                         const std::string& base_dir);
Surface make_surface(const FieldSpec& spec, const DomainSpec& domain,
                     const std::string& base_dir);
Grid2 make_grid(const DomainSpec& domain);
IncidentField make_field(const PointSourceSpec& spec);

}  // namespace metalens
