#include "metalens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "metalens/io.hpp"

namespace metalens {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Copies csv inputs into the output directory so the manifest is
// self-contained; rewrites the spec path to the local name.
FieldSpec localize_spec(const FieldSpec& spec, const std::string& config_dir,
                        const std::string& out_dir,
                        const std::string& local_name) {
  if (spec.kind != "csv") return spec;
  fs::path src(spec.path);
  if (!src.is_absolute() && !config_dir.empty())
    src = fs::path(config_dir) / src;
  FieldSpec out = spec;
  out.path = local_name;
  fs::copy_file(src, join(out_dir, local_name),
                fs::copy_options::overwrite_existing);
  return out;
}

void write_field_spec(std::ostream& os, const std::string& section,
                      const FieldSpec& s) {
  os << "[" << section << "]\n";
  os << "kind = " << s.kind << "\n";
  if (s.kind == "csv") {
    os << "path = " << s.path << "\n";
    return;
  }
  os << "value = " << io::fmt(s.value) << "\n";
  os << "scale = " << io::fmt(s.scale) << "\n";
  os << "offset = " << io::fmt(s.offset) << "\n";
  os << "sigma = " << io::fmt(s.sigma) << "\n";
  os << "cx = " << io::fmt(s.cx) << "\n";
  os << "cy = " << io::fmt(s.cy) << "\n";
  os << "a = " << io::fmt(s.a) << "\n";
  os << "axis = " << s.axis << "\n";
}

void write_domain(std::ostream& os, const std::string& section,
                  const DomainSpec& d) {
  os << "[" << section << "]\n";
  os << "x0 = " << io::fmt(d.x0) << "\n";
  os << "x1 = " << io::fmt(d.x1) << "\n";
  os << "y0 = " << io::fmt(d.y0) << "\n";
  os << "y1 = " << io::fmt(d.y1) << "\n";
  os << "nx = " << d.nx << "\n";
  os << "ny = " << d.ny << "\n";
}

FieldSpec spec_from(const DesignConfig& cfg, SurfaceId which) {
  return which == SurfaceId::S1 ? cfg.surface_f : cfg.surface_g;
}

Grid2 s1_surface_grid(const CostModel& model, const IncidentField& field,
                      const Grid2& grid0) {
  if (field.kind() == IncidentField::Kind::Collimated) return grid0;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (int i = 0; i < grid0.size(); ++i) {
    const Vec2 p = model.phi.map(grid0.node(i));
    x0 = std::min(x0, p.x());
    x1 = std::max(x1, p.x());
    y0 = std::min(y0, p.y());
    y1 = std::max(y1, p.y());
  }
  return Grid2::uniform(grid0.nx, grid0.ny, x0, x1, y0, y1);
}

void write_potentials_csv(const std::string& path,
                          const TransportSolution& sol) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const int m = static_cast<int>(sol.potential_psi.size());
  const int n = static_cast<int>(sol.potential_psi_c.size());
  out << "# potentials m=" << m << " n=" << n << "\n";
  for (int i = 0; i < m; ++i)
    out << io::fmt(sol.row_points(i, 0)) << "," << io::fmt(sol.row_points(i, 1))
        << "," << io::fmt(sol.potential_psi(i)) << "\n";
  for (int j = 0; j < n; ++j)
    out << io::fmt(sol.col_points(j, 0)) << "," << io::fmt(sol.col_points(j, 1))
        << "," << io::fmt(sol.potential_psi_c(j)) << "\n";
}

void write_plan_csv(const std::string& path, const TransportSolution& sol) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# plan m=" << sol.plan.rows() << " n=" << sol.plan.cols() << "\n";
  for (int i = 0; i < sol.plan.rows(); ++i)
    for (int j = 0; j < sol.plan.cols(); ++j)
      if (sol.plan(i, j) > 1e-15)
        out << i << "," << j << "," << io::fmt(sol.plan(i, j)) << "\n";
}

}  // namespace

CostModel build_cost_model(const DesignConfig& cfg, const std::string& base_dir,
                           const Grid2& grid0) {
  const Surface f = make_surface(cfg.surface_f, cfg.domain0, base_dir);
  const IncidentField field = make_field(cfg.field);
  const PhiMap phi = make_phi_map(field, f, grid0);
  if (cfg.mode == LensMode::Single)
    return make_single_model(f, cfg.beta, phi, cfg.n1, cfg.n2);
  const Surface g = make_surface(cfg.surface_g, cfg.domain1, base_dir);
  return make_double_model(f, g, phi, cfg.n1, cfg.n2, cfg.n3);
}

DiscreteMeasure sample_rays(const DiscreteMeasure& nodes, const Grid2& grid,
                            long ray_count, std::uint64_t seed) {
  const int k = nodes.size();
  std::vector<long> counts(k);
  std::vector<std::pair<double, int>> remainders(k);
  long assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double share = ray_count * nodes.masses(i);
    counts[i] = static_cast<long>(std::floor(share));
    remainders[i] = {-(share - counts[i]), i};  // sort ascending = rem desc
    assigned += counts[i];
  }
  std::sort(remainders.begin(), remainders.end());
  for (long r = 0; r < ray_count - assigned; ++r)
    ++counts[remainders[r % k].second];

  long total = std::accumulate(counts.begin(), counts.end(), 0L);
  DiscreteMeasure rays;
  rays.points.resize(total, 2);
  rays.masses.resize(total);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double hx = 0.5 * grid.dx(), hy = 0.5 * grid.dy();
  long r = 0;
  for (int i = 0; i < k; ++i) {
    if (counts[i] == 0) continue;
    const Vec2 p = nodes.points.row(i);
    const double x_lo = std::max(grid.x_min, p.x() - hx);
    const double x_hi = std::min(grid.x_max, p.x() + hx);
    const double y_lo = std::max(grid.y_min, p.y() - hy);
    const double y_hi = std::min(grid.y_max, p.y() + hy);
    const double mass = nodes.masses(i) / counts[i];
    for (long c = 0; c < counts[i]; ++c, ++r) {
      rays.points(r, 0) = x_lo + uni(rng) * (x_hi - x_lo);
      rays.points(r, 1) = y_lo + uni(rng) * (y_hi - y_lo);
      rays.masses(r) = mass;
    }
  }
  return rays;
}

DesignArtifacts run_design(const DesignConfig& cfg, const std::string& out_dir,
                           const std::string& config_dir, bool dump_plan) {
  fs::create_directories(out_dir);
  DesignArtifacts art;
  art.config = cfg;

  // Localize csv inputs first so everything below reads from out_dir.
  art.config.density0 =
      localize_spec(cfg.density0, config_dir, out_dir, "density0.csv");
  art.config.density1 =
      localize_spec(cfg.density1, config_dir, out_dir, "density1.csv");
  art.config.surface_f =
      localize_spec(cfg.surface_f, config_dir, out_dir, "surface_f.csv");
  if (cfg.mode == LensMode::Double)
    art.config.surface_g =
        localize_spec(cfg.surface_g, config_dir, out_dir, "surface_g.csv");
  const DesignConfig& c = art.config;

  const Grid2 grid0 = make_grid(c.domain0);
  const Grid2 grid1 = make_grid(c.domain1);
  const CostModel model = build_cost_model(c, out_dir, grid0);
  const IncidentField field = make_field(c.field);

  // Geometry sanity over the working grids.
  double min_sep = std::numeric_limits<double>::infinity();
  double max_fv = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid0.size(); ++i) {
    const Vec2 xp = model.phi.map(grid0.node(i));
    if (std::abs(model.phi.jacobian(grid0.node(i)).determinant()) < 1e-12)
      throw Error("design: J_phi is singular at a grid node");
    max_fv = std::max(max_fv, model.f.value(xp));
    for (int j = 0; j < grid1.size(); ++j)
      min_sep = std::min(
          min_sep, model.g.value(grid1.node(j)) - model.f.value(xp));
  }
  if (!(min_sep > 0))
    throw Error("design: the surfaces are not strictly separated (min g - f = " +
                io::fmt(min_sep) + ")");
  if (cfg.mode == LensMode::Double) {
    for (int j = 0; j < grid1.size(); ++j)
      if (!(model.g.value(grid1.node(j)) < c.beta))
        throw Error("design: the output plane must lie above the second surface");
  }

  art.conditions = run_condition_checks(model, grid0, grid1, c.conditions.alpha,
                                        c.conditions.alpha1,
                                        c.conditions.alpha2);

  const DiscreteMeasure mu =
      build_measure(grid0, make_density(c.density0, c.domain0, out_dir));
  const DiscreteMeasure nu =
      build_measure(grid1, make_density(c.density1, c.domain1, out_dir));
  const CostMatrix cm = build_cost_matrix(model, mu, nu);

  if (mu.size() <= c.solver.exact_cap && nu.size() <= c.solver.exact_cap) {
    art.solution = solve_exact(cm, mu.masses, nu.masses);
    art.solver_kind = "exact";
  } else {
    SinkhornParams params;
    params.epsilon = c.solver.epsilon;
    params.max_iter = c.solver.max_iter;
    params.marginal_tol = c.solver.marginal_tol;
    art.solution = solve_sinkhorn(cm, mu.masses, nu.masses, params);
    art.solver_kind = "sinkhorn";
  }
  art.epsilon_used = art.solution.epsilon;

  // Phase recovery and integration.
  art.design.mode = c.mode;
  art.design.f = model.f;
  art.design.g = model.g;
  art.design.beta = c.beta;
  art.design.n1 = c.n1;
  art.design.n2 = c.n2;
  art.design.n3 = c.n3;
  art.design.field = field;
  art.design.phi = model.phi;
  const Grid2 s1_grid = s1_surface_grid(model, field, grid0);
  if (c.mode == LensMode::Single) {
    art.design.phase_s1 =
        recover_phase_single(model, field, art.solution, s1_grid);
    integrate_phase(art.design.phase_s1, model.f);
  } else {
    auto phases =
        recover_phases_double(model, field, art.solution, s1_grid, grid1);
    art.design.phase_s1 = std::move(phases.first);
    art.design.phase_s2 = std::move(phases.second);
    integrate_phase(art.design.phase_s1, model.f);
    integrate_phase(art.design.phase_s2, model.g);
  }

  // Artifacts.
  io::write_phase_scalar_csv(join(out_dir, "phase_s1.csv"),
                             art.design.phase_s1);
  io::write_phase_grad_csv(join(out_dir, "phase_s1_grad.csv"),
                           art.design.phase_s1);
  if (c.mode == LensMode::Double) {
    io::write_phase_scalar_csv(join(out_dir, "phase_s2.csv"),
                               art.design.phase_s2);
    io::write_phase_grad_csv(join(out_dir, "phase_s2_grad.csv"),
                             art.design.phase_s2);
  }
  write_potentials_csv(join(out_dir, "potentials.csv"), art.solution);
  if (dump_plan) write_plan_csv(join(out_dir, "plan.csv"), art.solution);

  // Manifest: echoes every resolved input plus file references and hashes;
  // verify reads only this file and what it names.
  {
    std::ostringstream os;
    os << "[pipeline]\n";
    os << "mode = " << (c.mode == LensMode::Single ? "single" : "double")
       << "\n";
    os << "seed = " << c.seed << "\n";
    write_domain(os, "domain0", c.domain0);
    write_domain(os, "domain1", c.domain1);
    write_field_spec(os, "density0", c.density0);
    write_field_spec(os, "density1", c.density1);
    write_field_spec(os, "surface_f", c.surface_f);
    if (c.mode == LensMode::Double)
      write_field_spec(os, "surface_g", c.surface_g);
    os << "[optics]\n";
    os << "beta = " << io::fmt(c.beta) << "\n";
    os << "n1 = " << io::fmt(c.n1) << "\n";
    os << "n2 = " << io::fmt(c.n2) << "\n";
    os << "n3 = " << io::fmt(c.n3) << "\n";
    os << "[field]\n";
    os << "kind = " << (c.field.collimated ? "collimated" : "point-source")
       << "\n";
    if (!c.field.collimated) {
      os << "px = " << io::fmt(c.field.px) << "\n";
      os << "py = " << io::fmt(c.field.py) << "\n";
      os << "pz = " << io::fmt(c.field.pz) << "\n";
    }
    os << "[solver]\n";
    os << "epsilon = "
       << (c.solver.epsilon > 0 ? io::fmt(c.solver.epsilon) : "auto") << "\n";
    os << "max_iter = " << c.solver.max_iter << "\n";
    os << "marginal_tol = " << io::fmt(c.solver.marginal_tol) << "\n";
    os << "exact_cap = " << c.solver.exact_cap << "\n";
    os << "[conditions]\n";
    os << "alpha = " << io::fmt(c.conditions.alpha) << "\n";
    os << "alpha1 = " << io::fmt(c.conditions.alpha1) << "\n";
    os << "alpha2 = " << io::fmt(c.conditions.alpha2) << "\n";
    os << "[verify]\n";
    os << "ray_count = " << c.verify.ray_count << "\n";
    os << "l1_tol = " << io::fmt(c.verify.l1_tol) << "\n";
    os << "[files]\n";
    os << "phase_s1_grad = phase_s1_grad.csv\n";
    if (c.mode == LensMode::Double)
      os << "phase_s2_grad = phase_s2_grad.csv\n";
    os << "[hashes]\n";
    std::vector<std::string> named = {"phase_s1.csv", "phase_s1_grad.csv",
                                      "potentials.csv"};
    if (c.mode == LensMode::Double) {
      named.push_back("phase_s2.csv");
      named.push_back("phase_s2_grad.csv");
    }
    for (const FieldSpec* s :
         {&c.density0, &c.density1, &c.surface_f, &c.surface_g})
      if (s->kind == "csv" && !s->path.empty()) named.push_back(s->path);
    std::sort(named.begin(), named.end());
    for (const std::string& name : named)
      os << name << " = " << io::file_hash_hex(join(out_dir, name)) << "\n";
    os << "[result]\n";
    os << "solver = " << art.solver_kind << "\n";
    os << "total_cost = " << io::fmt(art.solution.total_cost) << "\n";
    os << "epsilon = " << io::fmt(art.solution.epsilon) << "\n";
    os << "iterations = " << art.solution.iterations << "\n";
    os << "marginal_error = " << io::fmt(art.solution.marginal_error) << "\n";
    os << "diffuse_count = " << art.solution.map.diffuse_count << "\n";
    os << "diffuse_mass = " << io::fmt(art.solution.map.diffuse_mass) << "\n";
    os << "off_map_mass = " << io::fmt(art.solution.map.off_map_mass) << "\n";
    os << "regrid_s1 = " << io::fmt(art.design.phase_s1.regrid_max_dist)
       << "\n";
    if (c.mode == LensMode::Double)
      os << "regrid_s2 = " << io::fmt(art.design.phase_s2.regrid_max_dist)
         << "\n";
    os << "curl_warning_s1 = " << (art.design.phase_s1.curl_warning ? 1 : 0)
       << "\n";
    if (c.mode == LensMode::Double)
      os << "curl_warning_s2 = " << (art.design.phase_s2.curl_warning ? 1 : 0)
         << "\n";
    os << "conditions_pass = " << (art.conditions.overall() ? 1 : 0) << "\n";
    std::ofstream out(join(out_dir, "manifest.txt"));
    if (!out) throw Error("cannot write manifest");
    out << os.str();
  }

  // Human-oriented design summary.
  {
    std::ofstream out(join(out_dir, "report.txt"));
    out << "stage=design solver=" << art.solver_kind
        << " total_cost=" << io::fmt(art.solution.total_cost)
        << " diffuse_mass=" << io::fmt(art.solution.map.diffuse_mass)
        << " conditions=" << (art.conditions.overall() ? "PASS" : "INCONCLUSIVE")
        << "\n";
    out << format_report(art.conditions);
  }
  return art;
}

Design load_design(const std::string& design_dir) {
  const io::Sections man =
      io::parse_sections_file(join(design_dir, "manifest.txt"));
  const DesignConfig cfg = config_from_sections(man);

  // Integrity of the referenced artifacts.
  if (man.has_section("hashes"))
    for (const auto& [name, value] : man.data.at("hashes"))
      if (io::file_hash_hex(join(design_dir, name)) != value.first)
        throw Error("verify: hash mismatch for " + name);

  const Grid2 grid0 = make_grid(cfg.domain0);
  Design d;
  d.mode = cfg.mode;
  d.f = make_surface(cfg.surface_f, cfg.domain0, design_dir);
  d.beta = cfg.beta;
  d.n1 = cfg.n1;
  d.n2 = cfg.n2;
  d.n3 = cfg.n3;
  d.field = make_field(cfg.field);
  d.phi = make_phi_map(d.field, d.f, grid0);
  d.phase_s1 = io::read_phase_grad_csv(
      join(design_dir, man.get("files", "phase_s1_grad")));
  // Normal components rebuilt from tangentiality at the nodes.
  d.phase_s1.grad3.resize(d.phase_s1.grid.size());
  for (int i = 0; i < d.phase_s1.grid.size(); ++i)
    d.phase_s1.grad3(i) = Vec2(d.phase_s1.grad2.row(i))
                              .dot(d.f.gradient(d.phase_s1.grid.node(i)));
  if (cfg.mode == LensMode::Double) {
    d.g = make_surface(cfg.surface_g, cfg.domain1, design_dir);
    d.phase_s2 = io::read_phase_grad_csv(
        join(design_dir, man.get("files", "phase_s2_grad")));
    d.phase_s2.grad3.resize(d.phase_s2.grid.size());
    for (int i = 0; i < d.phase_s2.grid.size(); ++i)
      d.phase_s2.grad3(i) = Vec2(d.phase_s2.grad2.row(i))
                                .dot(d.g.gradient(d.phase_s2.grid.node(i)));
  } else {
    d.g = Surface::constant(cfg.beta);
  }
  return d;
}

VerifyOutcome run_verify(const std::string& design_dir,
                         std::optional<std::uint64_t> seed_override,
                         bool dump_landings) {
  const io::Sections man =
      io::parse_sections_file(join(design_dir, "manifest.txt"));
  const DesignConfig cfg = config_from_sections(man);
  const Design design = load_design(design_dir);
  const std::uint64_t seed = seed_override.value_or(cfg.seed);

  const Grid2 grid0 = make_grid(cfg.domain0);
  const Grid2 grid1 = make_grid(cfg.domain1);
  const ScalarField rho0 = make_density(cfg.density0, cfg.domain0, design_dir);
  const ScalarField rho1 = make_density(cfg.density1, cfg.domain1, design_dir);

  const DiscreteMeasure nodes = build_measure(grid0, rho0);
  const DiscreteMeasure rays =
      sample_rays(nodes, grid0, cfg.verify.ray_count, seed);

  Points2 landings;
  const CellHistogram push =
      pushforward_with_landings(design, rays, grid1, landings);
  const CellHistogram target = bin_density(rho1, grid1);

  VerifyOutcome out;
  out.energy = verify_energy(push, target);
  out.rays = cfg.verify.ray_count;
  out.l1_tol = cfg.verify.l1_tol;
  out.pass = out.energy.l1 <= out.l1_tol;

  {
    std::ofstream rep(join(design_dir, "report.txt"));
    rep << "l1=" << io::fmt(out.energy.l1)
        << " linf_cell=" << io::fmt(out.energy.linf_cell)
        << " lost_mass=" << io::fmt(out.energy.lost_mass)
        << " rays=" << out.rays << " verdict=" << (out.pass ? "PASS" : "FAIL")
        << "\n";
  }
  if (dump_landings) {
    std::ofstream dump(join(design_dir, "landings.csv"));
    dump << "# landings source_x,source_y,landing_x,landing_y,mass\n";
    for (int i = 0; i < rays.size(); ++i)
      dump << io::fmt(rays.points(i, 0)) << "," << io::fmt(rays.points(i, 1))
           << "," << io::fmt(landings(i, 0)) << "," << io::fmt(landings(i, 1))
           << "," << io::fmt(rays.masses(i)) << "\n";
  }
  return out;
}

int run_check_conditions(const DesignConfig& cfg, const std::string& config_dir,
                         std::string& report_text) {
  const Grid2 grid0 = make_grid(cfg.domain0);
  const Grid2 grid1 = make_grid(cfg.domain1);
  const CostModel model = build_cost_model(cfg, config_dir, grid0);
  const ConditionReport report =
      run_condition_checks(model, grid0, grid1, cfg.conditions.alpha,
                           cfg.conditions.alpha1, cfg.conditions.alpha2);
  report_text = format_report(report);
  return report.overall() ? 0 : 2;
}

}  // namespace metalens
