#include "metalens/config.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "metalens/io.hpp"

namespace metalens {

namespace {

DomainSpec read_domain(const io::Sections& raw, const std::string& sec) {
  DomainSpec d;
  d.x0 = raw.get_num(sec, "x0");
  d.x1 = raw.get_num(sec, "x1");
  d.y0 = raw.get_num(sec, "y0");
  d.y1 = raw.get_num(sec, "y1");
  d.nx = static_cast<int>(raw.get_num(sec, "nx"));
  d.ny = static_cast<int>(raw.get_num(sec, "ny"));
  return d;
}

FieldSpec read_field_spec(const io::Sections& raw, const std::string& sec) {
  FieldSpec s;
  s.kind = raw.get(sec, "kind");
  s.value = raw.get_num_or(sec, "value", s.kind == "uniform" ? 1.0 : 0.0);
  s.scale = raw.get_num_or(sec, "scale", 1.0);
  s.offset = raw.get_num_or(sec, "offset", 0.0);
  s.sigma = raw.get_num_or(sec, "sigma", 1.0);
  s.cx = raw.get_num_or(sec, "cx", 0.0);
  s.cy = raw.get_num_or(sec, "cy", 0.0);
  s.a = raw.get_num_or(sec, "a", 0.0);
  const std::string axis = raw.get_or(sec, "axis", "x");
  s.axis = axis.empty() ? 'x' : axis[0];
  s.path = raw.get_or(sec, "path", "");
  return s;
}

}  // namespace

DesignConfig config_from_sections(const io::Sections& raw) {
  const std::string& origin = raw.origin;
  DesignConfig cfg;

  const std::string mode = raw.get("pipeline", "mode");
  if (mode == "single")
    cfg.mode = LensMode::Single;
  else if (mode == "double")
    cfg.mode = LensMode::Double;
  else
    throw ConfigError(origin + ": [pipeline] mode must be single or double");
  cfg.seed = static_cast<std::uint64_t>(raw.get_num_or("pipeline", "seed", 42));

  cfg.domain0 = read_domain(raw, "domain0");
  cfg.domain1 = read_domain(raw, "domain1");
  cfg.density0 = read_field_spec(raw, "density0");
  cfg.density1 = read_field_spec(raw, "density1");
  cfg.surface_f = read_field_spec(raw, "surface_f");
  if (cfg.mode == LensMode::Double)
    cfg.surface_g = read_field_spec(raw, "surface_g");

  cfg.beta = raw.get_num("optics", "beta");
  cfg.n1 = raw.get_num("optics", "n1");
  cfg.n2 = raw.get_num("optics", "n2");
  cfg.n3 = raw.get_num_or("optics", "n3", cfg.n2);
  if (cfg.mode == LensMode::Double && !raw.has("optics", "n3"))
    throw ConfigError(origin + ": missing required field [optics] n3");

  const std::string fk = raw.get_or("field", "kind", "collimated");
  if (fk == "collimated") {
    cfg.field.collimated = true;
  } else if (fk == "point-source") {
    cfg.field.collimated = false;
    cfg.field.px = raw.get_num("field", "px");
    cfg.field.py = raw.get_num("field", "py");
    cfg.field.pz = raw.get_num("field", "pz");
  } else {
    throw ConfigError(origin +
                      ": [field] kind must be collimated or point-source");
  }

  const std::string eps = raw.get_or("solver", "epsilon", "auto");
  cfg.solver.epsilon =
      eps == "auto" ? 0.0 : raw.to_num("solver", "epsilon", eps);
  cfg.solver.max_iter =
      static_cast<int>(raw.get_num_or("solver", "max_iter", 10000));
  cfg.solver.marginal_tol = raw.get_num_or("solver", "marginal_tol", 1e-6);
  cfg.solver.exact_cap =
      static_cast<int>(raw.get_num_or("solver", "exact_cap", 64));

  cfg.conditions.alpha = raw.get_num_or("conditions", "alpha", 0.9);
  cfg.conditions.alpha1 = raw.get_num_or("conditions", "alpha1", 0.25);
  cfg.conditions.alpha2 = raw.get_num_or("conditions", "alpha2", 1.0);

  cfg.verify.ray_count =
      static_cast<long>(raw.get_num_or("verify", "ray_count", 100000));
  cfg.verify.l1_tol = raw.get_num_or("verify", "l1_tol", 0.05);

  validate_config(cfg);
  return cfg;
}

DesignConfig parse_config_text(const std::string& text,
                               const std::string& origin) {
  return config_from_sections(io::parse_sections_text(text, origin));
}

DesignConfig parse_config(const std::string& path) {
  return config_from_sections(io::parse_sections_file(path));
}

void validate_config(const DesignConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  require(cfg.domain0.nx >= 2 && cfg.domain0.ny >= 2,
          "[domain0] nx, ny must be >= 2");
  require(cfg.domain1.nx >= 2 && cfg.domain1.ny >= 2,
          "[domain1] nx, ny must be >= 2");
  require(cfg.domain0.x1 > cfg.domain0.x0 && cfg.domain0.y1 > cfg.domain0.y0,
          "[domain0] bounds are empty");
  require(cfg.domain1.x1 > cfg.domain1.x0 && cfg.domain1.y1 > cfg.domain1.y0,
          "[domain1] bounds are empty");
  require(cfg.n1 > 0 && cfg.n2 > 0 && cfg.n3 > 0,
          "[optics] refractive indices must be positive");
  require(cfg.solver.marginal_tol > 0, "[solver] marginal_tol must be > 0");
  require(cfg.solver.max_iter > 0, "[solver] max_iter must be > 0");
  require(cfg.verify.ray_count > 0, "[verify] ray_count must be > 0");
  require(cfg.verify.l1_tol > 0, "[verify] l1_tol must be > 0");
  require(cfg.conditions.alpha > 0 && cfg.conditions.alpha < 1,
          "[conditions] alpha must lie in (0, 1)");
  if (!cfg.field.collimated)
    require(cfg.field.pz < 0, "[field] pz must be negative");

  const std::set<std::string> density_kinds{"uniform", "gaussian", "ramp",
                                            "csv"};
  const std::set<std::string> surface_kinds{"constant", "gaussian", "ramp",
                                            "paraboloid", "csv"};
  require(density_kinds.count(cfg.density0.kind) > 0,
          "[density0] unknown kind '" + cfg.density0.kind + "'");
  require(density_kinds.count(cfg.density1.kind) > 0,
          "[density1] unknown kind '" + cfg.density1.kind + "'");
  require(surface_kinds.count(cfg.surface_f.kind) > 0,
          "[surface_f] unknown kind '" + cfg.surface_f.kind + "'");
  if (cfg.mode == LensMode::Double)
    require(surface_kinds.count(cfg.surface_g.kind) > 0,
            "[surface_g] unknown kind '" + cfg.surface_g.kind + "'");
}

namespace {

std::string resolve(const std::string& path, const std::string& base_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

ScalarField make_density(const FieldSpec& spec, const DomainSpec& domain,
                         const std::string& base_dir) {
  if (spec.kind == "uniform") {
    const double v = spec.value;
    return [v](const Vec2&) { return v; };
  }
  if (spec.kind == "gaussian") {
    const double s2 = 2 * spec.sigma * spec.sigma;
    const Vec2 c(spec.cx, spec.cy);
    const double scale = spec.scale, offset = spec.offset;
    return [s2, c, scale, offset](const Vec2& x) {
      return offset + scale * std::exp(-(x - c).squaredNorm() / s2);
    };
  }
  if (spec.kind == "ramp") {
    const int axis = spec.axis == 'y' ? 1 : 0;
    const double lo = axis == 0 ? domain.x0 : domain.y0;
    const double scale = spec.scale, offset = spec.offset;
    return [axis, lo, scale, offset](const Vec2& x) {
      return offset + scale * (x[axis] - lo);
    };
  }
  if (spec.kind == "csv") {
    const Surface s = Surface::load_csv(resolve(spec.path, base_dir));
    return [s](const Vec2& x) { return s.value(x); };
  }
  throw ConfigError("density: unknown kind '" + spec.kind + "'");
}

Surface make_surface(const FieldSpec& spec, const DomainSpec& domain,
                     const std::string& base_dir) {
  if (spec.kind == "constant") return Surface::constant(spec.value);
  if (spec.kind == "gaussian") {
    const double s2 = 2 * spec.sigma * spec.sigma;
    const Vec2 c(spec.cx, spec.cy);
    const double scale = spec.scale, offset = spec.offset;
    return Surface::analytic(
        [s2, c, scale, offset](const Vec2& x) {
          return offset + scale * std::exp(-(x - c).squaredNorm() / s2);
        },
        [s2, c, scale](const Vec2& x) {
          const Vec2 d = x - c;
          return Vec2(-2.0 * scale / s2 * std::exp(-d.squaredNorm() / s2) * d);
        });
  }
  if (spec.kind == "ramp") {
    const int axis = spec.axis == 'y' ? 1 : 0;
    const double lo = axis == 0 ? domain.x0 : domain.y0;
    const double scale = spec.scale, offset = spec.offset;
    return Surface::analytic(
        [axis, lo, scale, offset](const Vec2& x) {
          return offset + scale * (x[axis] - lo);
        },
        [axis, scale](const Vec2&) {
          Vec2 g = Vec2::Zero();
          g[axis] = scale;
          return g;
        });
  }
  if (spec.kind == "paraboloid") {
    const Vec2 c(spec.cx, spec.cy);
    const double a = spec.a, offset = spec.offset;
    return Surface::analytic(
        [c, a, offset](const Vec2& x) {
          return offset + a * (x - c).squaredNorm();
        },
        [c, a](const Vec2& x) { return Vec2(2 * a * (x - c)); });
  }
  if (spec.kind == "csv")
    return Surface::load_csv(resolve(spec.path, base_dir));
  throw ConfigError("surface: unknown kind '" + spec.kind + "'");
}

Grid2 make_grid(const DomainSpec& d) {
  return Grid2::uniform(d.nx, d.ny, d.x0, d.x1, d.y0, d.y1);
}

IncidentField make_field(const PointSourceSpec& spec) {
  if (spec.collimated) return IncidentField::collimated();
  return IncidentField::point_source(Vec3(spec.px, spec.py, spec.pz));
}

}  // namespace metalens
