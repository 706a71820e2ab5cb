#include "metalens/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metalens {

namespace {

// Bilinear interpolation of the per-node grad2 field, clamped to the grid.
Vec2 interp_grad2(const PhaseField& pf, const Vec2& p) {
  const Grid2& g = pf.grid;
  const double dx = g.dx(), dy = g.dy();
  int ix = static_cast<int>(std::floor((p.x() - g.x_min) / dx));
  int iy = static_cast<int>(std::floor((p.y() - g.y_min) / dy));
  ix = std::clamp(ix, 0, g.nx - 2);
  iy = std::clamp(iy, 0, g.ny - 2);
  const double sx =
      std::clamp((p.x() - (g.x_min + ix * dx)) / dx, 0.0, 1.0);
  const double sy =
      std::clamp((p.y() - (g.y_min + iy * dy)) / dy, 0.0, 1.0);
  const Vec2 v00 = pf.grad2.row(g.index(ix, iy));
  const Vec2 v10 = pf.grad2.row(g.index(ix + 1, iy));
  const Vec2 v01 = pf.grad2.row(g.index(ix, iy + 1));
  const Vec2 v11 = pf.grad2.row(g.index(ix + 1, iy + 1));
  return (1 - sx) * (1 - sy) * v00 + sx * (1 - sy) * v10 +
         (1 - sx) * sy * v01 + sx * sy * v11;
}

// Tangential 3-gradient at a surface point: the planar part interpolated,
// the normal part completed from tangentiality with the local slope.
Vec3 phase_gradient_at(const PhaseField& pf, const Surface& h, const Vec2& p) {
  const Vec2 g2 = interp_grad2(pf, p);
  const Vec2 gh = h.gradient(p);
  return {g2.x(), g2.y(), g2.dot(gh)};
}

bool inside_inflated(const Grid2& g, const Vec2& p) {
  const double mx = g.dx(), my = g.dy();
  return p.x() >= g.x_min - mx && p.x() <= g.x_max + mx &&
         p.y() >= g.y_min - my && p.y() <= g.y_max + my;
}

// Intersection parameter of the ray origin + t * dir with z = g(lateral).
double hit_surface(const Surface& g, const Vec3& origin, const Vec3& dir) {
  auto gap = [&](double t) {
    const Vec2 lateral = origin.head<2>() + t * dir.head<2>();
    return origin.z() + t * dir.z() - g.value(lateral);
  };
  if (g.is_constant()) {
    if (dir.z() <= 1e-12)
      throw MissedSurface("trace: ray does not ascend to the next surface");
    return (g.constant_value() - origin.z()) / dir.z();
  }
  if (gap(0.0) >= 0)
    throw MissedSurface("trace: ray starts above the next surface");
  double t_hi = std::max(1e-6, gap(0.0) < 0 ? -2.0 * gap(0.0) : 1.0);
  int expansions = 0;
  while (gap(t_hi) <= 0) {
    t_hi *= 2;
    if (++expansions > 60)
      throw MissedSurface("trace: ray never reaches the next surface");
  }
  double lo = 0, hi = t_hi;
  for (int it = 0; it < 100 && (hi - lo) > 1e-15 * (1 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) <= 0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const Vec2 lateral = origin.head<2>() + t * dir.head<2>();
    const double val = origin.z() + t * dir.z() - g.value(lateral);
    const double dval = dir.z() - g.gradient(lateral).dot(dir.head<2>());
    if (std::abs(dval) < 1e-14) break;
    t -= val / dval;
  }
  return t;
}

}  // namespace

TraceResult trace(const Design& design, const Vec2& x) {
  const Vec3 e = design.field.direction(x);
  const Vec2 hit1_xy = design.phi.map(x);
  const double z1 = design.f.value(hit1_xy);
  const Vec2 gf = design.f.gradient(hit1_xy);
  const Vec3 nu1(-gf.x(), -gf.y(), 1.0);
  const Vec3 grad_phi = phase_gradient_at(design.phase_s1, design.f, hit1_xy);

  const RefractionResult r1 =
      refract<double>(e, nu1, grad_phi, design.n1, design.n2);

  if (design.mode == LensMode::Single) {
    if (r1.direction.z() <= 1e-12)
      throw MissedSurface("trace: refracted ray does not reach z = beta");
    const double t = (design.beta - z1) / r1.direction.z();
    TraceResult out;
    out.landing = hit1_xy + t * r1.direction.head<2>();
    out.exit_direction = r1.direction;
    return out;
  }

  const Vec3 origin1(hit1_xy.x(), hit1_xy.y(), z1);
  const double t2 = hit_surface(design.g, origin1, r1.direction);
  const Vec2 hit2_xy = hit1_xy + t2 * r1.direction.head<2>();
  if (!inside_inflated(design.phase_s2.grid, hit2_xy))
    throw MissedSurface("trace: ray exits the working domain before S2");
  const Vec2 gg = design.g.gradient(hit2_xy);
  const Vec3 nu2(-gg.x(), -gg.y(), 1.0);
  const Vec3 grad_psi = phase_gradient_at(design.phase_s2, design.g, hit2_xy);

  const RefractionResult r2 =
      refract<double>(r1.direction, nu2, grad_psi, design.n2, design.n3);
  if (r2.direction.z() <= 1e-12)
    throw MissedSurface("trace: ray does not ascend to z = beta after S2");
  const double t3 =
      (design.beta - design.g.value(hit2_xy)) / r2.direction.z();
  TraceResult out;
  out.landing = hit2_xy + t3 * r2.direction.head<2>();
  out.exit_direction = r2.direction;
  return out;
}

CellHistogram bin_points(const Points2& points, const Eigen::VectorXd& masses,
                         const Grid2& grid) {
  CellHistogram h;
  h.grid = grid;
  h.cell_mass = Eigen::VectorXd::Zero((grid.nx - 1) * (grid.ny - 1));
  const double dx = grid.dx(), dy = grid.dy();
  for (int i = 0; i < points.rows(); ++i) {
    const double fx = (points(i, 0) - grid.x_min) / dx;
    const double fy = (points(i, 1) - grid.y_min) / dy;
    if (fx < 0 || fy < 0 || fx > grid.nx - 1 || fy > grid.ny - 1 ||
        !std::isfinite(fx) || !std::isfinite(fy)) {
      h.lost_mass += masses(i);
      continue;
    }
    const int ix = std::min(static_cast<int>(fx), grid.nx - 2);
    const int iy = std::min(static_cast<int>(fy), grid.ny - 2);
    h.cell_mass(iy * (grid.nx - 1) + ix) += masses(i);
  }
  h.kept_mass = h.cell_mass.sum();
  if (h.kept_mass > 0) h.cell_mass /= h.kept_mass;
  return h;
}

CellHistogram bin_density(const ScalarField& density, const Grid2& grid) {
  CellHistogram h;
  h.grid = grid;
  h.cell_mass.resize((grid.nx - 1) * (grid.ny - 1));
  for (int iy = 0; iy + 1 < grid.ny; ++iy)
    for (int ix = 0; ix + 1 < grid.nx; ++ix) {
      const double corner_avg =
          0.25 * (density(grid.node(grid.index(ix, iy))) +
                  density(grid.node(grid.index(ix + 1, iy))) +
                  density(grid.node(grid.index(ix, iy + 1))) +
                  density(grid.node(grid.index(ix + 1, iy + 1))));
      h.cell_mass(iy * (grid.nx - 1) + ix) = corner_avg;
    }
  const double total = h.cell_mass.sum();
  if (total <= 0) throw AllZeroDensity("bin_density: density vanishes");
  h.cell_mass /= total;
  h.kept_mass = 1.0;
  return h;
}

CellHistogram pushforward_with_landings(const Design& design,
                                        const DiscreteMeasure& source,
                                        const Grid2& target_grid,
                                        Points2& landings) {
  const int n = source.size();
  landings.resize(n, 2);
  landings.setConstant(std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < n; ++i) {
    try {
      landings.row(i) = trace(design, Vec2(source.points.row(i))).landing;
    } catch (const Evanescent&) {
    } catch (const MissedSurface&) {
    }
  }
  CellHistogram h = bin_points(landings, source.masses, target_grid);
  if (h.lost_mass > 0.01)
    throw ExcessiveLoss("pushforward: " + std::to_string(h.lost_mass * 100) +
                        "% of the source mass failed to land");
  return h;
}

CellHistogram pushforward(const Design& design, const DiscreteMeasure& source,
                          const Grid2& target_grid) {
  Points2 landings;
  return pushforward_with_landings(design, source, target_grid, landings);
}

EnergyReport verify_energy(const CellHistogram& push,
                           const CellHistogram& target) {
  if (!push.grid.same_layout(target.grid))
    throw GridMismatch("verify_energy: histograms live on different grids");
  EnergyReport r;
  const Eigen::VectorXd diff = push.cell_mass - target.cell_mass;
  r.l1 = 0.5 * diff.array().abs().sum();
  r.linf_cell = diff.array().abs().maxCoeff();
  r.lost_mass = push.lost_mass;
  return r;
}

}  // namespace metalens
