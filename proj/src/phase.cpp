#include "metalens/phase.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace metalens {

Vec2 phase_gradient_single(const CostModel& model, const IncidentField& field,
                           const Vec2& x, const Vec2& tx) {
  const Vec2 xp = model.phi.map(x);
  const Vec2 gf = model.f.gradient(xp);
  const Vec3 e = field.direction(x);
  const Vec2 dpsi = grad_x_cost(model, x, tx);
  const Vec2 w = model.n2 * (model.phi.jacobian(x).inverse() * dpsi) +
                 model.n1 * e.z() * gf + model.n1 * e.head<2>();
  return tangent_projector(gf) * w;
}

DoubletGradients phase_gradients_double(const CostModel& model,
                                        const IncidentField& field,
                                        const Vec2& x, const Vec2& tx) {
  DoubletGradients out;
  out.phi = phase_gradient_single(model, field, x, tx);

  const Vec2 xp = model.phi.map(x);
  const double sep = model.g.value(tx) - model.f.value(xp);
  const Vec2 gf = model.f.gradient(xp);
  const Vec2 gg = model.g.gradient(tx);
  const double c = cost_eval(model, x, tx);
  const Mat2 proj = tangent_projector(gg);

  const Vec2 dpsi_unwarped = model.phi.jacobian(x).inverse() *
                             grad_x_cost(model, x, tx);
  const Vec2 via_dpsi =
      proj * (-model.n2 * dpsi_unwarped + model.n2 * sep * (gg - gf) / c -
              model.n3 * gg);
  const Vec2 via_dyc =
      proj * (model.n2 * grad_y_cost(model, x, tx) - model.n3 * gg);

  if ((via_dpsi - via_dyc).norm() > 1e-10)
    throw Error("doublet phase: the two routes to the second phase disagree");
  out.psi = via_dyc;
  return out;
}

namespace {

// Nearest-sample assignment of per-sample gradients onto grid nodes.
void regrid_nearest(const Points2& sample_pos, const Points2& sample_grad,
                    PhaseField& pf) {
  const int n_nodes = pf.grid.size();
  const int n_samples = static_cast<int>(sample_pos.rows());
  pf.grad2.resize(n_nodes, 2);
  pf.regrid_max_dist = 0;
  for (int i = 0; i < n_nodes; ++i) {
    const Vec2 p = pf.grid.node(i);
    int best = 0;
    double best_d2 = (Vec2(sample_pos.row(0)) - p).squaredNorm();
    for (int s = 1; s < n_samples; ++s) {
      const double d2 = (Vec2(sample_pos.row(s)) - p).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = s;
      }
    }
    pf.grad2.row(i) = sample_grad.row(best);
    pf.regrid_max_dist = std::max(pf.regrid_max_dist, std::sqrt(best_d2));
  }
}

// Normal derivative from tangentiality, re-evaluated at the node so the
// identity -P1 h1 - P2 h2 + P3 = 0 holds exactly there.
void fill_grad3(PhaseField& pf, const Surface& h) {
  const int n = pf.grid.size();
  pf.grad3.resize(n);
  for (int i = 0; i < n; ++i)
    pf.grad3(i) = Vec2(pf.grad2.row(i)).dot(h.gradient(pf.grid.node(i)));
}

std::vector<int> used_rows(const TransportSolution& sol) {
  std::vector<int> rows;
  for (int i = 0; i < static_cast<int>(sol.map.target.size()); ++i)
    if (!sol.map.diffuse[i]) rows.push_back(i);
  if (rows.empty())
    throw DiffuseRow("phase recovery: every plan row is diffuse");
  return rows;
}

}  // namespace

PhaseField recover_phase_single(const CostModel& model,
                                const IncidentField& field,
                                const TransportSolution& sol,
                                const Grid2& surface_grid) {
  const std::vector<int> rows = used_rows(sol);
  const int k = static_cast<int>(rows.size());
  Points2 pos(k, 2), grad(k, 2);
  for (int s = 0; s < k; ++s) {
    const int i = rows[s];
    const Vec2 x = sol.row_points.row(i);
    const Vec2 tx = sol.col_points.row(sol.map.target[i]);
    pos.row(s) = model.phi.map(x);
    grad.row(s) = phase_gradient_single(model, field, x, tx);
  }
  PhaseField pf;
  pf.surface = SurfaceId::S1;
  pf.grid = surface_grid;
  regrid_nearest(pos, grad, pf);
  fill_grad3(pf, model.f);
  return pf;
}

std::pair<PhaseField, PhaseField> recover_phases_double(
    const CostModel& model, const IncidentField& field,
    const TransportSolution& sol, const Grid2& s1_grid, const Grid2& s2_grid) {
  const std::vector<int> rows = used_rows(sol);
  const int k = static_cast<int>(rows.size());
  Points2 pos1(k, 2), grad1(k, 2), pos2(k, 2), grad2(k, 2);
  for (int s = 0; s < k; ++s) {
    const int i = rows[s];
    const Vec2 x = sol.row_points.row(i);
    const Vec2 tx = sol.col_points.row(sol.map.target[i]);
    const DoubletGradients g = phase_gradients_double(model, field, x, tx);
    pos1.row(s) = model.phi.map(x);
    grad1.row(s) = g.phi;
    pos2.row(s) = tx;
    grad2.row(s) = g.psi;
  }

  // The second phase lives at the image points; it would be multivalued if
  // two sources hit the same target.
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      if ((Vec2(pos2.row(a)) - Vec2(pos2.row(b))).norm() < 1e-9)
        throw NonInjectiveTargetSampling(
            "doublet phase: rows " + std::to_string(rows[a]) + " and " +
            std::to_string(rows[b]) + " map to coincident targets");

  PhaseField pf1;
  pf1.surface = SurfaceId::S1;
  pf1.grid = s1_grid;
  regrid_nearest(pos1, grad1, pf1);
  fill_grad3(pf1, model.f);

  PhaseField pf2;
  pf2.surface = SurfaceId::S2;
  pf2.grid = s2_grid;
  regrid_nearest(pos2, grad2, pf2);
  fill_grad3(pf2, model.g);
  return {std::move(pf1), std::move(pf2)};
}

Points2 compose_surface_gradient(const PhaseField& pf, const Surface& h) {
  const int n = pf.grid.size();
  Points2 out(n, 2);
  for (int i = 0; i < n; ++i) {
    const Vec2 gh = h.gradient(pf.grid.node(i));
    out.row(i) = Vec2(pf.grad2.row(i)) + pf.grad3(i) * gh;
  }
  return out;
}

namespace {

// Difference operator along grid edges divided by the step: y = A u.
// x-edges come first ((nx-1)*ny of them), then y-edges (nx*(ny-1)).
void apply_diff(const Grid2& g, const Eigen::VectorXd& u, Eigen::VectorXd& y) {
  const int nx = g.nx, ny = g.ny;
  const double inv_dx = 1.0 / g.dx(), inv_dy = 1.0 / g.dy();
  int e = 0;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix, ++e)
      y(e) = (u(g.index(ix + 1, iy)) - u(g.index(ix, iy))) * inv_dx;
  for (int iy = 0; iy + 1 < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix, ++e)
      y(e) = (u(g.index(ix, iy + 1)) - u(g.index(ix, iy))) * inv_dy;
}

void apply_diff_transpose(const Grid2& g, const Eigen::VectorXd& y,
                          Eigen::VectorXd& u) {
  const int nx = g.nx, ny = g.ny;
  const double inv_dx = 1.0 / g.dx(), inv_dy = 1.0 / g.dy();
  u.setZero();
  int e = 0;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix, ++e) {
      u(g.index(ix, iy)) -= y(e) * inv_dx;
      u(g.index(ix + 1, iy)) += y(e) * inv_dx;
    }
  for (int iy = 0; iy + 1 < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix, ++e) {
      u(g.index(ix, iy)) -= y(e) * inv_dy;
      u(g.index(ix, iy + 1)) += y(e) * inv_dy;
    }
}

}  // namespace

IntegratedField integrate_gradient(const Points2& field, const Grid2& grid) {
  const int nx = grid.nx, ny = grid.ny;
  const int n = grid.size();
  if (static_cast<int>(field.rows()) != n)
    throw std::invalid_argument("integrate_gradient: field size mismatch");
  const int n_edges = (nx - 1) * ny + nx * (ny - 1);

  // Edge targets: the field averaged over the edge endpoints.
  Eigen::VectorXd target(n_edges);
  {
    int e = 0;
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix + 1 < nx; ++ix, ++e)
        target(e) =
            0.5 * (field(grid.index(ix, iy), 0) + field(grid.index(ix + 1, iy), 0));
    for (int iy = 0; iy + 1 < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix, ++e)
        target(e) =
            0.5 * (field(grid.index(ix, iy), 1) + field(grid.index(ix, iy + 1), 1));
  }

  // Normal equations A^T A u = A^T target, CG in the zero-mean subspace.
  Eigen::VectorXd rhs(n), u = Eigen::VectorXd::Zero(n);
  apply_diff_transpose(grid, target, rhs);

  Eigen::VectorXd r = rhs, p = rhs, edge_buf(n_edges), ap(n);
  const double tol = 1e-10 * std::max(1.0, rhs.norm());
  const int max_iter = 10 * n;
  double rs = r.squaredNorm();
  int it = 0;
  for (; it < max_iter && std::sqrt(rs) > tol; ++it) {
    apply_diff(grid, p, edge_buf);
    apply_diff_transpose(grid, edge_buf, ap);
    const double alpha = rs / p.dot(ap);
    u += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  if (std::sqrt(rs) > tol)
    throw SolverDiverged("integrate_gradient: CG exceeded 10 nx ny iterations");

  IntegratedField out;
  out.scalar = u.array() - u.mean();

  // Discrete curl per cell: d1 field2 - d2 field1 from corner averages.
  out.curl_cell.resize((nx - 1) * (ny - 1));
  const double dx = grid.dx(), dy = grid.dy();
  double max_field = 0;
  for (int i = 0; i < n; ++i)
    max_field = std::max(max_field, field.row(i).norm());
  for (int iy = 0; iy + 1 < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const int a = grid.index(ix, iy), b = grid.index(ix + 1, iy);
      const int c = grid.index(ix, iy + 1), d = grid.index(ix + 1, iy + 1);
      const double d1f2 =
          (0.5 * (field(b, 1) + field(d, 1)) - 0.5 * (field(a, 1) + field(c, 1))) / dx;
      const double d2f1 =
          (0.5 * (field(c, 0) + field(d, 0)) - 0.5 * (field(a, 0) + field(b, 0))) / dy;
      out.curl_cell(iy * (nx - 1) + ix) = d1f2 - d2f1;
    }
  const double curl_max = out.curl_cell.size() > 0
                              ? out.curl_cell.array().abs().maxCoeff()
                              : 0.0;
  out.curl_warning = curl_max > 0.1 * max_field / grid.diameter();
  return out;
}

void integrate_phase(PhaseField& pf, const Surface& h) {
  const Points2 planar = compose_surface_gradient(pf, h);
  IntegratedField result = integrate_gradient(planar, pf.grid);
  pf.scalar = std::move(result.scalar);
  pf.curl_cell = std::move(result.curl_cell);
  pf.curl_warning = result.curl_warning;
}

}  // namespace metalens
