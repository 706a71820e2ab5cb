#pragma once

#include <Eigen/Dense>
#include <utility>

#include "metalens/cost.hpp"
#include "metalens/geometry.hpp"
#include "metalens/ot.hpp"

namespace metalens {

enum class SurfaceId { S1, S2 };

/// Phase-discontinuity data on a metasurface, gridded over the surface's
/// planar coordinates. grad2 holds (Phi_x1, Phi_x2), grad3 the normal
/// component fixed by tangentiality, scalar the integrated (zero-mean)
/// phase in optical-path units.
struct PhaseField {
  SurfaceId surface = SurfaceId::S1;
  Grid2 grid;
  Points2 grad2;
  Eigen::VectorXd grad3;
  Eigen::VectorXd scalar;
  Eigen::VectorXd curl_cell;  // one value per grid cell
  bool curl_warning = false;
  double regrid_max_dist = 0;  // max node-to-sample distance while regridding
};

/// Per-point kernel of the singlet phase recovery:
/// P_f (n2 J_phi^{-1} D psi + n1 e3 grad_f + n1 (e1,e2)) at phi(x), with
/// D psi = grad_x c(x, Tx).
Vec2 phase_gradient_single(const CostModel& model, const IncidentField& field,
                           const Vec2& x, const Vec2& tx);

struct DoubletGradients {
  Vec2 phi;  // at (phi(x), f(phi(x)))
  Vec2 psi;  // at (Tx, g(Tx))
};

/// Per-point doublet kernel. Computes the second phase along both algebraic
/// routes (via D psi with the separation correction, and via D_y c) and
/// verifies they agree to 1e-10.
DoubletGradients phase_gradients_double(const CostModel& model,
                                        const IncidentField& field,
                                        const Vec2& x, const Vec2& tx);

/// Recovers the singlet phase gradients from the transport solution at every
/// non-diffuse row and regrids them onto `surface_grid` by nearest sample.
PhaseField recover_phase_single(const CostModel& model,
                                const IncidentField& field,
                                const TransportSolution& sol,
                                const Grid2& surface_grid);

/// Doublet recovery: Phi regridded onto `s1_grid`, Psi onto `s2_grid`.
/// Throws NonInjectiveTargetSampling when two used rows share a target.
std::pair<PhaseField, PhaseField> recover_phases_double(
    const CostModel& model, const IncidentField& field,
    const TransportSolution& sol, const Grid2& s1_grid, const Grid2& s2_grid);

/// Planar gradient of x -> Phi(x, h(x)):
/// (Phi_x1 + Phi_x3 h_x1, Phi_x2 + Phi_x3 h_x2).
Points2 compose_surface_gradient(const PhaseField& pf, const Surface& h);

struct IntegratedField {
  Eigen::VectorXd scalar;     // zero mean
  Eigen::VectorXd curl_cell;  // discrete curl per interior cell
  bool curl_warning = false;
};

/// Least-squares potential of a node-sampled 2-vector field: discrete
/// Poisson problem with Neumann boundary, solved by conjugate gradients.
IntegratedField integrate_gradient(const Points2& field, const Grid2& grid);

/// Fills pf.scalar (and the curl diagnostics) by integrating the planar
/// gradient of the restricted phase over pf.grid.
void integrate_phase(PhaseField& pf, const Surface& h);

}  // namespace metalens
