#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "metalens/errors.hpp"
#include "metalens/geometry.hpp"
#include "metalens/phase.hpp"

namespace metalens {

template <typename Scalar>
struct RefractionResultT {
  Eigen::Matrix<Scalar, 3, 1> direction;
  Scalar lambda;
  bool grazing = false;
};

using RefractionResult = RefractionResultT<double>;

/// Generalized Snell refraction: solves n1 e - n2 m = lambda nu + grad_phi
/// for the unit direction m with forward transmission (m . nu > 0). The
/// normal need not be unit; grad_phi must be tangential. Throws Evanescent
/// when no real forward root exists and NonTangentialPhase on a bad phase.
template <typename Scalar>
RefractionResultT<Scalar> refract(const Eigen::Matrix<Scalar, 3, 1>& incident,
                                  const Eigen::Matrix<Scalar, 3, 1>& normal,
                                  const Eigen::Matrix<Scalar, 3, 1>& grad_phi,
                                  Scalar n1, Scalar n2) {
  const Eigen::Matrix<Scalar, 3, 1> nu_hat = normal.normalized();
  if (std::abs(nu_hat.dot(grad_phi)) >
      Scalar(1e-9) * std::max(Scalar(1), grad_phi.norm()))
    throw NonTangentialPhase("refract: phase gradient has a normal component");

  const Eigen::Matrix<Scalar, 3, 1> w = n1 * incident - grad_phi;
  const Scalar a = normal.squaredNorm();
  const Scalar b = w.dot(normal);
  const Scalar disc = b * b - a * (w.squaredNorm() - n2 * n2);
  if (!(disc > 0))
    throw Evanescent("refract: no forward transmitted direction");
  // The smaller root gives m . nu = sqrt(disc)/n2 > 0.
  RefractionResultT<Scalar> r;
  r.lambda = (b - std::sqrt(disc)) / a;
  r.direction = (w - r.lambda * normal) / n2;
  return r;
}

/// Generalized Snell reflection: n1 x - n1 r = lambda nu + grad_phi with the
/// normal component of the direction reversed. Grazing rays (no normal
/// component) are returned unchanged with the grazing flag set.
template <typename Scalar>
RefractionResultT<Scalar> reflect(const Eigen::Matrix<Scalar, 3, 1>& incident,
                                  const Eigen::Matrix<Scalar, 3, 1>& normal,
                                  const Eigen::Matrix<Scalar, 3, 1>& grad_phi,
                                  Scalar n1) {
  const Eigen::Matrix<Scalar, 3, 1> nu_hat = normal.normalized();
  if (std::abs(nu_hat.dot(grad_phi)) >
      Scalar(1e-9) * std::max(Scalar(1), grad_phi.norm()))
    throw NonTangentialPhase("reflect: phase gradient has a normal component");

  const Eigen::Matrix<Scalar, 3, 1> w = n1 * incident - grad_phi;
  const Scalar a = normal.squaredNorm();
  const Scalar b = w.dot(normal);
  const Scalar disc = b * b - a * (w.squaredNorm() - n1 * n1);
  if (disc < 0)
    throw NoRealRoot("reflect: phase gradient too large for a real root");
  RefractionResultT<Scalar> r;
  const Scalar side = incident.dot(normal);
  if (side == Scalar(0) && disc == Scalar(0)) {
    r.lambda = 0;
    r.direction = incident;
    r.grazing = true;
    return r;
  }
  // Pick the root that reverses the normal component of the incidence side.
  r.lambda = (side > 0 ? b + std::sqrt(disc) : b - std::sqrt(disc)) / a;
  r.direction = (w - r.lambda * normal) / n1;
  return r;
}

/// A designed metalens ready for forward tracing: surfaces, gridded phase
/// gradients, indices, incident field and output plane z = beta.
struct Design {
  LensMode mode = LensMode::Single;
  Surface f;
  Surface g;  // double mode only
  double beta = 0;
  double n1 = 1, n2 = 1, n3 = 1;
  IncidentField field;
  PhiMap phi;
  PhaseField phase_s1;
  PhaseField phase_s2;  // double mode only
};

struct TraceResult {
  Vec2 landing;        // lateral coordinates on z = beta
  Vec3 exit_direction; // direction after the last surface
};

/// Traces the ray leaving (x, 0): refraction at S1 (and S2 in double mode)
/// with bilinearly interpolated phase gradients, then propagation to z = beta.
TraceResult trace(const Design& design, const Vec2& x);

/// Per-cell mass histogram over a grid's (nx-1) x (ny-1) cells.
struct CellHistogram {
  Grid2 grid;
  Eigen::VectorXd cell_mass;  // normalized to the surviving mass
  double kept_mass = 0;       // raw surviving mass before normalization
  double lost_mass = 0;
};

/// Bins point masses into the cells containing them; mass falling outside
/// the grid is accumulated as lost. cell_mass is renormalized to 1 when any
/// mass survives.
CellHistogram bin_points(const Points2& points, const Eigen::VectorXd& masses,
                         const Grid2& grid);

/// Cell masses of a density by corner-average quadrature, normalized.
CellHistogram bin_density(const ScalarField& density, const Grid2& grid);

/// Traces every point of the source measure and bins the landings onto the
/// target grid. Throws ExcessiveLoss when more than 1% of the mass fails to
/// land inside the grid.
CellHistogram pushforward(const Design& design, const DiscreteMeasure& source,
                          const Grid2& target_grid);

/// Same as pushforward but also returns the landing point per source point
/// (NaN rows for lost rays).
CellHistogram pushforward_with_landings(const Design& design,
                                        const DiscreteMeasure& source,
                                        const Grid2& target_grid,
                                        Points2& landings);

struct EnergyReport {
  double l1 = 0;         // total-variation distance, in [0, 1]
  double linf_cell = 0;  // max per-cell discrepancy
  double lost_mass = 0;
};

/// Compares two histograms on the same grid. Throws GridMismatch otherwise.
EnergyReport verify_energy(const CellHistogram& push,
                           const CellHistogram& target);

}  // namespace metalens
