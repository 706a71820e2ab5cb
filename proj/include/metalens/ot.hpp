#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metalens/cost.hpp"
#include "metalens/geometry.hpp"

namespace metalens {

/// Pairwise cost table between two point clouds.
struct CostMatrix {
  Eigen::MatrixXd entries;  // m x n
  Points2 row_points;
  Points2 col_points;

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
};

CostMatrix build_cost_matrix(const CostModel& model, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu);

/// Deterministic map extracted from a coupling: per row, the argmax-mass
/// column (lowest index on ties). A row is flagged diffuse when the argmax
/// carries less than 90% of the row mass.
struct MapExtract {
  std::vector<int> target;
  std::vector<char> diffuse;
  double diffuse_mass = 0;   // total mass of diffuse-flagged rows
  double off_map_mass = 0;   // sum_i mu_i (1 - argmax share)
  int diffuse_count = 0;
};

MapExtract extract_map(const Eigen::MatrixXd& plan);

struct TransportSolution {
  Eigen::MatrixXd plan;  // m x n, nonnegative
  Eigen::VectorXd mu, nu;
  Points2 row_points, col_points;
  Eigen::VectorXd potential_psi;    // on rows, c-concave after tightening
  Eigen::VectorXd potential_psi_c;  // on columns, its c-transform
  double total_cost = 0;
  MapExtract map;
  double marginal_error = 0;  // L1, before rounding (0 for exact solves)
  double epsilon = 0;         // final entropic regularization (0 for exact)
  int iterations = 0;
};

/// Exact optimum by the transportation simplex. Sizes capped at 64 per side.
TransportSolution solve_exact(const CostMatrix& cost,
                              const Eigen::VectorXd& mu,
                              const Eigen::VectorXd& nu);

struct SinkhornParams {
  double epsilon = 0;  // target regularization; <= 0 selects 1e-3 * mean cost
  int max_iter = 10000;  // per epsilon level
  double marginal_tol = 1e-6;  // L1 marginal violation
};

/// Log-domain Sinkhorn with an epsilon-halving schedule starting at
/// 0.1 * mean(cost); the returned plan is rounded to the exact marginals.
TransportSolution solve_sinkhorn(const CostMatrix& cost,
                                 const Eigen::VectorXd& mu,
                                 const Eigen::VectorXd& nu,
                                 const SinkhornParams& params = {});

/// Gradient of the dual potential at source point `row`:
/// grad psi(x_i) = grad_x c(x_i, T x_i). Throws DiffuseRow when the plan row
/// is not concentrated.
Vec2 potential_gradient(const CostModel& model, const TransportSolution& sol,
                        int row);

}  // namespace metalens
