#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metalens/cost.hpp"
#include "metalens/geometry.hpp"

namespace metalens {

struct ConditionEntry {
  std::string name;
  double lhs = 0;
  double rhs = 0;
  double margin = 0;  // rhs - lhs; pass iff margin >= 0
  bool pass = false;
};

/// Result of the sufficient-condition checks. A failed entry means the
/// sufficient bound is not met (inconclusive), never that the underlying
/// condition is violated.
struct ConditionReport {
  BoundConstants constants;
  double beta = 0;          // single mode only
  std::vector<ConditionEntry> entries;
  double min_abs_mixed_det = 0;   // empirical corroboration sample
  bool det_sign_constant = true;  // over the sampled pairs
  bool overall() const {
    for (const ConditionEntry& e : entries)
      if (!e.pass) return false;
    return true;
  }
};

/// Extrema of the cost geometry over the grid nodes (inner approximation of
/// the continuum suprema; gradients via Surface::gradient).
BoundConstants bound_constants(const CostModel& model, const Grid2& grid0,
                               const Grid2& grid1);

/// Twist (injectivity) bounds. Single mode checks the flat-plane inequality
/// Mf^2 (beta + |f|_inf) + 2 Mf G <= M0 plus the automatic reverse direction;
/// double mode checks the four alpha-parameterized bounds.
std::vector<ConditionEntry> check_twist(const CostModel& model,
                                        const BoundConstants& k, double alpha);

/// Mixed-Hessian determinant bounds. Single mode: G Mf < min(beta - f);
/// double mode: Mf + Mg <= alpha2 and G Mf, G Mg <= alpha1 M0 under the
/// feasibility requirement 1 - alpha1 (2 + alpha2^2 + alpha1) > 0.
std::vector<ConditionEntry> check_c3(const CostModel& model,
                                     const BoundConstants& k, double alpha1,
                                     double alpha2);

/// Empirical twist corroboration: for `samples` random grid0 nodes, checks
/// that y -> grad_x c(x, y) over the grid1 nodes has no two outputs within
/// `tol`. Returns true when no collision is found.
bool twist_injectivity_sample(const CostModel& model, const Grid2& grid0,
                              const Grid2& grid1, int samples, uint64_t seed,
                              double tol = 1e-9);

struct DetSample {
  double min_abs = 0;
  bool sign_constant = true;
};

/// Samples mixed_hessian_det on an evenly thinned subset of grid pairs
/// (at most `per_side` indices per grid axis).
DetSample sample_mixed_hessian(const CostModel& model, const Grid2& grid0,
                               const Grid2& grid1, int per_side = 16);

/// Full report: constants, twist and C3 entries, and the empirical
/// determinant sample.
ConditionReport run_condition_checks(const CostModel& model,
                                     const Grid2& grid0, const Grid2& grid1,
                                     double alpha, double alpha1,
                                     double alpha2);

/// Aligned key-value rendering used by the check-conditions command.
std::string format_report(const ConditionReport& report);

}  // namespace metalens
