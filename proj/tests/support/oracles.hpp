#pragma once

// Test-only oracles: finite differences against the closed forms and
// brute-force enumeration against the exact transport solver. These must
// stay independent of the implementation paths they check.

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "metalens/cost.hpp"

namespace oracles {

using metalens::CostModel;
using metalens::Vec2;
using metalens::Vec3;

inline Vec2 fd_grad_x(const CostModel& model, const Vec2& x, const Vec2& y,
                      double h) {
  Vec2 g;
  for (int k = 0; k < 2; ++k) {
    Vec2 xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (metalens::cost_eval(model, xp, y) -
            metalens::cost_eval(model, xm, y)) /
           (2 * h);
  }
  return g;
}

inline Vec2 fd_grad_y(const CostModel& model, const Vec2& x, const Vec2& y,
                      double h) {
  Vec2 g;
  for (int k = 0; k < 2; ++k) {
    Vec2 yp = y, ym = y;
    yp[k] += h;
    ym[k] -= h;
    g[k] = (metalens::cost_eval(model, x, yp) -
            metalens::cost_eval(model, x, ym)) /
           (2 * h);
  }
  return g;
}

// det of d/dy_j [grad_x c]_i by central differences of the analytic gradient.
inline double fd_mixed_hessian_det(const CostModel& model, const Vec2& x,
                                   const Vec2& y, double h) {
  Eigen::Matrix2d M;
  for (int j = 0; j < 2; ++j) {
    Vec2 yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    M.col(j) = (metalens::grad_x_cost(model, x, yp) -
                metalens::grad_x_cost(model, x, ym)) /
               (2 * h);
  }
  return M.determinant();
}

struct BruteForceResult {
  std::vector<int> assignment;
  double total_cost = 0;
};

// Minimum-cost perfect assignment of k equal-mass points by enumerating all
// k! permutations. Cost matrix entry (i, j) is the cost of pairing i with j;
// the per-pair mass is 1/k.
inline BruteForceResult brute_force_assignment(const Eigen::MatrixXd& cost) {
  const int k = static_cast<int>(cost.rows());
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  BruteForceResult best;
  best.total_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0;
    for (int i = 0; i < k; ++i) total += cost(i, perm[i]);
    if (total < best.total_cost) {
      best.total_cost = total;
      best.assignment = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.total_cost /= k;  // equal masses 1/k
  return best;
}

inline Vec2 random_point(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng)};
}

inline Vec3 random_unit3(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Vec3 v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6) v = Vec3(n(rng), n(rng), n(rng));
  return v.normalized();
}

}  // namespace oracles
