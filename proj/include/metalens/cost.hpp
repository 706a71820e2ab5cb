#pragma once

#include <Eigen/Dense>

#include "metalens/geometry.hpp"

namespace metalens {

enum class LensMode { Single, Double };

/// Refraction cost c(x,y) = sqrt((g(y) - f(phi(x)))^2 + |phi(x) - y|^2),
/// with g identically the output-plane height beta in single mode.
struct CostModel {
  LensMode mode = LensMode::Single;
  Surface f;
  Surface g;
  PhiMap phi;
  double n1 = 1, n2 = 1, n3 = 1;  // n3 unused in single mode

  double beta() const { return g.constant_value(); }
};

CostModel make_single_model(Surface f, double beta, PhiMap phi, double n1,
                            double n2);
CostModel make_double_model(Surface f, Surface g, PhiMap phi, double n1,
                            double n2, double n3);

/// Extrema of the cost geometry over the working grids.
struct BoundConstants {
  double G = 0;    // max |phi(x) - y|
  double M0 = 0;   // min |f(phi(x)) - g(y)|
  double Mf = 0;   // sup |grad f| over phi(grid0)
  double Mg = 0;   // sup |grad g| over grid1
  double f_inf = 0;  // sup |f| over phi(grid0)
};

double cost_eval(const CostModel& model, const Vec2& x, const Vec2& y);
Vec2 grad_x_cost(const CostModel& model, const Vec2& x, const Vec2& y);
Vec2 grad_y_cost(const CostModel& model, const Vec2& x, const Vec2& y);

/// det of the mixed second-derivative matrix of the composed cost,
/// via the rank-one structure of d^2c'/dxdy and det J_phi.
double mixed_hessian_det(const CostModel& model, const Vec2& x, const Vec2& y);

template <typename Scalar, int N>
struct RankOneUpdate {
  Eigen::Matrix<Scalar, N, N> inverse;  // (Id + u v^T)^{-1}
  Scalar det;                           // det(Id + u v^T) = 1 + v.u
};

/// Sherman-Morrison inverse and determinant of Id + u v^T.
template <typename Scalar, int N>
RankOneUpdate<Scalar, N> sm_inverse(const Eigen::Matrix<Scalar, N, 1>& u,
                                    const Eigen::Matrix<Scalar, N, 1>& v) {
  const Scalar d = Scalar(1) + v.dot(u);
  if (std::abs(d) < Scalar(1e-12))
    throw SingularUpdate("rank-one update is singular: 1 + v.u ~ 0");
  RankOneUpdate<Scalar, N> r;
  r.inverse = Eigen::Matrix<Scalar, N, N>::Identity() - (u * v.transpose()) / d;
  r.det = d;
  return r;
}

/// Projector Id - grad_h grad_h^T / (1 + |grad_h|^2), i.e. the
/// Sherman-Morrison inverse of Id + grad_h grad_h^T.
inline Mat2 tangent_projector(const Vec2& grad_h) {
  return sm_inverse<double, 2>(grad_h, grad_h).inverse;
}

}  // namespace metalens
