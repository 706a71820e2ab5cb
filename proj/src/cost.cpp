#include "metalens/cost.hpp"

#include <cmath>
#include <utility>

namespace metalens {

CostModel make_single_model(Surface f, double beta, PhiMap phi, double n1,
                            double n2) {
  CostModel m;
  m.mode = LensMode::Single;
  m.f = std::move(f);
  m.g = Surface::constant(beta);
  m.phi = std::move(phi);
  m.n1 = n1;
  m.n2 = n2;
  m.n3 = n2;
  return m;
}

CostModel make_double_model(Surface f, Surface g, PhiMap phi, double n1,
                            double n2, double n3) {
  CostModel m;
  m.mode = LensMode::Double;
  m.f = std::move(f);
  m.g = std::move(g);
  m.phi = std::move(phi);
  m.n1 = n1;
  m.n2 = n2;
  m.n3 = n3;
  return m;
}

double cost_eval(const CostModel& model, const Vec2& x, const Vec2& y) {
  const Vec2 xp = model.phi.map(x);
  const double dz = model.g.value(y) - model.f.value(xp);
  return std::sqrt(dz * dz + (xp - y).squaredNorm());
}

Vec2 grad_x_cost(const CostModel& model, const Vec2& x, const Vec2& y) {
  const Vec2 xp = model.phi.map(x);
  const double sep = model.g.value(y) - model.f.value(xp);
  const Vec2 gf = model.f.gradient(xp);
  const double c = std::sqrt(sep * sep + (xp - y).squaredNorm());
  const Vec2 inner = (xp - y - sep * gf) / c;
  return model.phi.jacobian(x) * inner;
}

Vec2 grad_y_cost(const CostModel& model, const Vec2& x, const Vec2& y) {
  const Vec2 xp = model.phi.map(x);
  const double sep = model.g.value(y) - model.f.value(xp);
  const Vec2 gg = model.g.gradient(y);
  const double c = std::sqrt(sep * sep + (xp - y).squaredNorm());
  return (y - xp + sep * gg) / c;
}

double mixed_hessian_det(const CostModel& model, const Vec2& x, const Vec2& y) {
  const Vec2 xp = model.phi.map(x);
  const double fx = model.f.value(xp);
  const double gy = model.g.value(y);
  const Vec2 gf = model.f.gradient(xp);
  const Vec2 gg = model.g.gradient(y);
  const double c = std::sqrt((gy - fx) * (gy - fx) + (xp - y).squaredNorm());

  const double d = 1.0 + gg.dot(gf);
  if (std::abs(d) < 1e-12)
    throw SingularA("mixed Hessian: 1 + grad_g . grad_f ~ 0");

  // d^2c'/dxdy = (-1/c)(A + u v^T) with A = Id + grad_g grad_f^T; the
  // determinant lemma gives det(A + u v^T) = (1 + v^T A^{-1} u) det A.
  const Vec2 u = ((fx - gy) * gg + xp - y) / c;
  const Vec2 v = ((gy - fx) * gf + y - xp) / c;
  const double scalar = 1.0 + u.dot(v) - (v.dot(gg)) * (gf.dot(u)) / d;

  const double inner = (1.0 / (c * c)) * d * scalar;  // (-1/c)^n with n = 2
  return inner * model.phi.jacobian(x).determinant();
}

}  // namespace metalens
