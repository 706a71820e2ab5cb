#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "metalens/cost.hpp"
#include "support/oracles.hpp"

using namespace metalens;

namespace {

Surface tilt_f() {
  return Surface::analytic([](const Vec2& x) { return 0.1 * x.x(); },
                           [](const Vec2&) { return Vec2(0.1, 0.0); });
}

CostModel curved_double_model() {
  const Surface f = Surface::analytic(
      [](const Vec2& x) { return 0.3 * x.x() - 0.1 * x.y() + 0.1 * x.x() * x.x(); },
      [](const Vec2& x) { return Vec2(0.3 + 0.2 * x.x(), -0.1); });
  const Surface g = Surface::analytic(
      [](const Vec2& y) {
        return 3.0 + 0.15 * y.x() + 0.25 * y.y() + 0.05 * y.y() * y.y();
      },
      [](const Vec2& y) { return Vec2(0.15, 0.25 + 0.1 * y.y()); });
  return make_double_model(f, g, PhiMap::identity(), 1.0, 1.5, 1.1);
}

}  // namespace

TEST_CASE("cost_eval closed forms") {
  const CostModel flat =
      make_single_model(Surface::constant(0.0), 4.0, PhiMap::identity(), 1, 1.5);
  CHECK(cost_eval(flat, {0, 0}, {3, 0}) == doctest::Approx(5.0));  // 3-4-5

  const CostModel sep =
      make_single_model(Surface::constant(1.0), 3.0, PhiMap::identity(), 1, 1.5);
  CHECK(cost_eval(sep, {0.7, 0.2}, {0.7, 0.2}) == doctest::Approx(2.0));

  const CostModel tilted = make_double_model(
      tilt_f(), Surface::constant(2.0), PhiMap::identity(), 1, 1.5, 1.0);
  CHECK(cost_eval(tilted, {1, 0}, {0, 0}) ==
        doctest::Approx(std::sqrt(1.9 * 1.9 + 1.0)).epsilon(1e-12));
}

TEST_CASE("grad_x_cost closed forms") {
  const CostModel flat =
      make_single_model(Surface::constant(0.0), 4.0, PhiMap::identity(), 1, 1.5);
  CHECK((grad_x_cost(flat, {0, 0}, {3, 0}) - Vec2(-0.6, 0)).norm() < 1e-14);
  CHECK(grad_x_cost(flat, {1, 1}, {1, 1}).norm() == doctest::Approx(0.0));

  const CostModel tilted = make_double_model(
      tilt_f(), Surface::constant(2.0), PhiMap::identity(), 1, 1.5, 1.0);
  const Vec2 gx = grad_x_cost(tilted, {1, 0}, {0, 0});
  CHECK(gx.x() == doctest::Approx((1 - 1.9 * 0.1) / 2.1470910553583886)
                      .epsilon(1e-9));
  CHECK(gx.y() == doctest::Approx(0.0));
}

TEST_CASE("grad_y_cost closed forms") {
  const CostModel flat =
      make_single_model(Surface::constant(0.0), 4.0, PhiMap::identity(), 1, 1.5);
  CHECK((grad_y_cost(flat, {0, 0}, {3, 0}) - Vec2(0.6, 0)).norm() < 1e-14);
  CHECK(grad_y_cost(flat, {2, 2}, {2, 2}).norm() == doctest::Approx(0.0));

  const Surface g = Surface::analytic(
      [](const Vec2& y) { return 0.2 * y.y() + 3.0; },
      [](const Vec2&) { return Vec2(0.0, 0.2); });
  const CostModel m = make_double_model(Surface::constant(0.0), g,
                                        PhiMap::identity(), 1, 1.5, 1.0);
  const Vec2 gy = grad_y_cost(m, {0, 0}, {0, 1});
  const double c = std::sqrt(3.2 * 3.2 + 1.0);
  CHECK(gy.x() == doctest::Approx(0.0));
  CHECK(gy.y() == doctest::Approx(1.64 / c).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences of the cost") {
  const CostModel m = curved_double_model();
  std::mt19937_64 rng(17);
  const double h = 1e-5 * std::sqrt(2.0);
  for (int k = 0; k < 100; ++k) {
    const Vec2 x = oracles::random_point(rng, 0, 1);
    const Vec2 y = oracles::random_point(rng, 0, 1);
    const Vec2 gx = grad_x_cost(m, x, y);
    const Vec2 gy = grad_y_cost(m, x, y);
    CHECK((gx - oracles::fd_grad_x(m, x, y, h)).norm() / gx.norm() < 1e-5);
    CHECK((gy - oracles::fd_grad_y(m, x, y, h)).norm() / gy.norm() < 1e-5);
  }
}

TEST_CASE("gradients agree with FD through a non-identity phi") {
  // Point source under a constant f: phi is a uniform dilation.
  const IncidentField p = IncidentField::point_source({0, 0, -2});
  const Grid2 grid = Grid2::uniform(8, 8, -0.5, 0.5, -0.5, 0.5);
  const Surface f = Surface::constant(1.0);
  const PhiMap phi = make_phi_map(p, f, grid);
  const CostModel m = make_single_model(f, 4.0, phi, 1, 1.5);
  std::mt19937_64 rng(23);
  for (int k = 0; k < 30; ++k) {
    const Vec2 x = oracles::random_point(rng, -0.5, 0.5);
    const Vec2 y = oracles::random_point(rng, -0.5, 0.5);
    const Vec2 gx = grad_x_cost(m, x, y);
    CHECK((gx - oracles::fd_grad_x(m, x, y, 1e-6)).norm() /
              std::max(1.0, gx.norm()) <
          1e-5);
  }
}

TEST_CASE("sm_inverse examples and random property") {
  const auto id = sm_inverse<double, 2>(Vec2(0, 0), Vec2(0, 0));
  CHECK(id.inverse == Mat2::Identity());
  CHECK(id.det == doctest::Approx(1.0));

  const auto half = sm_inverse<double, 2>(Vec2(1, 0), Vec2(1, 0));
  CHECK((half.inverse - Eigen::DiagonalMatrix<double, 2>(0.5, 1.0).toDenseMatrix())
            .norm() < 1e-15);
  CHECK(half.det == doctest::Approx(2.0));

  const Vec2 u(1, 0), v(0, 1);
  const auto nil = sm_inverse<double, 2>(u, v);
  CHECK((nil.inverse - (Mat2::Identity() - u * v.transpose())).norm() < 1e-15);
  CHECK(nil.det == doctest::Approx(1.0));

  CHECK_THROWS_AS((sm_inverse<double, 2>(Vec2(1, 0), Vec2(-1, 0))),
                  SingularUpdate);

  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> un(-2, 2);
  int checked = 0;
  while (checked < 100) {
    const Vec2 a(un(rng), un(rng)), b(un(rng), un(rng));
    if (std::abs(1 + b.dot(a)) <= 0.1) continue;
    ++checked;
    const auto r = sm_inverse<double, 2>(a, b);
    const Mat2 M = Mat2::Identity() + a * b.transpose();
    CHECK((M * r.inverse - Mat2::Identity()).norm() < 1e-12);
    CHECK(r.det == doctest::Approx(M.determinant()).epsilon(1e-12));
  }
}

TEST_CASE("mixed_hessian_det flat closed forms") {
  const CostModel flat =
      make_single_model(Surface::constant(0.0), 4.0, PhiMap::identity(), 1, 1.5);
  // x = y: c = beta, det = 1/beta^2.
  CHECK(mixed_hessian_det(flat, {1, 1}, {1, 1}) ==
        doctest::Approx(1.0 / 16.0).epsilon(1e-12));
  CHECK(mixed_hessian_det(flat, {0, 0}, {3, 0}) ==
        doctest::Approx(16.0 / 625.0).epsilon(1e-12));
}

TEST_CASE("mixed_hessian_det matches the FD determinant oracle") {
  const CostModel m = curved_double_model();
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const Vec2 x = oracles::random_point(rng, 0, 1);
    const Vec2 y = oracles::random_point(rng, 0, 1);
    const double det = mixed_hessian_det(m, x, y);
    const double fd = oracles::fd_mixed_hessian_det(m, x, y, 1e-5);
    CHECK(std::abs(det - fd) / std::abs(fd) < 1e-4);
  }
}

TEST_CASE("mixed_hessian_det picks up det J_phi") {
  // Constant-f point-source dilation: J_phi = s Id with s = 1 + h/|p3|.
  const IncidentField p = IncidentField::point_source({0, 0, -2});
  const Grid2 grid = Grid2::uniform(4, 4, -0.5, 0.5, -0.5, 0.5);
  const Surface f = Surface::constant(1.0);
  const CostModel warped =
      make_single_model(f, 4.0, make_phi_map(p, f, grid), 1, 1.5);
  const CostModel plain =
      make_single_model(f, 4.0, PhiMap::identity(), 1, 1.5);
  const Vec2 x(0.2, -0.1), y(0.3, 0.4);
  const double s = 1.5;
  CHECK(mixed_hessian_det(warped, x, y) ==
        doctest::Approx(mixed_hessian_det(plain, Vec2(s * x), y) * s * s)
            .epsilon(1e-10));
}

TEST_CASE("doublet cost is symmetric under swapping the surfaces") {
  const CostModel m = curved_double_model();
  const CostModel swapped =
      make_double_model(m.g, m.f, PhiMap::identity(), m.n1, m.n2, m.n3);
  std::mt19937_64 rng(37);
  for (int k = 0; k < 50; ++k) {
    const Vec2 x = oracles::random_point(rng, 0, 1);
    const Vec2 y = oracles::random_point(rng, 0, 1);
    CHECK(cost_eval(m, x, y) ==
          doctest::Approx(cost_eval(swapped, y, x)).epsilon(1e-13));
  }
}

TEST_CASE("cost bounds over grid pairs") {
  const CostModel m = curved_double_model();
  const Grid2 g0 = Grid2::uniform(8, 8, 0, 1, 0, 1);
  const Grid2 g1 = Grid2::uniform(8, 8, 0, 1, 0, 1);
  double m0 = 1e300, sep_max = 0, g_max = 0;
  for (int i = 0; i < g0.size(); ++i)
    for (int j = 0; j < g1.size(); ++j) {
      const double sep =
          std::abs(m.g.value(g1.node(j)) - m.f.value(g0.node(i)));
      m0 = std::min(m0, sep);
      sep_max = std::max(sep_max, sep);
      g_max = std::max(g_max, (g0.node(i) - g1.node(j)).norm());
    }
  const double hi = std::sqrt(sep_max * sep_max + g_max * g_max);
  for (int i = 0; i < g0.size(); ++i)
    for (int j = 0; j < g1.size(); ++j) {
      const double c = cost_eval(m, g0.node(i), g1.node(j));
      CHECK(c >= m0 - 1e-12);
      CHECK(c <= hi + 1e-12);
    }
}
