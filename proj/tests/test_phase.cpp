#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "metalens/phase.hpp"
#include "support/oracles.hpp"

using namespace metalens;

namespace {

CostModel flat_singlet(double beta, double n2) {
  return make_single_model(Surface::constant(0.0), beta, PhiMap::identity(), 1,
                           n2);
}

Surface curved_f() {
  return Surface::analytic(
      [](const Vec2& x) { return 0.5 + 0.05 * x.x() + 0.02 * x.y() * x.y(); },
      [](const Vec2& x) { return Vec2(0.05, 0.04 * x.y()); });
}

Surface curved_g() {
  return Surface::analytic(
      [](const Vec2& y) { return 3.0 + 0.04 * y.x() * y.y(); },
      [](const Vec2& y) { return Vec2(0.04 * y.y(), 0.04 * y.x()); });
}

TransportSolution translation_solution(const CostModel& model, int nx, int ny,
                                       const Vec2& shift) {
  const Grid2 g = Grid2::uniform(nx, ny, 0, 1, 0, 1);
  const DiscreteMeasure mu = build_measure(g, [](const Vec2&) { return 1.0; });
  DiscreteMeasure nu = mu;
  nu.points.rowwise() += shift.transpose();
  const CostMatrix cm = build_cost_matrix(model, mu, nu);
  return solve_exact(cm, mu.masses, nu.masses);
}

}  // namespace

TEST_CASE("projector is the rank-one inverse and is tangential") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int k = 0; k < 100; ++k) {
    const Vec2 gh(u(rng), u(rng));
    const Mat2 P = tangent_projector(gh);
    CHECK((P * (Mat2::Identity() + gh * gh.transpose()) - Mat2::Identity())
              .norm() < 1e-12);
  }
}

TEST_CASE("singlet kernel: collimated flat case reduces to n2 D psi") {
  const CostModel m = flat_singlet(4.0, 1.5);
  const IncidentField e = IncidentField::collimated();
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const Vec2 x = oracles::random_point(rng, 0, 1);
    const Vec2 tx = oracles::random_point(rng, 0, 1);
    const Vec2 phase = phase_gradient_single(m, e, x, tx);
    const Vec2 expect = 1.5 * grad_x_cost(m, x, tx);
    CHECK((phase - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("singlet kernel: unit-translation worked example") {
  const CostModel m = flat_singlet(1.0, 1.5);
  const IncidentField e = IncidentField::collimated();
  const Vec2 x(0.2, 0.7);
  const Vec2 phase = phase_gradient_single(m, e, x, x + Vec2(1, 0));
  CHECK((phase - Vec2(-1.5 / std::sqrt(2.0), 0)).norm() < 1e-12);
}

TEST_CASE("doublet kernel: flat case gives psi = -phi, n3 term dormant") {
  const CostModel m =
      make_double_model(Surface::constant(0.0), Surface::constant(1.0),
                        PhiMap::identity(), 1.0, 1.5, 1.0);
  const IncidentField e = IncidentField::collimated();
  std::mt19937_64 rng(9);
  for (int k = 0; k < 200; ++k) {
    const Vec2 x = oracles::random_point(rng, 0, 1);
    const Vec2 tx = oracles::random_point(rng, 0, 1);
    const DoubletGradients g = phase_gradients_double(m, e, x, tx);
    CHECK((g.psi + g.phi).cwiseAbs().maxCoeff() < 1e-10);
  }
  const Vec2 x(0.5, 0.5);
  const DoubletGradients g = phase_gradients_double(m, e, x, x + Vec2(1, 0));
  CHECK((g.phi - Vec2(-1.5 / std::sqrt(2.0), 0)).norm() < 1e-12);
  CHECK((g.psi - Vec2(+1.5 / std::sqrt(2.0), 0)).norm() < 1e-12);
}

TEST_CASE("doublet kernel: both routes agree on curved surfaces") {
  const CostModel m =
      make_double_model(curved_f(), curved_g(), PhiMap::identity(), 1.0, 1.5,
                        1.1);
  const IncidentField e = IncidentField::collimated();
  std::mt19937_64 rng(11);
  for (int k = 0; k < 500; ++k) {
    const Vec2 x = oracles::random_point(rng, 0, 1);
    const Vec2 tx = oracles::random_point(rng, 0, 1);
    CHECK_NOTHROW(phase_gradients_double(m, e, x, tx));
  }
}

TEST_CASE("recover_phase_single: identity map means zero phase") {
  const CostModel m = flat_singlet(2.0, 1.5);
  const IncidentField e = IncidentField::collimated();
  const TransportSolution sol = translation_solution(m, 6, 6, Vec2(0, 0));
  const Grid2 grid = Grid2::uniform(6, 6, 0, 1, 0, 1);
  const PhaseField pf = recover_phase_single(m, e, sol, grid);
  CHECK(pf.grad2.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(pf.regrid_max_dist < 1e-12);
}

TEST_CASE("recovered fields satisfy tangentiality exactly at the nodes") {
  const CostModel m =
      make_double_model(curved_f(), curved_g(), PhiMap::identity(), 1.0, 1.5,
                        1.1);
  const IncidentField e = IncidentField::collimated();
  const TransportSolution sol = translation_solution(m, 5, 5, Vec2(0.3, 0.2));
  const Grid2 s1 = Grid2::uniform(5, 5, 0, 1, 0, 1);
  const Grid2 s2 = Grid2::uniform(5, 5, 0.3, 1.3, 0.2, 1.2);
  const auto [pf1, pf2] = recover_phases_double(m, e, sol, s1, s2);
  for (int i = 0; i < pf1.grid.size(); ++i) {
    const Vec2 gf = m.f.gradient(pf1.grid.node(i));
    CHECK(std::abs(-Vec2(pf1.grad2.row(i)).dot(gf) + pf1.grad3(i)) < 1e-12);
  }
  for (int i = 0; i < pf2.grid.size(); ++i) {
    const Vec2 gg = m.g.gradient(pf2.grid.node(i));
    CHECK(std::abs(-Vec2(pf2.grad2.row(i)).dot(gg) + pf2.grad3(i)) < 1e-12);
  }
}

TEST_CASE("recover_phases_double rejects coincident targets") {
  const CostModel m =
      make_double_model(Surface::constant(0.0), Surface::constant(2.0),
                        PhiMap::identity(), 1.0, 1.5, 1.0);
  const IncidentField e = IncidentField::collimated();
  // Two sources forced onto one target by construction.
  TransportSolution sol;
  sol.plan.setZero(2, 2);
  sol.plan(0, 0) = 0.5;
  sol.plan(1, 0) = 0.5;
  sol.mu = Eigen::VectorXd::Constant(2, 0.5);
  sol.nu = Eigen::VectorXd::Constant(2, 0.5);
  sol.row_points.resize(2, 2);
  sol.row_points << 0, 0, 1, 0;
  sol.col_points.resize(2, 2);
  sol.col_points << 0.5, 0, 0.5, 0;
  sol.map = extract_map(sol.plan);
  const Grid2 g = Grid2::uniform(2, 2, 0, 1, 0, 1);
  CHECK_THROWS_AS(recover_phases_double(m, e, sol, g, g),
                  NonInjectiveTargetSampling);
}

TEST_CASE("compose_surface_gradient chain rule") {
  const Grid2 g = Grid2::uniform(3, 3, 0, 1, 0, 1);
  PhaseField pf;
  pf.grid = g;
  pf.grad2.resize(g.size(), 2);
  pf.grad3.resize(g.size());

  // grad2 = (1,0) with slope (1,0): tangentiality gives grad3 = 1, so the
  // restricted-phase gradient doubles.
  const Surface tilt =
      Surface::analytic([](const Vec2& x) { return x.x(); },
                        [](const Vec2&) { return Vec2(1, 0); });
  for (int i = 0; i < g.size(); ++i) {
    pf.grad2.row(i) = Vec2(1, 0);
    pf.grad3(i) = 1.0;
  }
  const Points2 doubled = compose_surface_gradient(pf, tilt);
  for (int i = 0; i < g.size(); ++i)
    CHECK((Vec2(doubled.row(i)) - Vec2(2, 0)).norm() < 1e-15);

  // Flat surface: output equals grad2; zero gradient stays zero.
  for (int i = 0; i < g.size(); ++i) pf.grad3(i) = 0.0;
  const Points2 same = compose_surface_gradient(pf, Surface::constant(1.0));
  CHECK((same - pf.grad2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  pf.grad2.setZero();
  pf.grad3.setZero();
  const Points2 zero = compose_surface_gradient(pf, tilt);
  CHECK(zero.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("integrate_gradient recovers analytic potentials") {
  const Grid2 g = Grid2::uniform(32, 32, 0, 1, 0, 1);
  Points2 field(g.size(), 2);
  for (int i = 0; i < g.size(); ++i) field.row(i) = Vec2(2 * g.node(i).x(), 0);
  const IntegratedField r = integrate_gradient(field, g);
  double max_err = 0;
  double mean = 0;
  for (int i = 0; i < g.size(); ++i) mean += g.node(i).x() * g.node(i).x();
  mean /= g.size();
  for (int i = 0; i < g.size(); ++i) {
    const double want = g.node(i).x() * g.node(i).x() - mean;
    max_err = std::max(max_err, std::abs(r.scalar(i) - want));
  }
  CHECK(max_err < 1e-8);
  CHECK(std::abs(r.scalar.mean()) < 1e-12);
  CHECK(!r.curl_warning);

  Points2 zero = Points2::Zero(g.size(), 2);
  const IntegratedField rz = integrate_gradient(zero, g);
  CHECK(rz.scalar.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("integrate_gradient flags rotational fields") {
  const Grid2 g = Grid2::uniform(16, 16, -1, 1, -1, 1);
  Points2 field(g.size(), 2);
  for (int i = 0; i < g.size(); ++i)
    field.row(i) = Vec2(-g.node(i).y(), g.node(i).x());
  const IntegratedField r = integrate_gradient(field, g);
  for (int c = 0; c < r.curl_cell.size(); ++c)
    CHECK(r.curl_cell(c) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(r.curl_warning);
}

TEST_CASE("curl residual does not grow under refinement") {
  // Smooth nontrivial singlet design solved exactly at growing resolution.
  const CostModel m = flat_singlet(3.0, 1.5);
  const IncidentField e = IncidentField::collimated();
  double prev = -1;
  for (const int n : {5, 6, 8}) {
    const Grid2 g0 = Grid2::uniform(n, n, 0, 1, 0, 1);
    const DiscreteMeasure mu =
        build_measure(g0, [](const Vec2&) { return 1.0; });
    const DiscreteMeasure nu =
        build_measure(g0, [](const Vec2& y) { return 0.5 + y.x(); });
    const CostMatrix cm = build_cost_matrix(m, mu, nu);
    const TransportSolution sol = solve_exact(cm, mu.masses, nu.masses);
    PhaseField pf = recover_phase_single(m, e, sol, g0);
    integrate_phase(pf, m.f);
    const double curl_max = pf.curl_cell.cwiseAbs().maxCoeff();
    if (prev >= 0) CHECK(curl_max <= 1.1 * prev);
    prev = curl_max;
  }
}
