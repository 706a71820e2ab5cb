#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "metalens/optics.hpp"
#include "support/oracles.hpp"

using namespace metalens;

namespace {

// A random tangential phase gradient with respect to nu, scaled so that a
// forward transmitted root exists.
Vec3 random_tangential(std::mt19937_64& rng, const Vec3& nu, double scale) {
  const Vec3 raw = oracles::random_unit3(rng);
  const Vec3 nu_hat = nu.normalized();
  Vec3 t = raw - raw.dot(nu_hat) * nu_hat;
  if (t.norm() < 1e-8) return Vec3::Zero();
  return scale * t.normalized();
}

PhaseField constant_phase_field(const Grid2& grid, const Vec2& grad,
                                const Surface& h) {
  PhaseField pf;
  pf.grid = grid;
  pf.grad2.resize(grid.size(), 2);
  pf.grad3.resize(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    pf.grad2.row(i) = grad;
    pf.grad3(i) = grad.dot(h.gradient(grid.node(i)));
  }
  return pf;
}

}  // namespace

TEST_CASE("refract: matched media and zero phase is the identity") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    Vec3 e = oracles::random_unit3(rng);
    e.z() = std::abs(e.z()) + 0.1;
    e.normalize();
    const Vec3 nu(0.3 * (k % 5) - 0.6, 0.1, 1.0);
    if (e.dot(nu) <= 0.05) continue;
    const auto r = refract<double>(e, nu, Vec3::Zero(), 1.4, 1.4);
    CHECK((r.direction - e).norm() < 1e-12);
  }
}

TEST_CASE("refract: classical Snell bending") {
  const Vec3 e(0.5, 0, std::sqrt(3.0) / 2);
  const auto r = refract<double>(e, Vec3(0, 0, 1), Vec3::Zero(), 1.0, 1.5);
  CHECK(r.direction.x() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.direction.y() == doctest::Approx(0.0));
  CHECK(r.direction.z() ==
        doctest::Approx(std::sqrt(8.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("refract: total internal reflection is evanescent") {
  const double s = 0.9;
  const Vec3 e(s, 0, std::sqrt(1 - s * s));
  CHECK_THROWS_AS(refract<double>(e, Vec3(0, 0, 1), Vec3::Zero(), 1.5, 1.0),
                  Evanescent);
}

TEST_CASE("refract: non-tangential phase is rejected") {
  CHECK_THROWS_AS(refract<double>(Vec3(0, 0, 1), Vec3(0, 0, 1),
                                  Vec3(0, 0, 0.5), 1.0, 1.5),
                  NonTangentialPhase);
}

TEST_CASE("GSL residual is normal over random valid inputs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> un(1.0, 2.0);
  std::uniform_real_distribution<double> us(-0.6, 0.6);
  int done = 0;
  while (done < 1000) {
    Vec3 e = oracles::random_unit3(rng);
    e.z() = std::abs(e.z()) + 0.05;
    e.normalize();
    const Vec3 nu(us(rng), us(rng), 1.0);
    const double n1 = un(rng), n2 = un(rng);
    const Vec3 gp = random_tangential(rng, nu, 0.3 * std::min(n1, n2));
    try {
      const auto r = refract<double>(e, nu, gp, n1, n2);
      const Vec3 resid = n1 * e - n2 * r.direction - gp;
      const Vec3 nu_hat = nu.normalized();
      CHECK((resid - resid.dot(nu_hat) * nu_hat).norm() < 1e-10);
      CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
      CHECK(r.direction.dot(nu) > 0);
      // Classical reduction: tangential momentum balance when the phase is off.
      const auto r0 = refract<double>(e, nu, Vec3::Zero(), n1, n2);
      const Vec3 et = e - e.dot(nu_hat) * nu_hat;
      const Vec3 mt = r0.direction - r0.direction.dot(nu_hat) * nu_hat;
      CHECK(std::abs(n1 * et.norm() - n2 * mt.norm()) < 1e-12);
      ++done;
    } catch (const Evanescent&) {
      // resample
    }
  }
}

TEST_CASE("reflect: mirror law, tangential phase, reciprocity, grazing") {
  const Vec3 e(0.3, -0.2, 0.8);
  const auto mirror = reflect<double>(e.normalized(), Vec3(0, 0, 1),
                                      Vec3::Zero(), 1.0);
  CHECK((mirror.direction - Vec3(0.3, -0.2, -0.8).normalized()).norm() <
        1e-12);

  const auto grazing =
      reflect<double>(Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3::Zero(), 1.0);
  CHECK(grazing.grazing);
  CHECK((grazing.direction - Vec3(1, 0, 0)).norm() == doctest::Approx(0.0));

  const auto bent = reflect<double>(Vec3(0, 0, 1), Vec3(0, 0, 1),
                                    Vec3(0.5, 0, 0), 1.0);
  CHECK((bent.direction - Vec3(-0.5, 0, -std::sqrt(0.75))).norm() < 1e-12);

  std::mt19937_64 rng(23);
  for (int k = 0; k < 100; ++k) {
    Vec3 d = oracles::random_unit3(rng);
    d.z() = std::abs(d.z()) + 0.1;
    d.normalize();
    const Vec3 nu(0.2, -0.1, 1.0);
    const auto r = reflect<double>(d, nu, Vec3::Zero(), 1.3);
    const auto back = reflect<double>(r.direction, nu, Vec3::Zero(), 1.3);
    CHECK((back.direction - d).norm() < 1e-12);
  }
}

TEST_CASE("trace: zero phase and matched media goes straight") {
  Design d;
  d.mode = LensMode::Single;
  d.f = Surface::constant(1.0);
  d.g = Surface::constant(4.0);
  d.beta = 4.0;
  d.n1 = d.n2 = d.n3 = 1.5;
  d.field = IncidentField::collimated();
  d.phi = PhiMap::identity();
  d.phase_s1 = constant_phase_field(Grid2::uniform(4, 4, 0, 1, 0, 1),
                                    Vec2::Zero(), d.f);
  const TraceResult r = trace(d, {0.3, 0.8});
  CHECK((r.landing - Vec2(0.3, 0.8)).norm() < 1e-12);
  CHECK((r.exit_direction - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("trace: singlet unit-translation design round trip") {
  // Phase gradient n2 (x - Tx)/c with Tx = x + (1,0), f = 0, beta = 1.
  Design d;
  d.mode = LensMode::Single;
  d.f = Surface::constant(0.0);
  d.g = Surface::constant(1.0);
  d.beta = 1.0;
  d.n1 = 1.0;
  d.n2 = 1.5;
  d.n3 = 1.5;
  d.field = IncidentField::collimated();
  d.phi = PhiMap::identity();
  d.phase_s1 =
      constant_phase_field(Grid2::uniform(8, 8, -1, 2, -1, 2),
                           Vec2(-1.5 / std::sqrt(2.0), 0), d.f);
  std::mt19937_64 rng(31);
  for (int k = 0; k < 25; ++k) {
    const Vec2 x = oracles::random_point(rng, -0.5, 1.0);
    const TraceResult r = trace(d, x);
    CHECK((r.landing - (x + Vec2(1, 0))).norm() < 1e-8);
  }
}

TEST_CASE("trace: flat doublet straightens the ray to vertical") {
  Design d;
  d.mode = LensMode::Double;
  d.f = Surface::constant(0.0);
  d.g = Surface::constant(1.0);
  d.beta = 2.0;
  d.n1 = 1.0;
  d.n2 = 1.5;
  d.n3 = 1.0;
  d.field = IncidentField::collimated();
  d.phi = PhiMap::identity();
  const Grid2 wide = Grid2::uniform(8, 8, -1, 3, -1, 3);
  d.phase_s1 = constant_phase_field(wide, Vec2(-1.5 / std::sqrt(2.0), 0), d.f);
  d.phase_s2 = constant_phase_field(wide, Vec2(+1.5 / std::sqrt(2.0), 0), d.g);
  std::mt19937_64 rng(37);
  for (int k = 0; k < 25; ++k) {
    const Vec2 x = oracles::random_point(rng, -0.5, 1.0);
    const TraceResult r = trace(d, x);
    CHECK((r.landing - (x + Vec2(1, 0))).norm() < 1e-8);
    CHECK((r.exit_direction - Vec3(0, 0, 1)).norm() < 1e-8);
  }
}

TEST_CASE("pushforward: identity design reproduces the source histogram") {
  Design d;
  d.mode = LensMode::Single;
  d.f = Surface::constant(0.5);
  d.g = Surface::constant(3.0);
  d.beta = 3.0;
  d.n1 = d.n2 = d.n3 = 1.2;
  d.field = IncidentField::collimated();
  d.phi = PhiMap::identity();
  const Grid2 grid = Grid2::uniform(9, 9, 0, 1, 0, 1);
  d.phase_s1 = constant_phase_field(grid, Vec2::Zero(), d.f);

  std::mt19937_64 rng(41);
  DiscreteMeasure src;
  src.points.resize(300, 2);
  src.masses = Eigen::VectorXd::Constant(300, 1.0 / 300);
  for (int i = 0; i < 300; ++i)
    src.points.row(i) = oracles::random_point(rng, 0.01, 0.99);

  const CellHistogram push = pushforward(d, src, grid);
  const CellHistogram direct = bin_points(src.points, src.masses, grid);
  CHECK((push.cell_mass - direct.cell_mass).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(push.lost_mass == doctest::Approx(0.0));
  CHECK(push.kept_mass + push.lost_mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(push.cell_mass.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pushforward: translation design shifts the histogram") {
  Design d;
  d.mode = LensMode::Single;
  d.f = Surface::constant(0.0);
  d.g = Surface::constant(1.0);
  d.beta = 1.0;
  d.n1 = 1.0;
  d.n2 = 1.5;
  d.n3 = 1.5;
  d.field = IncidentField::collimated();
  d.phi = PhiMap::identity();
  d.phase_s1 =
      constant_phase_field(Grid2::uniform(6, 6, -1, 3, -1, 3),
                           Vec2(-1.5 / std::sqrt(2.0), 0), d.f);

  std::mt19937_64 rng(43);
  DiscreteMeasure src;
  src.points.resize(400, 2);
  src.masses = Eigen::VectorXd::Constant(400, 1.0 / 400);
  for (int i = 0; i < 400; ++i)
    src.points.row(i) = oracles::random_point(rng, 0.01, 0.99);

  const Grid2 target = Grid2::uniform(9, 9, 1, 2, 0, 1);
  const CellHistogram push = pushforward(d, src, target);
  Points2 shifted = src.points;
  shifted.col(0).array() += 1.0;
  const CellHistogram expect = bin_points(shifted, src.masses, target);
  CHECK((push.cell_mass - expect.cell_mass).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pushforward: excessive loss is an error") {
  Design d;
  d.mode = LensMode::Single;
  d.f = Surface::constant(0.0);
  d.g = Surface::constant(1.0);
  d.beta = 1.0;
  d.n1 = d.n2 = d.n3 = 1.0;
  d.field = IncidentField::collimated();
  d.phi = PhiMap::identity();
  d.phase_s1 = constant_phase_field(Grid2::uniform(4, 4, 0, 1, 0, 1),
                                    Vec2::Zero(), d.f);
  DiscreteMeasure src;
  src.points.resize(10, 2);
  for (int i = 0; i < 10; ++i) src.points.row(i) = Vec2(0.5, 0.5);
  src.masses = Eigen::VectorXd::Constant(10, 0.1);
  const Grid2 far_away = Grid2::uniform(4, 4, 5, 6, 5, 6);
  CHECK_THROWS_AS(pushforward(d, src, far_away), ExcessiveLoss);
}

TEST_CASE("verify_energy extremes and grid mismatch") {
  const Grid2 g = Grid2::uniform(3, 3, 0, 1, 0, 1);
  CellHistogram a, b;
  a.grid = b.grid = g;
  a.cell_mass = Eigen::VectorXd::Zero(4);
  b.cell_mass = Eigen::VectorXd::Zero(4);
  a.cell_mass(0) = 1.0;
  b.cell_mass(0) = 1.0;
  CHECK(verify_energy(a, b).l1 == doctest::Approx(0.0));
  b.cell_mass(0) = 0.0;
  b.cell_mass(3) = 1.0;
  const EnergyReport r = verify_energy(a, b);
  CHECK(r.l1 == doctest::Approx(1.0));
  CHECK(r.linf_cell == doctest::Approx(1.0));

  CellHistogram c;
  c.grid = Grid2::uniform(3, 3, 0, 2, 0, 1);
  c.cell_mass = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(verify_energy(a, c), GridMismatch);
}
