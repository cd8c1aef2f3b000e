#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stp/targets.hpp"

using namespace stp;
using std::numbers::pi;

namespace {

BilliardSystem stadium2() { return BilliardSystem(build_stadium(2.0)); }
ToralSystem cat() { return ToralSystem(ToralAutomorphism::cat()); }

}  // namespace

TEST_CASE("torus sup-ball membership and marks") {
  const ToralDetector det(cat(), MetricBall{{0.0, 0.0}, 0.1});
  CHECK(det.contains({0.04, 0.01}));
  CHECK(det.contains({0.96, 0.99}));
  CHECK_FALSE(det.contains({0.1, 0.0}));
  const Mark m = det.normalize({0.04, 0.98});
  CHECK(m[0] == doctest::Approx(0.4));
  CHECK(m[1] == doctest::Approx(-0.2));
  CHECK(det.normalize({0.0, 0.0}) == Mark{0.0, 0.0});
  CHECK_THROWS_AS(det.normalize({0.3, 0.3}), TargetError);
}

TEST_CASE("pruned set at the cat-map fixed point") {
  const ToralDetector det(cat(), ClusterPruned{{0.0, 0.0}, 1, 1, 0.1});
  // M(0.04, 0.01) = (0.09, 0.05) is still in the ball
  CHECK_FALSE(det.contains({0.04, 0.01}));
  // M(0.08, 0.05) = (0.21, 0.13) leaves
  CHECK(det.contains({0.08, 0.05}));
  CHECK_THROWS_AS(ToralDetector(cat(), ClusterPruned{{0.5, 0.5}, 1, 1, 0.1}), TargetError);
  CHECK_THROWS_AS(ToralDetector(cat(), ClusterPruned{{0.0, 0.0}, 1, 0, 0.1}), TargetError);
  CHECK_THROWS_AS(ToralDetector(cat(), ClusterPruned{{0.0, 0.0}, 2, 1, 0.1}), TargetError);
}

TEST_CASE("strip marks") {
  const auto sys = stadium2();
  const BilliardDetector det(sys, PositionStrip{1.0, 0.1});
  const Mark m = det.normalize({1.05, 0.3});
  CHECK(m[0] == doctest::Approx(0.5));
  CHECK(m[1] == doctest::Approx(0.3));
  CHECK_FALSE(det.contains({1.2, 0.0}));
  // wrap across r = 0
  const BilliardDetector w(sys, PositionStrip{0.02, 0.05});
  CHECK(w.contains({sys.table->perimeter() - 0.01, 0.0}));
}

TEST_CASE("billiard ball marks") {
  const auto sys = stadium2();
  const BilliardDetector det(sys, MetricBall{{3.0, 0.2}, 0.05});
  CHECK(det.contains({3.0, 0.2}));
  CHECK(det.normalize({3.0, 0.2}) == Mark{0.0, 0.0});
  CHECK_FALSE(det.contains({3.0, 0.26}));
  CHECK_THROWS_AS(BilliardDetector(sys, MetricBall{{3.0, 2.0}, 0.05}), TargetError);
}

TEST_CASE("barrier geometry on the default diamond") {
  const Table t = default_diamond();
  const BarrierGeometry g = barrier_geometry(t, 0, 0.05);
  CHECK(g.axis.x == doctest::Approx(1.0));
  CHECK(g.axis.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((g.a2 - g.a1).norm() == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(g.a1.x == doctest::Approx(g.a2.x));
  // symmetric diamond: barrier centred on the bisector
  CHECK(0.5 * (g.lo + g.hi) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(g.offset > 0.0);
  CHECK_THROWS_AS(barrier_geometry(build_stadium(1.0), 0, 0.05), TargetError);
  CHECK_THROWS_AS(barrier_geometry(t, 4, 0.05), TargetError);
}

TEST_CASE("barrier crossing marks") {
  const BilliardSystem sys(default_diamond());
  const BilliardDetector det(sys, CornerBarrier{0, 0.05});
  const BarrierGeometry& g = *det.barrier();
  FlightRecord f;
  f.status = StepStatus::ok;
  const double mid = 0.5 * (g.lo + g.hi);
  f.from = {g.offset + 0.5, mid};
  f.to = {g.offset - 0.01, mid};
  f.tau = 0.51;
  auto hit = det.probe(f);
  REQUIRE(hit);
  CHECK(hit->mark[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hit->mark[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hit->fraction == doctest::Approx(0.5 / 0.51));
  // moving away from the corner does not count
  std::swap(f.from, f.to);
  CHECK_FALSE(det.probe(f));
}

TEST_CASE("analytic measures") {
  const Table t = build_stadium(2.0);
  const double P = t.perimeter();
  CHECK(*analytic_measure(PositionStrip{1.0, 0.05}, &t) == doctest::Approx(0.1 / P));
  CHECK(*analytic_measure(CornerBarrier{0, 0.05}, &t) == doctest::Approx(0.05 / P));
  CHECK(*analytic_measure(MetricBall{{0.0, 0.0}, 0.1}, nullptr) == doctest::Approx(0.04));
  // exact ball integral 2 eps sin(eps) cos(phi0) / |dQ|
  CHECK(*analytic_measure(MetricBall{{3.0, 0.3}, 0.05}, &t) ==
        doctest::Approx(2 * 0.05 * std::sin(0.05) * std::cos(0.3) / P));
  CHECK(*analytic_measure(IntervalTarget{0.0, 0.25}, nullptr) == doctest::Approx(0.25));
}

TEST_CASE("monte carlo measures agree with closed forms") {
  RandomStream rng(99);
  SUBCASE("sinai strip") {
    const BilliardSystem sys(build_sinai(default_sinai_scatterers(), {.rays = 2000}));
    const auto m = measure(sys, PositionStrip{0.3, 0.05}, 200'000, rng);
    REQUIRE(m.analytic);
    CHECK(std::abs(m.estimate - *m.analytic) < 3.0 * m.stderr_);
  }
  SUBCASE("diamond barrier") {
    const BilliardSystem sys(default_diamond());
    const auto m = measure(sys, CornerBarrier{0, 0.1}, 400'000, rng);
    REQUIRE(m.analytic);
    CHECK(std::abs(m.estimate - *m.analytic) < 3.0 * m.stderr_);
  }
  SUBCASE("torus ball") {
    const auto m = measure(cat(), MetricBall{{0.3, 0.6}, 0.1}, 100'000, rng);
    CHECK(std::abs(m.estimate - 0.04) < 3.0 * m.stderr_);
  }
  SUBCASE("pruned set gives an extremal index in (0,1]") {
    const auto m = measure(cat(), ClusterPruned{{0.0, 0.0}, 1, 4, 0.05}, 100'000, rng);
    REQUIRE(m.theta);
    CHECK(*m.theta > 0.0);
    CHECK(*m.theta <= 1.0);
    CHECK(*m.ball_estimate == doctest::Approx(0.01));
  }
  SUBCASE("budget and starvation errors") {
    CHECK_THROWS_AS(measure(cat(), MetricBall{{0.3, 0.6}, 0.1}, 100, rng), TargetError);
    CHECK_THROWS_AS(measure(cat(), MetricBall{{0.3, 0.6}, 1e-6}, 10'000, rng), TargetError);
  }
}

TEST_CASE("intensity models integrate to one") {
  for (const IntensityModel& m : {uniform_square_model(), strip_model(), barrier_model()}) {
    CHECK(m.mass(m.support) == doctest::Approx(1.0));
    // midpoint quadrature of the density agrees with the closed-form mass
    const int n = 200;
    double acc = 0.0;
    const double dx = (m.support.hi[0] - m.support.lo[0]) / n;
    const double dy = (m.support.hi[1] - m.support.lo[1]) / n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        acc += m.density({m.support.lo[0] + (i + 0.5) * dx, m.support.lo[1] + (j + 0.5) * dy});
      }
    }
    CHECK(acc * dx * dy == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK(unit_interval_model().mass({{0.0, 0.0}, {1.0, 0.0}}) == doctest::Approx(1.0));
  // m(F) for F = {phi in (0, pi/2)} under cos(phi)/4
  CHECK(strip_model().mass({{-1.0, 0.0}, {1.0, pi / 2}}) == doctest::Approx(0.5));
  const IntensityModel flow = flow_ball_entrance_model(0.7);
  CHECK(flow.mass(flow.support) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("pruned intensity model") {
  const ToralSystem sys = cat();
  const IntensityModel m = pruned_model(sys, ClusterPruned{{0.0, 0.0}, 1, 4, 0.05}, 256);
  CHECK(m.mass(m.support) == doctest::Approx(1.0));
  CHECK(m.mass({{-1.0, -1.0}, {0.0, 1.0}}) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(m.density({0.0, 0.0}) == 0.0);
}
