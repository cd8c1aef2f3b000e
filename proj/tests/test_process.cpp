#include <doctest.h>

#include <cmath>

#include "stp/process.hpp"

using namespace stp;

TEST_CASE("doubling map process on the quarter interval") {
  const DigitSystem sys(2);
  const auto r = extract_map_process(sys, IntervalTarget{0.0, 0.25}, sys.start_at(0.3, 1), 0.25, 1.0);
  // orbit 0.3, 0.6, 0.2, 0.4: first entry at n = 2
  REQUIRE(r.count() >= 1);
  CHECK(r.points[0].t == doctest::Approx(0.5));
  CHECK(r.points[0].mark[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(r.mark_dim == 1);
  for (const auto& p : r.points) CHECK(p.t <= r.window_T);
}

TEST_CASE("orbit that never enters gives an empty realization") {
  const DigitSystem sys(2);
  // 1/3 alternates between 1/3 and 2/3 in the double's digit window
  const auto r = extract_map_process(sys, IntervalTarget{0.0, 0.25}, sys.start_at(1.0 / 3.0, 1), 0.25, 2.0);
  CHECK(r.count() == 0);
}

TEST_CASE("step budget refusal") {
  const ToralSystem sys(ToralAutomorphism::cat());
  CHECK_THROWS_AS(extract_map_process(sys, MetricBall{{0.3, 0.3}, 1e-5}, Vec2{0.1, 0.2}, 4e-10, 1e3),
                  StepBudgetError);
  try {
    extract_map_process(sys, MetricBall{{0.3, 0.3}, 0.01}, Vec2{0.1, 0.2}, 4e-4, 1e6, 0, 1000);
  } catch (const StepBudgetError& e) {
    CHECK(e.needed() == 2'500'000'000ULL);
  }
}

TEST_CASE("extraction is deterministic") {
  const BilliardSystem sys(build_stadium(2.0));
  const TargetSpec spec = PositionStrip{1.0, 0.05};
  const double mu = 0.1 / sys.table->perimeter();
  const auto a = extract_map_process(sys, spec, ReflectedVector{0.3, 0.2}, mu, 20.0);
  const auto b = extract_map_process(sys, spec, ReflectedVector{0.3, 0.2}, mu, 20.0);
  REQUIRE(a.count() == b.count());
  for (std::size_t i = 0; i < a.count(); ++i) {
    CHECK(a.points[i].t == b.points[i].t);
    CHECK(a.points[i].mark == b.points[i].mark);
  }
  for (std::size_t i = 1; i < a.count(); ++i) CHECK(a.points[i].t > a.points[i - 1].t);
}

TEST_CASE("stadium axial orbit has constant roof") {
  const Table t = build_stadium(2.0);
  const double r0 = 2.0 + std::numbers::pi / 2.0;
  const FlightRecord f = step(t, {r0, 0.0});
  CHECK(f.tau == doctest::Approx(4.0));
  CHECK(f.to.x == doctest::Approx(-2.0));
  CHECK(f.after.phi == doctest::Approx(0.0).epsilon(1e-12));
  const BirkhoffSum s = birkhoff_tau(t, {r0, 0.0}, 10);
  CHECK(s.sum == doctest::Approx(40.0));
  CHECK(s.steps == 10);
}

TEST_CASE("flow view equals map view for a constant roof") {
  const ToralSystem sys(ToralAutomorphism::cat());
  const TargetSpec spec = MetricBall{{0.3, 0.7}, 0.05};
  const double mu = 0.01;
  const auto m = extract_map_process(sys, spec, Vec2{0.11, 0.37}, mu, 30.0);
  const auto f = extract_flow_process(sys, spec, Vec2{0.11, 0.37}, mu, 1.0, 30.0);
  REQUIRE(m.count() == f.count());
  for (std::size_t i = 0; i < m.count(); ++i) CHECK(m.points[i].t == doctest::Approx(f.points[i].t));
}

TEST_CASE("theta rescale and temporal projection") {
  Realization r;
  r.window_T = 4.0;
  r.points = {{0.5, {0.1, 0.2}}, {1.0, {0.3, 0.4}}, {3.5, {0.0, 0.0}}};
  const Realization same = theta_rescale(r, 1.0);
  for (std::size_t i = 0; i < r.count(); ++i) CHECK(same.points[i].t == r.points[i].t);
  const Realization half = theta_rescale(r, 0.5);
  CHECK(half.points[1].t == 2.0);
  CHECK(half.points[1].mark == r.points[1].mark);
  CHECK(half.window_T == 8.0);
  for (double t : {0.7, 1.0, 3.0, 7.5}) CHECK(half.count_in(0.0, t) == r.count_in(0.0, 0.5 * t));
  CHECK_THROWS_AS(theta_rescale(r, 0.0), ProcessError);
  CHECK_THROWS_AS(theta_rescale(r, 1.5), ProcessError);
  const Realization proj = temporal_projection(r);
  CHECK(proj.mark_dim == 0);
  CHECK(proj.count() == 3);
  CHECK(temporal_projection(Realization{}).count() == 0);
}

TEST_CASE("psi prediction") {
  const Mat2 cat{2, 1, 1, 1};
  SUBCASE("anchor whose backward iterate leaves the ball") {
    const Vec2 x{0.95, -0.55};
    REQUIRE(in_pruned_limit(cat, 2, x));
    const auto chain = psi_predict(cat, 1, 2, x);
    REQUIRE(!chain.empty());
    CHECK(chain.front().mark.x == x.x);
    CHECK(chain.back().in_ball);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(psi_predict(cat, 1, 2, {0.0, 0.0}), ProcessError);
    CHECK_THROWS_AS(psi_predict(cat, 1, 2, {0.01, 0.01}), ProcessError);
  }
  SUBCASE("hyperbolic example with a gap in the cluster") {
    const Mat2 a{-0.2, 1.8, 0.6, -0.4};
    const Vec2 v{0.5, 0.7};
    const Vec2 x = a * (a * v);
    const auto chain = psi_predict(a, 1, 2, x, BallNorm::euclidean);
    REQUIRE(chain.size() == 3);
    CHECK(chain[0].in_ball);
    CHECK_FALSE(chain[1].in_ball);
    CHECK(chain[2].in_ball);
    CHECK(chain[2].mark.x == doctest::Approx(v.x));
    CHECK(chain[2].mark.y == doctest::Approx(v.y));
  }
}

TEST_CASE("cluster extraction at the cat-map fixed point") {
  const ToralSystem sys(ToralAutomorphism::cat());
  const ClusterPruned spec{{0.0, 0.0}, 1, 4, 0.05};
  RandomStream rng(5);
  const auto mu = measure(sys, spec, 200'000, rng);
  const auto cr = extract_cluster_process(sys, spec, Vec2{0.1234, 0.5678}, mu.estimate, 200.0);
  CHECK(cr.theta > 0.0);
  CHECK(cr.theta <= 1.0);
  REQUIRE(cr.clusters.size() > 50);
  std::size_t visits = 0;
  for (const Cluster& c : cr.clusters) {
    visits += c.size();
    CHECK(c.steps.back() == c.anchor_step);
    // consecutive visits follow the linear map exactly (up to rounding)
    for (std::size_t k = 1; k < c.size(); ++k) {
      const Mat2 m = Mat2{2, 1, 1, 1}.pow(static_cast<int>(c.steps[k] - c.steps[k - 1]));
      const Vec2 pred = m * Vec2{c.marks[k - 1][0], c.marks[k - 1][1]};
      CHECK(std::abs(pred.x - c.marks[k][0]) < 1e-6);
      CHECK(std::abs(pred.y - c.marks[k][1]) < 1e-6);
    }
  }
  CHECK(visits <= cr.ball_visits.count());
  CHECK(cr.anchors.count() == cr.clusters.size());
  const ToralDetector det(sys, spec);
  for (const auto& p : cr.anchors.points) CHECK(det.contains(wrap_torus(Vec2{p.mark[0], p.mark[1]} * 0.05)));
}
