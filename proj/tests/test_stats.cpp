#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "stp/stats.hpp"

using namespace stp;

namespace {

Realization poisson(double T, RandomStream& rng, int mark_dim = 2) {
  Realization r;
  r.window_T = T;
  r.mark_dim = mark_dim;
  double t = rng.exponential();
  while (t <= T) {
    r.points.push_back({t, {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0}});
    t += rng.exponential();
  }
  return r;
}

}  // namespace

TEST_CASE("distribution helpers") {
  CHECK(kolmogorov_sf(1.0) == doctest::Approx(0.26999967).epsilon(1e-6));
  CHECK(kolmogorov_sf(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_sf(1.1799) == doctest::Approx(kolmogorov_sf(1.1801)).epsilon(1e-3));
  CHECK(kolmogorov_sf(0.0) == 1.0);
  CHECK(normal_sf(1.959964) == doctest::Approx(0.025).epsilon(1e-5));
  CHECK(chi2_sf(3.841459, 1) == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(binomial_two_sided(5, 10, 0.5) == doctest::Approx(1.0));
  CHECK(binomial_two_sided(0, 10, 0.5) == doctest::Approx(2.0 / 1024.0));
  const auto w = wilson(50, 100, 1.959964);
  CHECK(w.lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(w.hi == doctest::Approx(0.5962).epsilon(1e-3));
  const auto [z, p] = mann_whitney({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5});
  CHECK(std::abs(z) < 1e-12);
  CHECK(p == doctest::Approx(1.0));
  const auto far = mann_whitney({1, 2, 3, 4, 5, 6, 7, 8}, {11, 12, 13, 14, 15, 16, 17, 18});
  CHECK(far.second < 0.01);
}

TEST_CASE("censored gaps") {
  Realization r;
  r.window_T = 20.0;
  r.points = {{1.0, {}}, {3.0, {}}, {11.5, {}}, {14.0, {}}};
  const auto g = censored_gaps(r, 8.0);
  // events after T - L are not starting points
  REQUIRE(g.size() == 3);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 8.0);
  CHECK(g[2] == 2.5);
}

TEST_CASE("inter-arrival test is calibrated on Poisson input") {
  RandomStream rng(11);
  std::vector<double> ps;
  for (int k = 0; k < 200; ++k) {
    std::vector<Realization> rs{poisson(600.0, rng)};
    ps.push_back(interarrival_test(rs).p_value);
  }
  CHECK(uniformity_test(ps).p_value > 0.001);
}

TEST_CASE("inter-arrival test rejects equal gaps") {
  Realization r;
  r.window_T = 1000.0;
  for (int i = 1; i <= 1000; ++i) r.points.push_back({static_cast<double>(i), {}});
  const auto rep = interarrival_test({r});
  CHECK(rep.p_value < 1e-6);
  CHECK_FALSE(rep.pass);
  Realization few;
  few.window_T = 10.0;
  CHECK_THROWS_AS(interarrival_test({few}), StatsError);
}

TEST_CASE("dispersion test") {
  RandomStream rng(12);
  std::vector<double> ps;
  for (int k = 0; k < 200; ++k) {
    std::vector<Realization> rs{poisson(400.0, rng)};
    ps.push_back(dispersion_test(rs, 2.0).p_value);
  }
  CHECK(uniformity_test(ps).p_value > 0.001);

  // doubled points: index near 2
  Realization r = poisson(2000.0, rng);
  Realization d = r;
  d.points.clear();
  for (const auto& p : r.points) {
    d.points.push_back(p);
    d.points.push_back(p);
  }
  const auto rep = dispersion_test({d}, 2.0);
  CHECK(rep.statistic > 1.5);
  CHECK(rep.p_value < 0.01);
  Realization empty;
  empty.window_T = 200.0;
  CHECK_THROWS_AS(dispersion_test({empty}, 2.0), StatsError);
}

TEST_CASE("Kallenberg check") {
  RandomStream rng(13);
  const IntensityModel m = uniform_square_model();
  const auto rects = auto_rectangles(m, 20.0);
  REQUIRE(rects.size() >= 4);
  for (const auto& R : rects) {
    const double eta = (R.t2 - R.t1) * m.mass(R.mark);
    CHECK(eta >= 0.2);
    CHECK(eta <= 5.0);
  }
  std::vector<Realization> rs;
  for (int k = 0; k < 400; ++k) rs.push_back(poisson(20.0, rng));
  const auto ok = kallenberg_check(rs, rects, m);
  CHECK(ok.pass);
  CHECK(ok.detail("max_abs_corr_disjoint") < 0.3);

  // thin every point in the left half: wrong intensity
  for (auto& r : rs) {
    std::erase_if(r.points, [&](const MarkedPoint& p) { return p.mark[0] < 0.0 && rng.uniform() < 0.5; });
  }
  CHECK_FALSE(kallenberg_check(rs, rects, m).pass);
  rs.resize(10);
  CHECK_THROWS_AS(kallenberg_check(rs, rects, m), StatsError);
  CHECK_THROWS_AS(kallenberg_check(std::vector<Realization>(100, rs[0]), {{0.0, 1.0, {{5, 5}, {6, 6}}}}, m),
                  StatsError);
}

TEST_CASE("spatial goodness of fit") {
  RandomStream rng(14);
  const IntensityModel strip = strip_model();
  const double half_pi = std::numbers::pi / 2.0;
  std::vector<Mark> good, flat;
  for (int i = 0; i < 20000; ++i) {
    good.push_back({2.0 * rng.uniform() - 1.0, std::asin(2.0 * rng.uniform() - 1.0)});
    flat.push_back({2.0 * rng.uniform() - 1.0, half_pi * (2.0 * rng.uniform() - 1.0)});
  }
  CHECK(spatial_gof(good, strip).pass);
  CHECK(spatial_gof(flat, strip).p_value < 1e-6);

  SUBCASE("invariant under permutation") {
    std::vector<Mark> shuffled = good;
    std::mt19937_64 g(3);
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    CHECK(spatial_gof(shuffled, strip).statistic == spatial_gof(good, strip).statistic);
  }
  SUBCASE("mark outside the support") {
    good.push_back({0.0, 3.0});
    CHECK(spatial_gof(good, strip).p_value == 0.0);
  }
  SUBCASE("too few marks") {
    good.resize(500);
    CHECK_THROWS_AS(spatial_gof(good, strip), StatsError);
  }
}

TEST_CASE("i.i.d. oracle") {
  CHECK(oracle_product({{0, 10, 0.0, 0.1}}) == doctest::Approx(std::pow(0.9, 10)));
  CHECK(oracle_product({{0, 10, 0.0, 0.1}}) == doctest::Approx(0.34868).epsilon(1e-5));
  const std::vector<OracleWindow> two{{1, 4, 0.0, 0.25}, {6, 4, 0.5, 0.75}};
  CHECK(oracle_product(two) == doctest::Approx(0.10011).epsilon(1e-4));
  RandomStream rng(15);
  const auto r10 = iid_oracle_check({{0, 10, 0.0, 0.1}}, 10, 200'000, rng);
  CHECK(r10.pass);
  CHECK(r10.detail("abs_diff") < 3.0 * r10.detail("sigma"));
  CHECK(iid_oracle_check(two, 4, 200'000, rng).pass);
  CHECK_THROWS_AS(iid_oracle_check({{1, 5, 0.0, 0.25}, {5, 2, 0.0, 0.25}}, 4, 1000, rng), StatsError);
  CHECK_THROWS_AS(iid_oracle_check({{0, 3, 0.0, 0.3}}, 4, 1000, rng), StatsError);
}

TEST_CASE("short return probability on the doubling map") {
  // x in [0, 1/4) fixes two leading zeros; T x returns iff the third digit is 0
  const DigitSystem sys(2);
  RandomStream rng(16);
  const auto e = short_return_prob(sys, IntervalTarget{0.0, 0.25}, 1, 40'000, rng);
  CHECK(e.lo < 0.5);
  CHECK(e.hi > 0.5);
}

TEST_CASE("short returns near a fixed point") {
  const ToralSystem sys(ToralAutomorphism::cat());
  RandomStream rng(17);
  const auto ball = short_return_prob(sys, MetricBall{{0.0, 0.0}, 0.05}, 5, 20'000, rng);
  CHECK(ball.lo > 0.2);
  const auto away = short_return_prob(sys, MetricBall{{0.3, 0.7}, 0.05}, 5, 20'000, rng);
  CHECK(away.hi < 0.05);
}

TEST_CASE("annulus ratio for sup-balls") {
  RandomStream rng(18);
  const double eps = 0.1;
  const double delta = 1.5;
  auto sampler = [](RandomStream& g) {
    return std::max(std::abs(0.2 * g.uniform() - 0.1), std::abs(0.2 * g.uniform() - 0.1));
  };
  const auto e = annulus_ratio(sampler, eps, delta, 200'000, rng);
  const double exact = sup_annulus_exact(eps, delta);
  CHECK(e.lo <= exact);
  CHECK(e.hi >= exact);
  CHECK_THROWS_AS(annulus_ratio(sampler, eps, 1.0, 10, rng), StatsError);
}

TEST_CASE("cluster-size law at the cat-map fixed point") {
  RandomStream rng(19);
  const auto law = psi_size_law({2, 1, 1, 1}, 1, 4, 20'000, rng);
  double total = 0.0;
  for (double p : law.prob) total += p;
  CHECK(total == doctest::Approx(1.0));
  CHECK(law.theta > 0.0);
  CHECK(law.theta < 1.0);
  CHECK(law.theta == doctest::Approx(1.0 / law.mean));
}

TEST_CASE("synthetic compound Poisson counts") {
  RandomStream rng(20);
  ClusterSizeLaw law;
  law.prob = {0.5, 0.5};
  law.mean = 1.5;
  law.theta = 1.0 / 1.5;
  const Realization r = synthetic_compound_poisson(law, law.theta, 30'000.0, rng);
  const auto c = window_counts(r, 10.0);
  REQUIRE(c.size() == 3000);
  double mean = 0.0;
  for (double x : c) mean += x;
  mean /= static_cast<double>(c.size());
  // unit overall rate
  CHECK(mean == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("Kallenberg mean part and spatial test are calibrated") {
  RandomStream rng(25);
  const IntensityModel m = uniform_square_model();
  const auto rects = auto_rectangles(m, 20.0);
  std::vector<double> mean_ps, gof_ps;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Realization> rs;
    for (int k = 0; k < 100; ++k) rs.push_back(poisson(20.0, rng));
    mean_ps.push_back(kallenberg_check(rs, rects, m).detail("R0_p_mean"));
    gof_ps.push_back(spatial_gof(pooled_marks(rs), m).p_value);
  }
  CHECK(uniformity_test(mean_ps).p_value > 0.001);
  CHECK(uniformity_test(gof_ps).p_value > 0.001);
}
