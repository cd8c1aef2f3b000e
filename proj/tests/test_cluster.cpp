#include <doctest.h>

#include "stp/cluster.hpp"

using namespace stp;

TEST_CASE("site validation") {
  PeriodicSiteConfig c;
  CHECK_NOTHROW(validate_site(c));
  c.x0 = {0.3, 0.3};
  CHECK_THROWS_AS(validate_site(c), ClusterError);
  // (2/5, 1/5) has period 2 under the cat map... check the minimal period is enforced
  const auto pts = periodic_points(IntMat2{2, 1, 1, 1}, 2);
  for (const auto& p : pts) {
    if (p.minimal_period != 2) continue;
    PeriodicSiteConfig two;
    two.x0 = p.point;
    two.period = 2;
    CHECK_NOTHROW(validate_site(two));
    two.period = 1;
    CHECK_THROWS_AS(validate_site(two), ClusterError);
    break;
  }
  PeriodicSiteConfig bad;
  bad.eps_ladder = {0.7};
  CHECK_THROWS_AS(validate_site(bad), ClusterError);
}

TEST_CASE("q0 selection") {
  PeriodicSiteConfig c;
  const Q0Selection s = select_q0(c);
  CHECK(s.q0 == 2 * s.certificate.q);
  CHECK(s.certificate.reverify_ratio <= 0.25);
  PeriodicSiteConfig d;
  d.map = ToralAutomorphism(IntMat2{5, 2, 2, 1});
  CHECK(select_q0(d).q0 >= 2);
}

TEST_CASE("separation of the pruned set and its unpruned control") {
  PeriodicSiteConfig c;
  RandomStream rng(21);
  const auto ok = validate_separation(c, 0.05, 20'000, rng);
  CHECK(ok.pass);
  CHECK(ok.detail("violations") == 0.0);
  CHECK(ok.detail("window") == 2.0);
  PeriodicSiteConfig small = c;
  small.a = 0.1;
  CHECK(validate_separation(small, 0.05, 10'000, rng).pass);
  const auto control = validate_separation(c, 0.05, 20'000, rng, false);
  CHECK_FALSE(control.pass);
  CHECK(control.detail("violations") > 0.0);
  CHECK(validate_separation(c, 0.4, 1000, rng).detail("outside_regime") == 1.0);
}

TEST_CASE("theta stability report") {
  CHECK(theta_stability({0.1, 0.05}, {0.6, 0.62}).pass);
  CHECK_FALSE(theta_stability({0.1, 0.05}, {0.6, 0.4}).pass);
}

TEST_CASE("cluster pipeline pieces at the fixed point") {
  PeriodicSiteConfig c;
  const ToralSystem sys(c.map);
  const int q0 = select_q0(c).q0;
  const ClusterPruned spec{{0.0, 0.0}, 1, q0, 0.05};
  RandomStream rng(22);
  const auto mu = measure(sys, spec, 200'000, rng);
  std::vector<ClusterRealization> crs;
  for (std::uint64_t s = 0; s < 20; ++s) {
    RandomStream r(derive_seed(7, 0, s));
    crs.push_back(extract_cluster_process(sys, spec, sys.sample(r), mu.estimate, 100.0, s));
  }
  const auto lin = cluster_linearization(crs, sys, spec, 1.0);
  CHECK(lin.pass);
  CHECK(lin.detail("violations") == 0.0);
  CHECK(rescale_identity(crs).pass);
  const auto law = psi_size_law(sys.map.derivative(), 1, q0, 20'000, rng);
  // the extremal index of the pruned set and the cluster-map mean agree
  CHECK(law.theta == doctest::Approx(*mu.theta).epsilon(0.05));
}

TEST_CASE("compound Poisson test on its own null") {
  // synthetic clusters: rebuild a ClusterRealization from a compound Poisson draw
  RandomStream rng(23);
  ClusterSizeLaw law;
  law.prob = {0.5, 0.25, 0.125, 0.125};
  law.mean = 0.5 + 0.5 + 0.375 + 0.5;
  law.theta = 1.0 / law.mean;
  std::vector<double> ps;
  for (int rep = 0; rep < 200; ++rep) {
    ClusterRealization cr;
    cr.theta = 1.0;
    const Realization s = synthetic_compound_poisson(law, law.theta, 400.0, rng);
    cr.ball_visits = s;
    cr.ball_visits.mark_dim = 2;
    std::size_t i = 0;
    while (i < s.points.size()) {
      std::size_t j = i;
      while (j < s.points.size() && s.points[j].t == s.points[i].t) ++j;
      Cluster cl;
      cl.marks.assign(j - i, Mark{});
      cl.steps.assign(j - i, 0);
      cr.clusters.push_back(cl);
      i = j;
    }
    ps.push_back(compound_poisson_test({cr}, law, 5.0, rng, 0.01, 100).p_value);
  }
  CHECK(uniformity_test(ps).p_value > 0.001);
}

TEST_CASE("compound Poisson test perfect fit for simple Poisson") {
  RandomStream rng(24);
  ClusterSizeLaw law;
  law.prob = {1.0};
  std::vector<ClusterRealization> crs(1);
  crs[0].theta = 1.0;
  crs[0].ball_visits = synthetic_compound_poisson(law, 1.0, 2000.0, rng);
  for (std::size_t i = 0; i < crs[0].ball_visits.count(); ++i) {
    Cluster cl;
    cl.marks = {Mark{}};
    cl.steps = {0};
    crs[0].clusters.push_back(cl);
  }
  const auto r = compound_poisson_test(crs, law, 5.0, rng);
  CHECK(r.detail("p_sizes") == 1.0);
}
