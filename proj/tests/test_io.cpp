#include <doctest.h>

#include <cstring>
#include <sstream>

#include "stp/experiments.hpp"
#include "stp/io.hpp"

using namespace stp;
using nlohmann::json;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Realization sample_realization() {
  Realization r;
  r.window_T = 3.0;
  r.epsilon = 0.05;
  r.mu_target = 1.0 / 3.0;
  r.seed = 0xdeadbeefcafeULL;
  r.collisions = 9;
  r.raw_events = 3;
  r.points = {{0.1 + 0.2, {1.0 / 7.0, -std::nextafter(0.5, 1.0)}},
              {std::sqrt(2.0), {5e-324, -0.0}},
              {2.9999999999999996, {0.9999999999999999, 1e-300}}};
  return r;
}

}  // namespace

TEST_CASE("CSV round trip is bit exact") {
  const Realization r = sample_realization();
  std::stringstream ss;
  write_realization_csv(ss, r);
  const Realization back = read_realization_csv(ss);
  REQUIRE(back.count() == r.count());
  CHECK(back.seed == r.seed);
  CHECK(back.mark_dim == 2);
  for (std::size_t i = 0; i < r.count(); ++i) {
    CHECK(same_bits(back.points[i].t, r.points[i].t));
    CHECK(same_bits(back.points[i].mark[0], r.points[i].mark[0]));
    CHECK(same_bits(back.points[i].mark[1], r.points[i].mark[1]));
  }
}

TEST_CASE("JSON round trip is bit exact") {
  const Realization r = sample_realization();
  const Realization back = realization_from_json(json::parse(realization_to_json(r).dump()));
  CHECK(same_bits(back.mu_target, r.mu_target));
  CHECK(back.seed == r.seed);
  REQUIRE(back.count() == r.count());
  for (std::size_t i = 0; i < r.count(); ++i) {
    CHECK(same_bits(back.points[i].t, r.points[i].t));
    CHECK(same_bits(back.points[i].mark[0], r.points[i].mark[0]));
    CHECK(same_bits(back.points[i].mark[1], r.points[i].mark[1]));
  }
  CHECK_THROWS_AS(realization_from_json(json{{"seed", 1}}), IoError);
}

TEST_CASE("one-dimensional marks in CSV") {
  Realization r;
  r.mark_dim = 1;
  r.points = {{0.5, {0.8, 0.0}}};
  std::stringstream ss;
  write_realization_csv(ss, r);
  CHECK(ss.str().rfind("seed,t,m0\n", 0) == 0);
  const Realization back = read_realization_csv(ss);
  CHECK(back.mark_dim == 1);
  CHECK(back.points[0].mark[0] == 0.8);
}

TEST_CASE("report JSON round trip") {
  TestReport r;
  r.name = "x";
  r.statistic = 0.1;
  r.p_value = 0.3;
  r.ci = std::pair{0.9, 1.1};
  r.details = {{"a", 1.0}};
  const TestReport back = report_from_json(report_to_json(r));
  CHECK(back.name == "x");
  CHECK(back.ci->second == 1.1);
  CHECK(back.detail("a") == 1.0);
}

TEST_CASE("config schema errors name the field") {
  auto field_of = [](const json& j) {
    try {
      parse_config(j);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of({{"system", {{"type", "stadium"}}}, {"target", {{"type", "strip"}, {"r0", 1.0}}}}) ==
        "system.length");
  CHECK(field_of({{"system", {{"type", "stadium"}, {"length", 2}}}}) == "target");
  CHECK(field_of({{"system", {{"type", "stadium"}, {"length", 2}}}, {"target", {{"type", "barrier"}}}}) ==
        "target.type");
  CHECK(field_of({{"system", {{"type", "cat"}}}, {"target", {{"type", "ball"}, {"center", {0.1, 0.2}}}},
                  {"seeds", 0}}) == "seeds");
  CHECK(field_of({{"system", {{"type", "cat"}}}, {"target", {{"type", "ball"}, {"center", {0.1, 0.2}}}},
                  {"colour", 1}}) == "colour");
  CHECK(field_of({{"system", {{"type", "sinai"}, {"scatterers", {{{"center", {0, 0}}}}}}},
                  {"target", {{"type", "strip"}, {"r0", 0.1}}}}) == "system.scatterers[0].radius");
}

TEST_CASE("config defaults are recorded") {
  const ExperimentConfig c = parse_config(
      {{"system", {{"type", "cat"}}}, {"target", {{"type", "pruned"}}}, {"eps", {0.1, 0.05}}});
  const json j = config_to_json(c);
  CHECK(j.at("seeds") == 100);
  CHECK(j.at("alpha") == 0.01);
  CHECK(j.at("system").at("matrix") == json{{2, 1}, {1, 1}});
  const ExperimentConfig r = resolve_config(c);
  CHECK(std::get<ClusterPruned>(r.target).q0 == select_q0(periodic_site(c)).q0);
  // the resolved config parses back to itself
  CHECK(config_to_json(parse_config(config_to_json(r))) == config_to_json(r));
}

TEST_CASE("simulation is deterministic") {
  ExperimentConfig c = parse_config({{"system", {{"type", "stadium"}, {"length", 2.0}}},
                                     {"target", {{"type", "strip"}, {"r0", 1.0}}},
                                     {"seeds", 4},
                                     {"horizon_T", 5.0},
                                     {"jobs", 3}});
  const Dynamics sys = build_system(c.system);
  const TargetSpec spec = with_epsilon(c.target, 0.05);
  const double mu = target_measure(sys, spec, 10'000, 1).value;
  const auto a = simulate_eps(sys, spec, mu, c, 0);
  c.jobs = 1;
  const auto b = simulate_eps(sys, spec, mu, c, 0);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].seed == b[k].seed);
    CHECK(realization_to_json(a[k]).dump() == realization_to_json(b[k]).dump());
  }
  CHECK(a[0].seed != a[1].seed);
}

TEST_CASE("step budget refusal reports the step count") {
  const ExperimentConfig c = parse_config({{"system", {{"type", "cat"}}},
                                           {"target", {{"type", "ball"}, {"center", {0.3, 0.3}}}},
                                           {"horizon_T", 1e6},
                                           {"seeds", 1}});
  const Dynamics sys = build_system(c.system);
  try {
    simulate_eps(sys, with_epsilon(c.target, 0.01), 4e-4, c, 0);
    FAIL("expected refusal");
  } catch (const StepBudgetError& e) {
    CHECK(e.needed() == 2'500'000'000ULL);
  }
}

TEST_CASE("Poisson fixture passes the battery") {
  const auto rs = poisson_fixture(120, 20.0, 3);
  const auto reps = poisson_battery(rs, uniform_square_model(), 0.01, 1.0);
  for (const auto& r : reps) CHECK_MESSAGE(r.pass, r.name);
}
