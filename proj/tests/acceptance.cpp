#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "stp/experiments.hpp"
#include "stp/io.hpp"

using namespace stp;

namespace {

struct Outcome {
  bool pass{true};
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " !" << what;
    }
  }
};

int failures = 0;

void emit(int id, const std::string& title, Outcome& o) {
  std::printf("criterion %2d [%s] %s:%s\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.note.str().c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

ExperimentConfig battery_config(double horizon_T, std::uint64_t master) {
  ExperimentConfig c;
  c.horizon_T = horizon_T;
  c.seeds = 100;
  c.master_seed = master;
  return c;
}

std::string verdicts(const std::vector<TestReport>& reps) {
  std::string s;
  for (const auto& r : reps) s += " " + r.name + " p=" + num(r.p_value) + (r.pass ? "" : "(fail)") + ";";
  return s;
}

double chi2_uniform_grid(const std::vector<std::pair<double, double>>& pts, int k) {
  std::vector<double> cells(static_cast<std::size_t>(k * k), 0.0);
  for (auto [u, v] : pts) {
    const int i = std::clamp(static_cast<int>(u * k), 0, k - 1);
    const int j = std::clamp(static_cast<int>(v * k), 0, k - 1);
    cells[static_cast<std::size_t>(i * k + j)] += 1.0;
  }
  const double e = static_cast<double>(pts.size()) / (k * k);
  double chi = 0.0;
  for (double o : cells) chi += (o - e) * (o - e) / e;
  return chi2_sf(chi, k * k - 1);
}

void criterion1() {
  Outcome o;
  const BilliardSystem diamond(default_diamond());
  const BilliardSystem sinai(build_sinai(default_sinai_scatterers()));
  const BilliardSystem stadium(build_stadium(2.0));
  int ok = 0, total = 0;
  double worst = 0.0;
  for (double eps : {0.2, 0.1, 0.05}) {
    RandomStream rng(derive_seed(101, 0, static_cast<std::uint64_t>(eps * 1000)));
    const std::vector<std::pair<const BilliardSystem*, TargetSpec>> cases = {
        {&diamond, CornerBarrier{0, eps}}, {&sinai, PositionStrip{0.7, eps}}, {&stadium, MetricBall{{3.1, 0.3}, eps}}};
    for (const auto& [sys, spec] : cases) {
      const MeasureEstimate m = measure(*sys, spec, 1'000'000, rng);
      const double z = std::abs(m.estimate - *m.analytic) / m.stderr_;
      worst = std::max(worst, z);
      ++total;
      if (z < 3.0) ++ok;
      o.require(z < 3.0, target_kind(spec) + "@" + num(eps) + " z=" + num(z));
    }
  }
  // the literal small-eps ball expression cos(phi0) eps^2 / (2|dQ|) is off by a factor 4
  const double eps = 0.05;
  const double exact = *analytic_measure(MetricBall{{3.1, 0.3}, eps}, stadium.table.get());
  const double literal = std::cos(0.3) * eps * eps / (2.0 * stadium.table->perimeter());
  o.note << " " << ok << "/" << total << " within 3 sigma (worst " << num(worst) << " sigma); exact/literal ball ratio "
         << num(exact / literal);
  emit(1, "measure formulas", o);
}

void criterion2() {
  Outcome o;
  for (const Table& t : {build_stadium(2.0), default_diamond()}) {
    RandomStream rng(derive_seed(102, 0, t.perimeter() > 5 ? 1 : 2));
    std::vector<std::pair<double, double>> pts;
    const double P = t.perimeter();
    while (pts.size() < 1'000'000) {
      const FlightRecord f = step(t, sample_mu(t, rng));
      if (!f.ok()) continue;
      pts.push_back({f.after.r / P, 0.5 * (1.0 + std::sin(f.after.phi))});
    }
    const double p = chi2_uniform_grid(pts, 20);
    o.require(p > 0.001, t.name());
    o.note << " " << t.name() << " p=" << num(p) << ";";
  }
  {
    const ToralAutomorphism cat = ToralAutomorphism::cat();
    RandomStream rng(derive_seed(102, 1, 0));
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 1'000'000; ++i) {
      const Vec2 y = cat.apply({rng.uniform(), rng.uniform()});
      pts.push_back({y.x, y.y});
    }
    const double p = chi2_uniform_grid(pts, 20);
    o.require(p > 0.001, "cat");
    o.note << " cat map p=" << num(p);
  }
  emit(2, "invariant measures", o);
}

void criterion3() {
  Outcome o;
  RandomStream rng(103);
  const std::vector<std::pair<int, std::vector<OracleWindow>>> cases = {
      {10, {{0, 10, 0.0, 0.1}}},
      {4, {{1, 4, 0.0, 0.25}, {6, 4, 0.5, 0.75}}},
      {8, {{0, 3, 0.0, 0.125}, {4, 5, 0.375, 0.625}, {10, 2, 0.875, 1.0}}}};
  for (const auto& [base, w] : cases) {
    const TestReport r = iid_oracle_check(w, base, 1'000'000, rng);
    o.require(r.pass, "base " + std::to_string(base));
    o.note << " exact " << num(r.detail("exact")) << " vs " << num(r.detail("estimate")) << " (z=" << num(r.statistic)
           << ");";
  }
  o.require(std::abs(oracle_product(cases[0].second) - 0.34868) < 5e-6, "0.9^10");
  o.require(std::abs(oracle_product(cases[1].second) - 0.10011) < 5e-6, "0.75^8");
  emit(3, "joint avoidance oracle", o);
}

void billiard_battery(int id, const std::string& title, const BilliardSystem& sys, const TargetSpec& spec,
                      TimeBase base, const IntensityModel& model, bool kallenberg, std::uint64_t master) {
  Outcome o;
  ExperimentConfig c = battery_config(25.0, master);
  c.time_base = base;
  const TargetMeasure mu = target_measure(sys, spec, 1'000'000, master);
  const auto rs = simulate_eps(sys, spec, mu.value, c, 0);
  std::size_t events = 0, degenerate = 0;
  for (const auto& r : rs) {
    events += r.count();
    degenerate += r.degenerate;
  }
  o.require(events >= 2000, "fewer than 2000 events");
  std::vector<TestReport> reps;
  reps.push_back(interarrival_test(rs));
  reps.push_back(spatial_gof(pooled_marks(rs), model));
  reps.push_back(dispersion_test(rs, 1.0));
  if (kallenberg) {
    const auto rects = auto_rectangles(model, c.horizon_T);
    o.require(rects.size() >= 6, "fewer than 6 rectangles");
    reps.push_back(kallenberg_check(rs, rects, model));
  }
  for (const auto& r : reps) o.require(r.pass, r.name);
  const TestReport& disp = reps[2];
  o.note << " " << events << " events over " << rs.size() << " seeds (" << degenerate << " redrawn);" << verdicts(reps)
         << " dispersion " << num(disp.statistic) << " in [" << num(disp.ci->first) << ", " << num(disp.ci->second)
         << "]";
  if (id == 6) {
    const TestReport b = birkhoff_ratio(*sys.table, 10'000'000, master + 1);
    const double area_side = 2.0 * std::numbers::pi * sys.table->area();
    const double flight_side = 2.0 * sys.table->perimeter() * b.detail("empirical_mean");
    const double rel = std::abs(area_side / flight_side - 1.0);
    o.require(rel < 0.01, "2 pi Area vs 2 |dQ| tau_bar");
    o.require(std::abs(mu.estimate.estimate - *mu.estimate.analytic) < 3.0 * mu.estimate.stderr_, "eps/|dQ|");
    o.note << "; 2 pi Area / (2 |dQ| tau_hat) - 1 = " << num(area_side / flight_side - 1.0) << "; mu MC "
           << num(mu.estimate.estimate) << " vs eps/|dQ| " << num(*mu.estimate.analytic);
  }
  emit(id, title, o);
}

void criterion7() {
  Outcome o;
  const BilliardSystem sinai(build_sinai(default_sinai_scatterers()));
  const TestReport b = birkhoff_ratio(*sinai.table, 10'000'000, 107);
  o.require(b.pass, "Birkhoff ratio");
  const TargetSpec spec = PositionStrip{0.7, 0.01};
  const TargetMeasure mu = target_measure(sinai, spec, 1'000'000, 108);
  const TestReport f = flow_map_consistency(sinai, spec, mu.value, battery_config(25.0, 109));
  o.require(f.pass, "KS difference");
  o.note << " S_n tau/(n tau_bar) = " << num(b.statistic) << " at n=1e7; KS map " << num(f.detail("ks_map"))
         << " flow " << num(f.detail("ks_flow")) << " diff " << num(f.statistic);
  emit(7, "flow vs map time", o);
}

void criterion8() {
  Outcome o;
  PeriodicSiteConfig site;
  site.eps_ladder = {0.1, 0.05};
  ClusterRunOptions opts;
  opts.master_seed = 110;
  const ClusterRunBundle b = run_cluster_experiment(site, opts);
  o.note << " q0=" << b.q0 << ";";
  for (const auto& e : b.per_eps) {
    o.note << " eps " << e.eps << " theta " << num(e.theta_hat) << ":";
    for (const auto& r : e.reports) {
      o.pass = o.pass && r.pass;
      o.note << " " << r.name << (r.pass ? " ok" : " FAIL") << " (p=" << num(r.p_value) << ")";
      if (r.name == "inter-arrival KS vs Exp(1)") o.note << " [min gap " << num(r.detail("min_gap")) << "]";
      if (r.name == "cluster marks vs cluster map") o.note << " [" << num(100.0 * (1.0 - r.statistic)) << "% follow]";
      o.note << ",";
    }
  }
  o.require(b.theta_drift.pass, "theta drift");
  o.note << " theta drift " << num(b.theta_drift.statistic);
  emit(8, "periodic-point clusters", o);
}

void criterion9() {
  Outcome o;
  const auto pat = ball_pattern({-0.2, 1.8, 0.6, -0.4}, {0.5, 0.7}, 3);
  o.require(pat == std::vector<bool>{true, false, true, false}, "pattern");
  o.note << " pattern";
  for (bool in : pat) o.note << (in ? " in" : " out");
  emit(9, "contraction ball pattern", o);
}

void criterion10() {
  Outcome o;
  PeriodicSiteConfig site;
  const Q0Selection sel = select_q0(site);
  for (double eps : {0.05, 0.025}) {
    RandomStream rng(derive_seed(111, 0, static_cast<std::uint64_t>(eps * 1000)));
    const TestReport r = validate_separation(site, eps, 100'000, rng);
    o.require(r.pass, "separation@" + num(eps));
    o.note << " eps " << eps << ": " << r.detail("violations") << " violations in " << r.n << " (window "
           << r.detail("window") << ");";
  }
  RandomStream fresh(0x5eed'f00dULL);
  const HyperbolicMatrix m(site.map.derivative());
  const double ratio = contraction_ratio(m, sel.certificate.q, 100'000, sel.certificate.n_check, fresh);
  o.require(ratio <= 0.25, "certificate");
  o.note << " q=" << sel.certificate.q << " q0=" << sel.q0 << ", fresh re-verification ratio " << num(ratio);
  emit(10, "pruned-set separation", o);
}

void criterion11() {
  Outcome o;
  const ToralSystem cat(ToralAutomorphism::cat());
  const Dynamics sys = cat;
  const ExperimentConfig c = battery_config(20.0, 112);
  const TargetSpec ball = MetricBall{{0.0, 0.0}, 0.05};
  const auto rs = simulate_eps(sys, ball, 0.01, c, 0);
  const TestReport d = dispersion_test(rs, 1.0);
  o.require(d.statistic > 1.0 && d.p_value < 0.01, "dispersion");
  o.note << " unpruned ball dispersion " << num(d.statistic) << " (p=" << num(d.p_value) << ");";
  const int q0 = select_q0(PeriodicSiteConfig{}).q0;
  for (double eps : {0.1, 0.05, 0.025}) {
    RandomStream rng(derive_seed(113, 0, static_cast<std::uint64_t>(eps * 1000)));
    const int p_eps = static_cast<int>(std::floor(std::log(1.0 / eps)));
    const auto e = short_return_prob(cat, MetricBall{{0.0, 0.0}, eps}, p_eps, 100'000, rng);
    const auto pr = short_return_prob(cat, ClusterPruned{{0.0, 0.0}, 1, q0, eps}, p_eps, 100'000, rng);
    o.require(e.lo > 0.2, "short return@" + num(eps));
    o.note << " eps " << eps << ": ball " << num(e.p) << " [" << num(e.lo) << ", " << num(e.hi) << "], pruned "
           << num(pr.p) << ";";
  }
  emit(11, "negative controls", o);
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    criterion3();
    billiard_battery(4, "stadium ball", BilliardSystem(build_stadium(2.0)), MetricBall{{3.1, 0.3}, 0.05},
                     TimeBase::map, uniform_square_model(), false, 104);
    billiard_battery(5, "Sinai strip", BilliardSystem(build_sinai(default_sinai_scatterers())),
                     PositionStrip{0.7, 0.01}, TimeBase::map, strip_model(), true, 105);
    billiard_battery(6, "diamond barrier (flow time)", BilliardSystem(default_diamond()), CornerBarrier{0, 0.02},
                     TimeBase::flow, barrier_model(), false, 106);
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    criterion11();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 3;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
