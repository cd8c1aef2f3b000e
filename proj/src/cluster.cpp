#include "stp/cluster.hpp"

#include <cmath>

#include "stp/parallel.hpp"

namespace stp {

void validate_site(const PeriodicSiteConfig& c) {
  if (c.period < 1) throw ClusterError("period must be at least 1");
  if (c.q0 < 0) throw ClusterError("q0 must be non-negative (0 selects it)");
  if (!(c.a > 0.0)) throw ClusterError("separation coefficient a must be positive");
  if (c.eps_ladder.empty()) throw ClusterError("empty epsilon ladder");
  for (double e : c.eps_ladder) {
    if (!(e > 0.0 && e < 0.5)) throw ClusterError("epsilon must lie in (0, 0.5)");
  }
  Vec2 y = wrap_torus(c.x0);
  for (int k = 1; k <= c.period; ++k) {
    y = c.map.apply(y);
    const bool back = torus_delta(y, c.x0).norm() < 1e-9;
    if (back && k < c.period) throw ClusterError("x0 has a smaller period than configured");
    if (!back && k == c.period) throw ClusterError("x0 is not periodic with the configured period");
  }
}

Q0Selection select_q0(const PeriodicSiteConfig& c, const ContractionOptions& opts) {
  if (c.period < 1) throw ClusterError("period must be at least 1");
  const HyperbolicMatrix dt(c.map.derivative().pow(c.period));
  Q0Selection s;
  s.certificate = contraction_exponent(dt, opts);
  s.q0 = 2 * s.certificate.q;
  return s;
}

namespace {

int effective_q0(const PeriodicSiteConfig& c) { return c.q0 > 0 ? c.q0 : select_q0(c).q0; }

}  // namespace

TestReport validate_separation(const PeriodicSiteConfig& c, double eps, std::uint64_t budget,
                               RandomStream& rng, bool pruned) {
  if (budget == 0) throw ClusterError("separation check needs a positive budget");
  const ToralSystem sys(c.map);
  const int q0 = effective_q0(c);
  const TargetSpec spec = pruned ? TargetSpec{ClusterPruned{c.x0, c.period, q0, eps}}
                                 : TargetSpec{MetricBall{c.x0, eps}};
  const ToralDetector det(sys, spec);
  const auto window = static_cast<int>(std::floor(c.a * std::log(1.0 / eps)));
  std::uint64_t got = 0, bad = 0, draws = 0;
  const std::uint64_t cap = std::max<std::uint64_t>(10'000'000, 10'000 * budget);
  while (got < budget) {
    if (++draws > cap) throw ClusterError("separation sampler starved");
    Vec2 y = wrap_torus(c.x0 + Vec2{eps * (2.0 * rng.uniform() - 1.0), eps * (2.0 * rng.uniform() - 1.0)});
    if (!det.contains(y)) continue;
    ++got;
    for (int n = 1; n <= window; ++n) {
      y = sys.map.apply(y);
      if (det.contains(y)) {
        ++bad;
        break;
      }
    }
  }
  TestReport r;
  r.name = pruned ? "separation of the pruned set" : "separation of the unpruned ball";
  r.null_desc = "no return to the target within floor(a log(1/eps)) steps";
  r.statistic = static_cast<double>(bad);
  r.n = got;
  r.p_value = bad == 0 ? 1.0 : 0.0;
  r.pass = bad == 0;
  r.details = {{"eps", eps},
               {"window", static_cast<double>(window)},
               {"q0", static_cast<double>(q0)},
               {"violations", static_cast<double>(bad)},
               {"violation_rate", static_cast<double>(bad) / static_cast<double>(got)},
               {"outside_regime", (eps > 0.1 || window < 1) ? 1.0 : 0.0}};
  return r;
}

TestReport cluster_linearization(const std::vector<ClusterRealization>& crs, const ToralSystem& sys,
                                 const ClusterPruned& spec, double lin_alpha, double max_fraction) {
  const Mat2 dt = sys.map.derivative();
  const Mat2 dtp = dt.pow(spec.period);
  const double tol = 10.0 * std::pow(spec.eps, lin_alpha);
  std::size_t clusters = 0, bad = 0, order_bad = 0;
  for (const auto& cr : crs) {
    for (const Cluster& c : cr.clusters) {
      ++clusters;
      const Vec2 anchor{c.marks.back()[0], c.marks.back()[1]};
      bool ok = true;
      std::vector<PsiElement> chain;
      try {
        chain = psi_predict(dt, spec.period, spec.q0, anchor);
      } catch (const ProcessError&) {
        ok = false;
      }
      if (ok) {
        std::size_t in = 0;
        for (const auto& e : chain) in += e.in_ball ? 1 : 0;
        if (in != c.size()) ok = false;
      }
      for (std::size_t i = 0; ok && i < c.size(); ++i) {
        const std::uint64_t back = c.anchor_step - c.steps[i];
        if (back % static_cast<std::uint64_t>(spec.period) != 0) {
          ok = false;
          break;
        }
        const std::size_t k = back / static_cast<std::uint64_t>(spec.period);
        if (k >= chain.size() || !chain[k].in_ball) {
          ok = false;
          break;
        }
        const Vec2 d = chain[k].mark - Vec2{c.marks[i][0], c.marks[i][1]};
        if (std::max(std::abs(d.x), std::abs(d.y)) > tol) ok = false;
      }
      if (!ok) ++bad;
      bool ordered = in_pruned_limit(dtp, spec.q0, anchor);
      for (std::size_t i = 0; ordered && i + 1 < c.size(); ++i) {
        if (in_pruned_limit(dtp, spec.q0, {c.marks[i][0], c.marks[i][1]})) ordered = false;
      }
      if (!ordered) ++order_bad;
    }
  }
  if (clusters == 0) throw StatsError("no clusters to check");
  const double frac = static_cast<double>(bad) / static_cast<double>(clusters);
  const double order_frac = static_cast<double>(order_bad) / static_cast<double>(clusters);
  TestReport r;
  r.name = "cluster marks vs cluster map";
  r.null_desc = "violation fraction below " + std::to_string(max_fraction);
  r.statistic = frac;
  r.n = clusters;
  r.p_value = (frac < max_fraction && order_frac < max_fraction) ? 1.0 : 0.0;
  r.pass = frac < max_fraction && order_frac < max_fraction;
  r.details = {{"clusters", static_cast<double>(clusters)},
               {"violations", static_cast<double>(bad)},
               {"ordering_violations", static_cast<double>(order_bad)},
               {"tolerance", tol}};
  return r;
}

TestReport rescale_identity(const std::vector<ClusterRealization>& crs) {
  std::size_t checks = 0, mismatches = 0;
  for (const auto& cr : crs) {
    const Realization& n = cr.ball_visits;
    const Realization scaled = theta_rescale(n, cr.theta);
    for (int k = 1; k <= 64; ++k) {
      const double t = scaled.window_T * (static_cast<double>(k) - 0.37) / 64.0;
      ++checks;
      if (scaled.count_in(0.0, t) != n.count_in(0.0, cr.theta * t)) ++mismatches;
    }
    ++checks;
    if (scaled.count() != n.count()) ++mismatches;
  }
  TestReport r;
  r.name = "theta rescale count identity";
  r.null_desc = "count of rescaled process on [0,t] equals count on [0, theta t]";
  r.statistic = static_cast<double>(mismatches);
  r.n = checks;
  r.p_value = mismatches == 0 ? 1.0 : 0.0;
  r.pass = mismatches == 0;
  r.details = {{"checks", static_cast<double>(checks)}, {"mismatches", static_cast<double>(mismatches)}};
  return r;
}

TestReport theta_stability(const std::vector<double>& eps, const std::vector<double>& theta, double max_rel) {
  if (eps.size() != theta.size()) throw ClusterError("ladder and theta sizes differ");
  double worst = 0.0;
  TestReport r;
  r.name = "extremal index stability";
  r.null_desc = "relative change of theta-hat between ladder steps below " + std::to_string(max_rel);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    r.details.push_back({"theta@" + std::to_string(eps[i]), theta[i]});
    if (i > 0) worst = std::max(worst, std::abs(theta[i] - theta[i - 1]) / theta[i - 1]);
  }
  int trend = 0;
  if (theta.size() >= 2) trend = theta.back() > theta.front() ? 1 : (theta.back() < theta.front() ? -1 : 0);
  r.details.push_back({"trend", static_cast<double>(trend)});
  r.statistic = worst;
  r.n = theta.size();
  r.p_value = worst < max_rel ? 1.0 : 0.0;
  r.pass = worst < max_rel;
  return r;
}

bool EpsilonBundle::pass() const {
  for (const auto& r : reports) {
    if (!r.pass) return false;
  }
  return true;
}

bool ClusterRunBundle::pass() const {
  for (const auto& b : per_eps) {
    if (!b.pass()) return false;
  }
  return theta_drift.pass;
}

ClusterRunBundle run_cluster_experiment(const PeriodicSiteConfig& c, const ClusterRunOptions& o) {
  validate_site(c);
  if (o.seeds < 1) throw ClusterError("need at least one seed");
  ClusterRunBundle out;
  const Q0Selection sel = select_q0(c);
  out.certificate = sel.certificate;
  out.q0 = c.q0 > 0 ? c.q0 : sel.q0;
  const ToralSystem sys(c.map);
  const Mat2 dt = c.map.derivative();

  std::vector<double> thetas;
  for (std::size_t ei = 0; ei < c.eps_ladder.size(); ++ei) {
    const double eps = c.eps_ladder[ei];
    const ClusterPruned spec{c.x0, c.period, out.q0, eps};
    EpsilonBundle b;
    b.eps = eps;
    RandomStream mrng(derive_seed(o.master_seed, 1000 + ei, 0));
    b.mu_A = measure(sys, spec, o.measure_budget, mrng);
    b.mu_B = 4.0 * eps * eps;
    b.theta_hat = b.mu_A.estimate / b.mu_B;
    thetas.push_back(b.theta_hat);

    std::vector<ClusterRealization> crs(static_cast<std::size_t>(o.seeds));
    parallel_for(crs.size(), o.jobs, [&](std::size_t s) {
      const std::uint64_t seed = derive_seed(o.master_seed, ei, s);
      RandomStream r(seed);
      crs[s] = extract_cluster_process(sys, spec, sys.sample(r), b.mu_A.estimate, o.horizon_T, seed);
    });

    RandomStream lrng(derive_seed(o.master_seed, 2000 + ei, 0));
    b.law = psi_size_law(dt, c.period, out.q0, o.psi_samples, lrng);

    std::vector<Realization> anchors;
    for (const auto& cr : crs) {
      anchors.push_back(cr.anchors);
      b.dropped_open += cr.dropped_open;
      for (const auto& cl : cr.clusters) b.cluster_sizes.push_back(cl.size());
    }
    const IntensityModel model = pruned_model(sys, spec);
    b.reports.push_back(interarrival_test(anchors, o.alpha));
    b.reports.push_back(kallenberg_check(anchors, auto_rectangles(model, o.horizon_T), model, o.alpha));
    b.reports.push_back(spatial_gof(pooled_marks(anchors), model, Grid{}, o.alpha));
    b.reports.push_back(cluster_linearization(crs, sys, spec, o.lin_alpha));
    b.reports.push_back(rescale_identity(crs));
    RandomStream crng(derive_seed(o.master_seed, 3000 + ei, 0));
    b.reports.push_back(compound_poisson_test(crs, b.law, o.count_window, crng, o.alpha));
    out.per_eps.push_back(std::move(b));
  }
  out.theta_drift = theta_stability(c.eps_ladder, thetas);
  return out;
}

}  // namespace stp
