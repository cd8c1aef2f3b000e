#include "stp/process.hpp"

#include <algorithm>

namespace stp {

std::size_t Realization::count_in(double t1, double t2, const Box* box) const {
  std::size_t n = 0;
  for (const MarkedPoint& p : points) {
    if (p.t <= t1 || p.t > t2) continue;
    if (box && mark_dim > 0) {
      bool in = true;
      for (int i = 0; i < mark_dim; ++i) {
        if (p.mark[i] < box->lo[i] || p.mark[i] >= box->hi[i]) in = false;
      }
      if (!in) continue;
    }
    ++n;
  }
  return n;
}

namespace {

Realization skeleton(const VisitTrace& tr, const TargetSpec& spec, double mu, double horizon_T) {
  Realization r;
  r.window_T = horizon_T;
  r.epsilon = target_epsilon(spec);
  r.mu_target = mu;
  r.mark_dim = mark_dimension(spec);
  r.collisions = tr.steps;
  r.degenerate = tr.degenerate ? 1 : 0;
  r.truncated = tr.degenerate;
  r.raw_events = tr.visits.size();
  return r;
}

}  // namespace

Realization map_view(const VisitTrace& tr, const TargetSpec& spec, double mu, double horizon_T) {
  Realization r = skeleton(tr, spec, mu, horizon_T);
  for (const Visit& v : tr.visits) {
    const double t = static_cast<double>(v.step) * mu;
    if (t <= horizon_T) r.points.push_back({t, v.mark});
  }
  if (!tr.degenerate && static_cast<double>(tr.steps) * mu < horizon_T * (1.0 - 1e-12) &&
      static_cast<double>(tr.steps + 1) * mu <= horizon_T) {
    r.truncated = true;
  }
  return r;
}

Realization flow_view(const VisitTrace& tr, const TargetSpec& spec, double mu, double tau_bar,
                      double horizon_T) {
  Realization r = skeleton(tr, spec, mu, horizon_T);
  r.time_base = TimeBase::flow;
  r.tau_bar = tau_bar;
  const double scale = mu / tau_bar;
  for (const Visit& v : tr.visits) {
    const double t = v.flow_time * scale;
    if (t <= horizon_T) r.points.push_back({t, v.mark});
  }
  if (tr.flow_time * scale < horizon_T) r.truncated = true;
  return r;
}

Realization temporal_projection(const Realization& r) {
  Realization out = r;
  out.mark_dim = 0;
  for (MarkedPoint& p : out.points) p.mark = {0.0, 0.0};
  return out;
}

Realization theta_rescale(const Realization& r, double theta) {
  if (!(theta > 0.0) || theta > 1.0) throw ProcessError("theta must lie in (0, 1]");
  Realization out = r;
  out.window_T = r.window_T / theta;
  for (MarkedPoint& p : out.points) p.t /= theta;
  return out;
}

ClusterRealization extract_cluster_process(const ToralSystem& sys, const ClusterPruned& spec, Vec2 x,
                                           double mu_A, double horizon_T, std::uint64_t seed,
                                           std::uint64_t budget) {
  const std::uint64_t n_max = steps_for(horizon_T, mu_A, budget);
  const ToralDetector det(sys, spec);
  const std::uint64_t gap = static_cast<std::uint64_t>(spec.q0) * static_cast<std::uint64_t>(spec.period);
  const std::uint64_t run = n_max + gap;

  struct BallVisit {
    std::uint64_t step;
    Mark mark;
  };
  std::vector<BallVisit> visits;
  Vec2 y = x;
  for (std::uint64_t n = 1; n <= run; ++n) {
    y = sys.map.apply(y);
    if (det.in_ball(y)) visits.push_back({n, det.normalize(y)});
  }

  ClusterRealization cr;
  cr.mu_A = mu_A;
  cr.mu_B = 4.0 * spec.eps * spec.eps;
  cr.theta = mu_A / cr.mu_B;
  if (!(cr.theta > 0.0 && cr.theta <= 1.0)) throw ProcessError("extremal index outside (0, 1]");
  cr.window_T = horizon_T;
  cr.seed = seed;
  cr.q0 = spec.q0;
  cr.period = spec.period;

  auto base = [&](Realization& r) {
    r.window_T = horizon_T;
    r.epsilon = spec.eps;
    r.mu_target = mu_A;
    r.seed = seed;
    r.collisions = run;
  };
  base(cr.anchors);
  base(cr.ball_visits);

  std::size_t i = 0;
  while (i < visits.size()) {
    std::size_t j = i;
    while (j + 1 < visits.size() && visits[j + 1].step - visits[j].step <= gap) ++j;
    const bool starts_inside = visits[i].step <= n_max;
    const bool ends_inside = visits[j].step <= n_max;
    if (starts_inside && ends_inside) {
      Cluster c;
      c.anchor_step = visits[j].step;
      c.anchor_time = static_cast<double>(c.anchor_step) * mu_A;
      for (std::size_t k = i; k <= j; ++k) {
        c.marks.push_back(visits[k].mark);
        c.steps.push_back(visits[k].step);
      }
      cr.anchors.points.push_back({c.anchor_time, visits[j].mark});
      cr.clusters.push_back(std::move(c));
    } else if (starts_inside) {
      ++cr.dropped_open;
    }
    for (std::size_t k = i; k <= j; ++k) {
      if (visits[k].step <= n_max) {
        cr.ball_visits.points.push_back({static_cast<double>(visits[k].step) * mu_A, visits[k].mark});
      }
    }
    i = j + 1;
  }
  cr.anchors.raw_events = cr.anchors.points.size();
  cr.ball_visits.raw_events = cr.ball_visits.points.size();
  return cr;
}

namespace {

bool in_unit(Vec2 y, BallNorm norm) {
  return norm == BallNorm::sup ? std::max(std::abs(y.x), std::abs(y.y)) < 1.0 : y.norm() < 1.0;
}

}  // namespace

bool in_pruned_limit(const Mat2& dtp, int q0, Vec2 y, BallNorm norm) {
  if (!in_unit(y, norm)) return false;
  Vec2 z = y;
  for (int j = 1; j <= q0; ++j) {
    z = dtp * z;
    if (in_unit(z, norm)) return false;
  }
  return true;
}

std::vector<PsiElement> psi_predict(const Mat2& dt, int p, int q0, Vec2 x, BallNorm norm) {
  if (p < 1 || q0 < 1) throw ProcessError("period and q0 must be positive");
  if (x.x == 0.0 && x.y == 0.0) throw ProcessError("the origin is excluded from the cluster map");
  const Mat2 fwd = dt.pow(p);
  const Mat2 back = fwd.inverse();
  if (!in_pruned_limit(fwd, q0, x, norm)) throw ProcessError("mark outside the pruned limit set");
  constexpr int kCap = 1000;
  std::vector<PsiElement> chain;
  Vec2 y = x;
  for (int k = 0; k <= kCap; ++k) {
    const bool in = in_unit(y, norm);
    chain.push_back({y, in});
    if (in) {
      bool entry = true;
      Vec2 z = y;
      for (int j = 1; j <= q0 && entry; ++j) {
        z = back * z;
        if (in_unit(z, norm)) entry = false;
      }
      if (entry) return chain;
    }
    y = back * y;
  }
  throw ProcessError("cluster length exceeds 1000; mark too close to the unstable direction");
}

}  // namespace stp
