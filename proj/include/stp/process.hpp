#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stp/targets.hpp"

namespace stp {

class ProcessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested horizon needs more map steps than the configured budget.
class StepBudgetError : public ProcessError {
 public:
  StepBudgetError(std::uint64_t needed, std::uint64_t budget)
      : ProcessError("horizon needs " + std::to_string(needed) + " steps, budget is " +
                     std::to_string(budget)),
        needed_(needed) {}
  std::uint64_t needed() const { return needed_; }

 private:
  std::uint64_t needed_;
};

inline constexpr std::uint64_t kDefaultStepBudget = 100'000'000;

struct MarkedPoint {
  double t{0.0};
  Mark mark{};
};

enum class TimeBase { map, flow };

struct Realization {
  std::vector<MarkedPoint> points;
  double window_T{0.0};
  double epsilon{0.0};
  double mu_target{0.0};
  std::uint64_t raw_events{0};
  std::uint64_t collisions{0};
  std::uint64_t degenerate{0};   ///< 1 when the orbit stopped at a corner or tangency
  bool truncated{false};
  std::uint64_t seed{0};
  int mark_dim{2};
  TimeBase time_base{TimeBase::map};
  double tau_bar{1.0};

  std::size_t count() const { return points.size(); }
  /// Number of points with t in (t1, t2] and mark in the box (marks ignored when dim = 0).
  std::size_t count_in(double t1, double t2, const Box* box = nullptr) const;
};

/// One visit along a traced orbit.
struct Visit {
  std::uint64_t step{0};
  double flow_time{0.0};
  Mark mark{};
};

struct VisitTrace {
  std::vector<Visit> visits;
  std::uint64_t steps{0};
  double flow_time{0.0};
  bool degenerate{false};
};

/// Iterate until `max_steps` steps or flow time beyond `max_flow`, recording
/// every event the detector reports.
template <class System>
VisitTrace trace_visits(const System& sys, const DetectorFor_t<System>& det,
                        typename System::State x, std::uint64_t max_steps,
                        double max_flow = std::numeric_limits<double>::infinity()) {
  VisitTrace tr;
  double s = 0.0;
  for (std::uint64_t n = 1; n <= max_steps; ++n) {
    const auto t = sys.advance(x);
    if (!t.ok()) {
      tr.degenerate = true;
      break;
    }
    const double tau = System::roof(t);
    if (auto hit = det.probe(t)) tr.visits.push_back({n, s + hit->fraction * tau, hit->mark});
    s += tau;
    tr.steps = n;
    tr.flow_time = s;
    x = System::next(t);
    if (s > max_flow) break;
  }
  return tr;
}

inline std::uint64_t steps_for(double horizon_T, double mu, std::uint64_t budget) {
  if (!(mu > 0.0)) throw ProcessError("target measure must be positive");
  if (!(horizon_T > 0.0)) throw ProcessError("horizon must be positive");
  const double need = std::floor(horizon_T / mu);
  if (need > static_cast<double>(budget)) {
    throw StepBudgetError(need > 1.8e19 ? UINT64_MAX : static_cast<std::uint64_t>(need), budget);
  }
  return static_cast<std::uint64_t>(need);
}

/// Map-time process: atoms (n mu(A), H(T^n x)) for n <= horizon_T / mu(A).
template <class System>
Realization extract_map_process(const System& sys, const TargetSpec& spec, typename System::State x,
                                double mu, double horizon_T, std::uint64_t seed = 0,
                                std::uint64_t budget = kDefaultStepBudget) {
  const std::uint64_t n_max = steps_for(horizon_T, mu, budget);
  const DetectorFor_t<System> det(sys, spec);
  const VisitTrace tr = trace_visits(sys, det, x, n_max);
  Realization r;
  r.window_T = horizon_T;
  r.epsilon = target_epsilon(spec);
  r.mu_target = mu;
  r.seed = seed;
  r.mark_dim = mark_dimension(spec);
  r.collisions = tr.steps;
  r.degenerate = tr.degenerate ? 1 : 0;
  r.truncated = tr.degenerate;
  r.raw_events = tr.visits.size();
  r.tau_bar = sys.tau_bar();
  for (const Visit& v : tr.visits) {
    const double t = static_cast<double>(v.step) * mu;
    if (t <= horizon_T) r.points.push_back({t, v.mark});
  }
  return r;
}

/// Flow-time process: atoms at physical time s of each event, normalized by mu(A)/tau_bar.
template <class System>
Realization extract_flow_process(const System& sys, const TargetSpec& spec, typename System::State x,
                                 double mu, double tau_bar, double horizon_T, std::uint64_t seed = 0,
                                 std::uint64_t budget = kDefaultStepBudget) {
  if (!(tau_bar > 0.0)) throw ProcessError("mean roof must be positive");
  steps_for(horizon_T, mu, budget);
  const DetectorFor_t<System> det(sys, spec);
  const double max_flow = horizon_T * tau_bar / mu;
  const VisitTrace tr = trace_visits(sys, det, x, budget, max_flow);
  Realization r;
  r.window_T = horizon_T;
  r.epsilon = target_epsilon(spec);
  r.mu_target = mu;
  r.seed = seed;
  r.mark_dim = mark_dimension(spec);
  r.collisions = tr.steps;
  r.degenerate = tr.degenerate ? 1 : 0;
  r.truncated = tr.degenerate || tr.flow_time <= max_flow;
  r.raw_events = tr.visits.size();
  r.time_base = TimeBase::flow;
  r.tau_bar = tau_bar;
  const double scale = mu / tau_bar;
  for (const Visit& v : tr.visits) {
    const double t = v.flow_time * scale;
    if (t <= horizon_T) r.points.push_back({t, v.mark});
  }
  return r;
}

/// Map- and flow-normalized views of one traced orbit.
Realization map_view(const VisitTrace& tr, const TargetSpec& spec, double mu, double horizon_T);
Realization flow_view(const VisitTrace& tr, const TargetSpec& spec, double mu, double tau_bar,
                      double horizon_T);

/// Times only.
Realization temporal_projection(const Realization& r);
/// Times divided by theta; marks unchanged.
Realization theta_rescale(const Realization& r, double theta);

// ------------------------------------------------------------------ clusters

struct Cluster {
  std::uint64_t anchor_step{0};
  double anchor_time{0.0};       ///< anchor_step * mu(A)
  std::vector<Mark> marks;       ///< ball-visit marks in time order; the last is the anchor
  std::vector<std::uint64_t> steps;
  std::size_t size() const { return marks.size(); }
};

struct ClusterRealization {
  std::vector<Cluster> clusters;
  double theta{1.0};
  double mu_A{0.0};
  double mu_B{0.0};
  double window_T{0.0};            ///< horizon in mu(A) time
  Realization anchors;             ///< A-events, times n mu(A)
  Realization ball_visits;         ///< every ball visit, times n mu(A)
  std::uint64_t dropped_open{0};   ///< clusters whose anchor fell beyond the horizon
  std::uint64_t seed{0};
  int q0{1};
  int period{1};
};

ClusterRealization extract_cluster_process(const ToralSystem& sys, const ClusterPruned& spec, Vec2 x,
                                           double mu_A, double horizon_T, std::uint64_t seed = 0,
                                           std::uint64_t budget = kDefaultStepBudget);

enum class BallNorm { sup, euclidean };

struct PsiElement {
  Vec2 mark;
  bool in_ball{true};
};

/// Predicted cluster of an anchor mark x: DT^{-kp} x for k = 0..l_x, where l_x
/// is the first k whose point has no earlier ball visit within q0 periods.
std::vector<PsiElement> psi_predict(const Mat2& dt, int p, int q0, Vec2 x,
                                    BallNorm norm = BallNorm::sup);

/// Membership of y in B(0,1) with no forward visit DT^{jp} y in B(0,1), j = 1..q0.
bool in_pruned_limit(const Mat2& dtp, int q0, Vec2 y, BallNorm norm = BallNorm::sup);

}  // namespace stp
