#include "stp/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHalfPi = 0.5 * std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw TargetError("epsilon must be positive");
}

}  // namespace

double target_epsilon(const TargetSpec& t) {
  return std::visit(overloaded{[](const IntervalTarget& i) { return i.hi - i.lo; },
                               [](const auto& s) { return s.eps; }},
                    t);
}

TargetSpec with_epsilon(const TargetSpec& t, double eps) {
  return std::visit(overloaded{[&](IntervalTarget i) -> TargetSpec {
                                 i.hi = i.lo + eps;
                                 return i;
                               },
                               [&](auto s) -> TargetSpec {
                                 s.eps = eps;
                                 return s;
                               }},
                    t);
}

std::string target_kind(const TargetSpec& t) {
  return std::visit(overloaded{[](const MetricBall&) { return std::string("ball"); },
                               [](const PositionStrip&) { return std::string("strip"); },
                               [](const CornerBarrier&) { return std::string("barrier"); },
                               [](const ClusterPruned&) { return std::string("pruned"); },
                               [](const IntervalTarget&) { return std::string("interval"); }},
                    t);
}

int mark_dimension(const TargetSpec& t) { return std::holds_alternative<IntervalTarget>(t) ? 1 : 2; }

// ------------------------------------------------------------------ barrier

namespace {

/// Root of |w + u side|^2 = R^2 closest to u = 0.
std::optional<double> near_root(Vec2 w, Vec2 side, double radius) {
  const double b = w.dot(side);
  const double disc = b * b - (w.norm2() - radius * radius);
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double u1 = -b - s;
  const double u2 = -b + s;
  return std::abs(u1) < std::abs(u2) ? u1 : u2;
}

}  // namespace

BarrierGeometry barrier_geometry(const Table& table, int corner, double eps) {
  check_eps(eps);
  if (table.corners().size() != 4) throw TargetError("corner barrier needs a diamond table");
  if (corner < 0 || corner > 3) throw TargetError("corner index must be in 0..3");
  const Corner& c = table.corners()[static_cast<std::size_t>(corner)];
  const std::size_t n = table.pieces().size();
  const ArcPiece& in = table.pieces()[(c.piece + n - 1) % n].as_arc();
  const ArcPiece& out = table.pieces()[c.piece].as_arc();
  const Vec2 back = (c.point - in.center).perp() / in.radius;
  const Vec2 fwd = -(c.point - out.center).perp() / out.radius;
  BarrierGeometry g;
  g.corner = c.point;
  g.axis = (back + fwd).normalized();
  g.side = g.axis.perp();
  g.eps = eps;

  auto chord = [&](double s) -> std::optional<std::pair<double, double>> {
    const Vec2 base = c.point + g.axis * s;
    const auto u1 = near_root(base - in.center, g.side, in.radius);
    const auto u2 = near_root(base - out.center, g.side, out.radius);
    if (!u1 || !u2) return std::nullopt;
    return std::pair{std::min(*u1, *u2), std::max(*u1, *u2)};
  };
  auto width = [&](double s) {
    const auto ch = chord(s);
    return ch ? ch->second - ch->first : std::numeric_limits<double>::infinity();
  };

  double hi = eps;
  int guard = 0;
  while (width(hi) < eps) {
    hi *= 2.0;
    if (++guard > 60) throw TargetError("barrier width never reaches epsilon");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (width(mid) < eps ? lo : hi) = mid;
  }
  g.offset = 0.5 * (lo + hi);
  const auto ch = chord(g.offset);
  if (!ch) throw TargetError("barrier does not meet both arcs");
  g.lo = ch->first;
  g.hi = ch->second;
  const Vec2 base = c.point + g.axis * g.offset;
  g.a1 = base + g.side * g.lo;
  g.a2 = base + g.side * g.hi;
  // Both endpoints must lie on the arcs that bound the corner.
  for (const Vec2& p : {g.a1, g.a2}) {
    const double d_in = std::abs((p - in.center).norm() - in.radius);
    const double d_out = std::abs((p - out.center).norm() - out.radius);
    if (std::min(d_in, d_out) > 1e-9) throw TargetError("barrier endpoint off the boundary");
  }
  if (g.offset > 0.5 * std::min(in.radius, out.radius)) {
    throw TargetError("epsilon too large for a barrier near the corner");
  }
  return g;
}

// ------------------------------------------------------------------ billiard detector

BilliardDetector::BilliardDetector(const BilliardSystem& sys, const TargetSpec& spec)
    : table_(sys.table), spec_(spec) {
  std::visit(overloaded{
                 [&](const MetricBall& b) {
                   check_eps(b.eps);
                   if (std::abs(b.center.y) > kHalfPi) throw TargetError("ball centre angle outside [-pi/2, pi/2]");
                 },
                 [&](const PositionStrip& s) { check_eps(s.eps); },
                 [&](const CornerBarrier& c) { barrier_ = barrier_geometry(*table_, c.corner, c.eps); },
                 [&](const ClusterPruned&) {
                   throw TargetError("pruned targets are defined for toral maps only");
                 },
                 [&](const IntervalTarget&) { throw TargetError("interval targets need a b-adic map"); }},
             spec_);
}

bool BilliardDetector::contains(const ReflectedVector& x) const {
  return std::visit(
      overloaded{[&](const MetricBall& b) {
                   const double dr = std::remainder(x.r - b.center.x, table_->perimeter());
                   return std::abs(dr) < b.eps && std::abs(x.phi - b.center.y) < b.eps;
                 },
                 [&](const PositionStrip& s) {
                   return std::abs(std::remainder(x.r - s.r0, table_->perimeter())) < s.eps;
                 },
                 [](const auto&) -> bool {
                   throw TargetError("membership of a barrier is a property of a flight");
                 }},
      spec_);
}

Mark BilliardDetector::normalize(const ReflectedVector& x) const {
  if (!contains(x)) throw TargetError("normalize called on a non-member");
  return std::visit(
      overloaded{[&](const MetricBall& b) {
                   const double dr = std::remainder(x.r - b.center.x, table_->perimeter());
                   return Mark{dr / b.eps, (x.phi - b.center.y) / b.eps};
                 },
                 [&](const PositionStrip& s) {
                   return Mark{std::remainder(x.r - s.r0, table_->perimeter()) / s.eps, x.phi};
                 },
                 [](const auto&) -> Mark { throw TargetError("unsupported target"); }},
      spec_);
}

std::optional<Hit> BilliardDetector::probe(const FlightRecord& f) const {
  if (!f.ok()) return std::nullopt;
  if (!barrier_) {
    if (!contains(f.after)) return std::nullopt;
    return Hit{normalize(f.after), 1.0};
  }
  const BarrierGeometry& g = *barrier_;
  const double a = (f.from - g.corner).dot(g.axis);
  const double b = (f.to - g.corner).dot(g.axis);
  if (!(a > g.offset && b <= g.offset)) return std::nullopt;
  const double t = (a - g.offset) / (a - b);
  const Vec2 p = f.from + (f.to - f.from) * t;
  const double u = (p - g.corner).dot(g.side);
  if (u < g.lo || u > g.hi) return std::nullopt;
  const Vec2 v = (f.to - f.from).normalized();
  const double v1 = v.dot(g.axis);
  const double v2 = v.dot(g.side);
  const double mid = 0.5 * (g.lo + g.hi);
  return Hit{{(u - mid) / g.eps, std::atan2(-v2, -v1)}, t};
}

// ------------------------------------------------------------------ toral detector

ToralDetector::ToralDetector(const ToralSystem& sys, const TargetSpec& spec) : map_(sys.map), spec_(spec) {
  std::visit(overloaded{[&](const MetricBall& b) {
                          center_ = wrap_torus(b.center);
                          eps_ = b.eps;
                        },
                        [&](const ClusterPruned& c) {
                          center_ = wrap_torus(c.center);
                          eps_ = c.eps;
                          period_ = c.period;
                          q0_ = c.q0;
                          if (c.q0 < 1) throw TargetError("pruning depth q0 must be at least 1");
                          if (c.period < 1) throw TargetError("period must be positive");
                          for (int k = 1; k <= c.period; ++k) {
                            Vec2 y = center_;
                            for (int j = 0; j < k; ++j) y = map_.apply(y);
                            const Vec2 d = torus_delta(y, center_);
                            const bool back = std::max(std::abs(d.x), std::abs(d.y)) < 1e-9;
                            if (back != (k == c.period)) {
                              throw TargetError("centre is not a periodic point of smallest period " +
                                                std::to_string(c.period));
                            }
                          }
                        },
                        [&](const auto&) { throw TargetError("target not defined for toral maps"); }},
             spec_);
  check_eps(eps_);
  if (eps_ >= 0.5) throw TargetError("torus ball radius must be below 1/2");
}

bool ToralDetector::in_ball(Vec2 x) const {
  const Vec2 d = torus_delta(x, center_);
  return std::abs(d.x) < eps_ && std::abs(d.y) < eps_;
}

bool ToralDetector::contains(Vec2 x) const {
  if (!in_ball(x)) return false;
  Vec2 y = x;
  for (int j = 1; j <= q0_; ++j) {
    for (int k = 0; k < period_; ++k) y = map_.apply(y);
    if (in_ball(y)) return false;
  }
  return true;
}

Mark ToralDetector::normalize(Vec2 x) const {
  if (!in_ball(x)) throw TargetError("normalize called on a non-member");
  const Vec2 d = torus_delta(x, center_);
  return {d.x / eps_, d.y / eps_};
}

std::optional<Hit> ToralDetector::probe(const MapStep<Vec2>& s) const {
  if (!contains(s.after)) return std::nullopt;
  return Hit{normalize(s.after), 1.0};
}

// ------------------------------------------------------------------ digit detector

DigitDetector::DigitDetector(const DigitSystem&, const TargetSpec& spec) : spec_(spec) {
  const auto* iv = std::get_if<IntervalTarget>(&spec);
  if (!iv) throw TargetError("b-adic maps support interval targets only");
  if (!(iv->lo >= 0.0 && iv->hi <= 1.0 && iv->lo < iv->hi)) {
    throw TargetError("interval must satisfy 0 <= lo < hi <= 1");
  }
  lo_ = iv->lo;
  hi_ = iv->hi;
}

bool DigitDetector::contains(const DigitOrbit& x) const {
  const double v = x.value();
  return v >= lo_ && v < hi_;
}

Mark DigitDetector::normalize(const DigitOrbit& x) const {
  if (!contains(x)) throw TargetError("normalize called on a non-member");
  return {(x.value() - lo_) / (hi_ - lo_), 0.0};
}

std::optional<Hit> DigitDetector::probe(const MapStep<DigitOrbit>& s) const {
  if (!contains(s.after)) return std::nullopt;
  return Hit{normalize(s.after), 1.0};
}

// ------------------------------------------------------------------ measures

std::optional<double> analytic_measure(const TargetSpec& spec, const Table* table) {
  return std::visit(
      overloaded{[&](const MetricBall& b) -> std::optional<double> {
                   if (!table) return b.eps <= 0.5 ? std::optional(4.0 * b.eps * b.eps) : std::nullopt;
                   if (2.0 * b.eps > table->perimeter()) return std::nullopt;
                   const double hi = std::min(b.center.y + b.eps, kHalfPi);
                   const double lo = std::max(b.center.y - b.eps, -kHalfPi);
                   return b.eps * (std::sin(hi) - std::sin(lo)) / table->perimeter();
                 },
                 [&](const PositionStrip& s) -> std::optional<double> {
                   if (!table || 2.0 * s.eps > table->perimeter()) return std::nullopt;
                   return 2.0 * s.eps / table->perimeter();
                 },
                 [&](const CornerBarrier& c) -> std::optional<double> {
                   if (!table) return std::nullopt;
                   return c.eps / table->perimeter();
                 },
                 [](const ClusterPruned&) -> std::optional<double> { return std::nullopt; },
                 [](const IntervalTarget& i) -> std::optional<double> { return i.hi - i.lo; }},
      spec);
}

namespace {

MeasureEstimate finish_estimate(std::uint64_t hits, std::uint64_t n, double scale) {
  if (hits == 0) {
    throw TargetError("no hits in " + std::to_string(n) + " samples; raise the mc budget");
  }
  MeasureEstimate m;
  m.samples = n;
  m.hits = hits;
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  m.estimate = scale * p;
  m.stderr_ = scale * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  m.ci_lo = std::max(0.0, m.estimate - 1.96 * m.stderr_);
  m.ci_hi = m.estimate + 1.96 * m.stderr_;
  return m;
}

void check_budget(std::uint64_t budget) {
  if (budget < 10'000) throw TargetError("mc budget must be at least 1e4");
}

}  // namespace

MeasureEstimate measure(const BilliardSystem& sys, const TargetSpec& spec, std::uint64_t budget,
                        RandomStream& rng) {
  check_budget(budget);
  const BilliardDetector det(sys, spec);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < budget; ++i) {
    const ReflectedVector x = sys.sample(rng);
    if (det.barrier()) {
      if (det.probe(sys.advance(x))) ++hits;
    } else if (det.contains(x)) {
      ++hits;
    }
  }
  MeasureEstimate m = finish_estimate(hits, budget, 1.0);
  m.analytic = analytic_measure(spec, sys.table.get());
  return m;
}

MeasureEstimate measure(const ToralSystem& sys, const TargetSpec& spec, std::uint64_t budget,
                        RandomStream& rng) {
  check_budget(budget);
  const ToralDetector det(sys, spec);
  const double eps = target_epsilon(spec);
  if (const auto* c = std::get_if<ClusterPruned>(&spec)) {
    // Sample uniformly inside the ball; mu(A) = mu(B) * P(A | B).
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < budget; ++i) {
      const Vec2 x = wrap_torus(c->center + Vec2{eps * (2.0 * rng.uniform() - 1.0), eps * (2.0 * rng.uniform() - 1.0)});
      if (det.contains(x)) ++hits;
    }
    const double ball = 4.0 * eps * eps;
    MeasureEstimate m = finish_estimate(hits, budget, ball);
    m.ball_estimate = ball;
    m.theta = m.estimate / ball;
    return m;
  }
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < budget; ++i) {
    if (det.contains(sys.sample(rng))) ++hits;
  }
  MeasureEstimate m = finish_estimate(hits, budget, 1.0);
  m.analytic = analytic_measure(spec, nullptr);
  return m;
}

MeasureEstimate measure(const DigitSystem& sys, const TargetSpec& spec, std::uint64_t budget,
                        RandomStream& rng) {
  check_budget(budget);
  const DigitDetector det(sys, spec);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < budget; ++i) {
    if (det.contains(sys.sample(rng))) ++hits;
  }
  MeasureEstimate m = finish_estimate(hits, budget, 1.0);
  m.analytic = analytic_measure(spec, nullptr);
  return m;
}

// ------------------------------------------------------------------ intensities

namespace {

Box clip(const Box& b, const Box& s, int dim) {
  Box c;
  for (int i = 0; i < dim; ++i) {
    c.lo[i] = std::clamp(b.lo[i], s.lo[i], s.hi[i]);
    c.hi[i] = std::clamp(b.hi[i], s.lo[i], s.hi[i]);
    if (c.hi[i] < c.lo[i]) c.hi[i] = c.lo[i];
  }
  return c;
}

}  // namespace

IntensityModel uniform_square_model() {
  IntensityModel m;
  m.name = "uniform on (-1,1)^2";
  m.support = {{-1.0, -1.0}, {1.0, 1.0}};
  const Box s = m.support;
  m.density = [s](const Mark& x) {
    return (x[0] >= s.lo[0] && x[0] <= s.hi[0] && x[1] >= s.lo[1] && x[1] <= s.hi[1]) ? 0.25 : 0.0;
  };
  m.mass = [s](const Box& b) {
    const Box c = clip(b, s, 2);
    return (c.hi[0] - c.lo[0]) * (c.hi[1] - c.lo[1]) / 4.0;
  };
  return m;
}

IntensityModel strip_model() {
  IntensityModel m;
  m.name = "cos(phi)/4 on [-1,1]x[-pi/2,pi/2]";
  m.support = {{-1.0, -kHalfPi}, {1.0, kHalfPi}};
  const Box s = m.support;
  m.density = [s](const Mark& x) {
    return (std::abs(x[0]) <= 1.0 && std::abs(x[1]) <= kHalfPi) ? std::cos(x[1]) / 4.0 : 0.0;
  };
  m.mass = [s](const Box& b) {
    const Box c = clip(b, s, 2);
    return (c.hi[0] - c.lo[0]) / 2.0 * (std::sin(c.hi[1]) - std::sin(c.lo[1])) / 2.0;
  };
  return m;
}

IntensityModel barrier_model() {
  IntensityModel m;
  m.name = "cos(phi)/2 on [-1/2,1/2]x(-pi/2,pi/2)";
  m.support = {{-0.5, -kHalfPi}, {0.5, kHalfPi}};
  const Box s = m.support;
  m.density = [](const Mark& x) {
    return (std::abs(x[0]) <= 0.5 && std::abs(x[1]) <= kHalfPi) ? std::cos(x[1]) / 2.0 : 0.0;
  };
  m.mass = [s](const Box& b) {
    const Box c = clip(b, s, 2);
    return (c.hi[0] - c.lo[0]) * (std::sin(c.hi[1]) - std::sin(c.lo[1])) / 2.0;
  };
  return m;
}

IntensityModel unit_interval_model() {
  IntensityModel m;
  m.name = "uniform on [0,1)";
  m.dim = 1;
  m.support = {{0.0, 0.0}, {1.0, 0.0}};
  m.density = [](const Mark& x) { return (x[0] >= 0.0 && x[0] <= 1.0) ? 1.0 : 0.0; };
  m.mass = [](const Box& b) {
    return std::max(0.0, std::min(b.hi[0], 1.0) - std::max(b.lo[0], 0.0));
  };
  return m;
}

IntensityModel pruned_model(const ToralSystem& sys, const ClusterPruned& spec, int resolution) {
  if (resolution < 8) throw TargetError("pruned model resolution too small");
  const ToralDetector det(sys, spec);
  const int n = resolution;
  const double h = 2.0 / n;
  // sat[(i)*(n+1)+j] = member cells with index < i in x and < j in y
  auto sat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
  auto cells = std::make_shared<std::vector<std::uint8_t>>(static_cast<std::size_t>(n) * n, 0);
  auto at = [n](int i, int j) { return static_cast<std::size_t>(i) * (n + 1) + j; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 y{-1.0 + (i + 0.5) * h, -1.0 + (j + 0.5) * h};
      const bool in = det.contains(wrap_torus(spec.center + y * spec.eps));
      (*cells)[static_cast<std::size_t>(i) * n + j] = in ? 1 : 0;
      (*sat)[at(i + 1, j + 1)] = (in ? 1.0 : 0.0) + (*sat)[at(i, j + 1)] + (*sat)[at(i + 1, j)] - (*sat)[at(i, j)];
    }
  }
  const double total = (*sat)[at(n, n)];
  if (total <= 0.0) throw TargetError("pruned set is empty at this resolution");
  IntensityModel m;
  m.name = "normalized Lebesgue on the pruned set";
  m.support = {{-1.0, -1.0}, {1.0, 1.0}};
  const double dens = 1.0 / (total * h * h);
  m.density = [cells, n, h, dens](const Mark& x) {
    const int i = static_cast<int>(std::floor((x[0] + 1.0) / h));
    const int j = static_cast<int>(std::floor((x[1] + 1.0) / h));
    if (i < 0 || j < 0 || i >= n || j >= n) return 0.0;
    return (*cells)[static_cast<std::size_t>(i) * n + j] ? dens : 0.0;
  };
  // Continuous extension of the table, uniform inside each cell.
  auto cum = [sat, n, h, at](double x, double y) {
    const double gx = std::clamp((x + 1.0) / h, 0.0, static_cast<double>(n));
    const double gy = std::clamp((y + 1.0) / h, 0.0, static_cast<double>(n));
    const int i = std::min(static_cast<int>(gx), n - 1);
    const int j = std::min(static_cast<int>(gy), n - 1);
    const double fx = gx - i;
    const double fy = gy - j;
    const auto& s = *sat;
    return (1 - fx) * (1 - fy) * s[at(i, j)] + fx * (1 - fy) * s[at(i + 1, j)] +
           (1 - fx) * fy * s[at(i, j + 1)] + fx * fy * s[at(i + 1, j + 1)];
  };
  m.mass = [cum, total](const Box& b) {
    const double v = cum(b.hi[0], b.hi[1]) - cum(b.lo[0], b.hi[1]) - cum(b.hi[0], b.lo[1]) +
                     cum(b.lo[0], b.lo[1]);
    return std::max(0.0, v / total);
  };
  return m;
}

IntensityModel flow_ball_entrance_model(double v0_angle) {
  IntensityModel m;
  m.name = "(1/4)<n_p, v0>^+ on S^1 x [-1,1]";
  m.support = {{-kPi, -1.0}, {kPi, 1.0}};
  m.density = [v0_angle](const Mark& x) {
    if (std::abs(x[1]) > 1.0) return 0.0;
    return 0.25 * std::max(0.0, std::cos(x[0] - v0_angle));
  };
  const Box s = m.support;
  m.mass = [v0_angle, s](const Box& b) {
    const Box c = clip(b, s, 2);
    const int steps = 2000;
    const double dp = (c.hi[0] - c.lo[0]) / steps;
    double acc = 0.0;
    for (int k = 0; k < steps; ++k) {
      acc += std::max(0.0, std::cos(c.lo[0] + (k + 0.5) * dp - v0_angle));
    }
    return 0.25 * acc * dp * (c.hi[1] - c.lo[1]);
  };
  return m;
}

IntensityModel reference_intensity(const BilliardSystem&, const TargetSpec& spec) {
  if (std::holds_alternative<MetricBall>(spec)) return uniform_square_model();
  if (std::holds_alternative<PositionStrip>(spec)) return strip_model();
  if (std::holds_alternative<CornerBarrier>(spec)) return barrier_model();
  throw TargetError("target has no billiard intensity model");
}

IntensityModel reference_intensity(const ToralSystem& sys, const TargetSpec& spec) {
  if (std::holds_alternative<MetricBall>(spec)) return uniform_square_model();
  if (const auto* c = std::get_if<ClusterPruned>(&spec)) return pruned_model(sys, *c);
  throw TargetError("target has no toral intensity model");
}

IntensityModel reference_intensity(const DigitSystem&, const TargetSpec& spec) {
  if (std::holds_alternative<IntervalTarget>(spec)) return unit_interval_model();
  throw TargetError("target has no b-adic intensity model");
}

}  // namespace stp
