#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stp/systems.hpp"

namespace stp {

class TargetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spatial mark; one-dimensional marks use only the first component.
using Mark = std::array<double, 2>;

/// Sup-metric ball. On billiards the centre is (r0, phi0); on the torus a point.
struct MetricBall {
  Vec2 center;
  double eps{0.1};
};

/// Boundary strip |r - r0| < eps, any angle.
struct PositionStrip {
  double r0{0.0};
  double eps{0.1};
};

/// Barrier of Euclidean length eps across the opening of a diamond corner,
/// crossed towards the corner.
struct CornerBarrier {
  int corner{0};
  double eps{0.1};
};

/// Ball around a periodic point minus the points returning to it within
/// q0 periods: x in B and T^{jp} x not in B for j = 1..q0.
struct ClusterPruned {
  Vec2 center;
  int period{1};
  int q0{1};
  double eps{0.1};
};

/// Interval [lo, hi) for the b-adic map.
struct IntervalTarget {
  double lo{0.0};
  double hi{0.5};
};

using TargetSpec = std::variant<MetricBall, PositionStrip, CornerBarrier, ClusterPruned, IntervalTarget>;

double target_epsilon(const TargetSpec& t);
TargetSpec with_epsilon(const TargetSpec& t, double eps);
std::string target_kind(const TargetSpec& t);
int mark_dimension(const TargetSpec& t);

/// A detected visit. `fraction` locates the event inside the flight that led
/// to it (1 for events at the reflection itself).
struct Hit {
  Mark mark{};
  double fraction{1.0};
};

/// Barrier segment in the frame of a corner: origin at the corner, `axis` the
/// inner bisector, `side` its left normal.
struct BarrierGeometry {
  Vec2 corner;
  Vec2 axis;
  Vec2 side;
  double offset{0.0};   ///< distance from the corner along the bisector
  double lo{0.0};       ///< side coordinate of the lower endpoint
  double hi{0.0};       ///< side coordinate of the upper endpoint
  Vec2 a1, a2;          ///< endpoints in table coordinates
  double eps{0.0};
};

BarrierGeometry barrier_geometry(const Table& table, int corner, double eps);

class BilliardDetector {
 public:
  BilliardDetector(const BilliardSystem& sys, const TargetSpec& spec);

  const TargetSpec& spec() const { return spec_; }
  const std::optional<BarrierGeometry>& barrier() const { return barrier_; }

  /// Membership of a reflected vector (ball and strip targets).
  bool contains(const ReflectedVector& x) const;
  /// Zoomed mark of a member; throws TargetError on non-members.
  Mark normalize(const ReflectedVector& x) const;
  /// Event attached to this flight, if any.
  std::optional<Hit> probe(const FlightRecord& f) const;

 private:
  std::shared_ptr<const Table> table_;
  TargetSpec spec_;
  std::optional<BarrierGeometry> barrier_;
};

class ToralDetector {
 public:
  ToralDetector(const ToralSystem& sys, const TargetSpec& spec);

  const TargetSpec& spec() const { return spec_; }
  bool in_ball(Vec2 x) const;
  bool contains(Vec2 x) const;
  Mark normalize(Vec2 x) const;
  std::optional<Hit> probe(const MapStep<Vec2>& s) const;

 private:
  ToralAutomorphism map_;
  TargetSpec spec_;
  Vec2 center_;
  double eps_;
  int period_{1};
  int q0_{0};
};

class DigitDetector {
 public:
  DigitDetector(const DigitSystem& sys, const TargetSpec& spec);

  const TargetSpec& spec() const { return spec_; }
  bool contains(const DigitOrbit& x) const;
  Mark normalize(const DigitOrbit& x) const;
  std::optional<Hit> probe(const MapStep<DigitOrbit>& s) const;

 private:
  TargetSpec spec_;
  double lo_, hi_;
};

template <class System>
struct DetectorFor;
template <>
struct DetectorFor<BilliardSystem> { using type = BilliardDetector; };
template <>
struct DetectorFor<ToralSystem> { using type = ToralDetector; };
template <>
struct DetectorFor<DigitSystem> { using type = DigitDetector; };
template <class System>
using DetectorFor_t = typename DetectorFor<System>::type;

struct MeasureEstimate {
  double estimate{0.0};
  double stderr_{0.0};
  double ci_lo{0.0};
  double ci_hi{0.0};
  std::uint64_t samples{0};
  std::uint64_t hits{0};
  std::optional<double> analytic;
  /// Extremal index mu(A)/mu(B) for pruned targets.
  std::optional<double> theta;
  std::optional<double> ball_estimate;
};

/// Exact measure where a closed form exists.
std::optional<double> analytic_measure(const TargetSpec& spec, const Table* table);

MeasureEstimate measure(const BilliardSystem& sys, const TargetSpec& spec, std::uint64_t budget,
                        RandomStream& rng);
MeasureEstimate measure(const ToralSystem& sys, const TargetSpec& spec, std::uint64_t budget,
                        RandomStream& rng);
MeasureEstimate measure(const DigitSystem& sys, const TargetSpec& spec, std::uint64_t budget,
                        RandomStream& rng);

/// Axis-aligned box in mark space.
struct Box {
  Mark lo{};
  Mark hi{};
};

/// Limiting spatial law m of the marks.
struct IntensityModel {
  std::string name;
  int dim{2};
  Box support;
  std::function<double(const Mark&)> density;
  /// m(box intersected with support), closed form or tabulated.
  std::function<double(const Box&)> mass;
};

IntensityModel uniform_square_model();
IntensityModel strip_model();
IntensityModel barrier_model();
IntensityModel unit_interval_model();
/// Normalized Lebesgue measure on the zoomed pruned set at the given eps,
/// tabulated on a resolution x resolution grid.
IntensityModel pruned_model(const ToralSystem& sys, const ClusterPruned& spec, int resolution = 1024);
/// Entrance law into a flow ball: (p, u) -> (1/4) <n_p, v0>^+ on S^1 x [-1,1],
/// with p and v0 given as angles. Documentation only: no extractor uses it.
IntensityModel flow_ball_entrance_model(double v0_angle);

IntensityModel reference_intensity(const BilliardSystem& sys, const TargetSpec& spec);
IntensityModel reference_intensity(const ToralSystem& sys, const TargetSpec& spec);
IntensityModel reference_intensity(const DigitSystem& sys, const TargetSpec& spec);

}  // namespace stp
