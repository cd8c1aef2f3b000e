#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stp/vec2.hpp"

namespace stp {

/// Raised for malformed tables and impossible ray queries.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace tol {
inline constexpr double rehit_guard = 1e-10;      ///< minimum flight time accepted
inline constexpr double corner = 1e-9;            ///< arc-length band around a corner
inline constexpr double tangency = 1e-7;          ///< |phi| > pi/2 - tangency flags grazing
inline constexpr double transversality = 1e-3;    ///< minimal corner opening angle (rad)
}  // namespace tol

/// Circular arc traversed with Q on its left. A positive sweep (counterclockwise
/// about the centre) bounds Q from outside (focusing); a negative sweep bounds
/// a convex obstacle (dispersing).
struct ArcPiece {
  Vec2 center;
  double radius{1.0};
  double start_angle{0.0};
  double sweep{0.0};
};

/// Straight segment from `a` to `b`, Q on its left.
struct SegmentPiece {
  Vec2 a;
  Vec2 b;
};

struct BoundaryPiece {
  std::variant<ArcPiece, SegmentPiece> shape;

  static BoundaryPiece arc(Vec2 center, double radius, double start_angle, double sweep);
  static BoundaryPiece segment(Vec2 a, Vec2 b);

  bool is_arc() const { return std::holds_alternative<ArcPiece>(shape); }
  const ArcPiece& as_arc() const { return std::get<ArcPiece>(shape); }
  const SegmentPiece& as_segment() const { return std::get<SegmentPiece>(shape); }

  double length() const;
  Vec2 point_at(double s) const;
  /// Unit normal pointing into Q at local arc-length s.
  Vec2 inward_normal_at(double s) const;
  /// Billiard-convention curvature: +1/R dispersing, -1/R focusing, 0 flat.
  double curvature() const;
};

enum class Topology { planar, torus };

struct Corner {
  std::size_t piece;       ///< corner sits at the start of this piece
  Vec2 point;
  double r;                ///< global arc-length coordinate
  double opening_angle;    ///< interior angle of Q at the corner (radians)
};

/// Disc obstacle on the unit torus [0,1)^2.
struct Scatterer {
  Vec2 center;
  double radius{0.0};
};

struct HorizonReport {
  bool finite{false};
  /// Primitive directions (a,b) with |a|,|b| <= 8 that admit a free corridor.
  std::vector<std::pair<int, int>> open_corridors;
  std::size_t rays_sampled{0};
  /// Longest free flight found (sampled, then locally maximized).
  double max_free_flight{0.0};
  /// Reported uniform bound on free flight; +inf when the horizon is infinite.
  double bound{std::numeric_limits<double>::infinity()};
};

/// Billiard domain as an ordered, closed chain of boundary pieces.
class Table {
 public:
  Table(std::string name, Topology topology, std::vector<BoundaryPiece> pieces);

  const std::string& name() const { return name_; }
  Topology topology() const { return topology_; }
  const std::vector<BoundaryPiece>& pieces() const { return pieces_; }
  /// cumulative()[i] is the r coordinate where piece i starts; back() == perimeter.
  const std::vector<double>& cumulative() const { return cumulative_; }
  const std::vector<Corner>& corners() const { return corners_; }
  const std::vector<Scatterer>& scatterers() const { return scatterers_; }
  const std::optional<HorizonReport>& horizon() const { return horizon_; }
  double perimeter() const { return cumulative_.back(); }
  double area() const { return area_; }

  /// Wrap r into [0, perimeter).
  double wrap(double r) const;
  /// Piece index and local arc-length for a wrapped r.
  std::pair<std::size_t, double> locate(double r) const;
  /// Distance (in arc-length) from r to the nearest corner; +inf without corners.
  double corner_distance(double r) const;

  // Construction helpers used by the builders.
  void set_corners(std::vector<Corner> corners) { corners_ = std::move(corners); }
  void set_scatterers(std::vector<Scatterer> s) { scatterers_ = std::move(s); }
  void set_horizon(HorizonReport h) { horizon_ = std::move(h); }
  void set_area(double a) { area_ = a; }

 private:
  std::string name_;
  Topology topology_;
  std::vector<BoundaryPiece> pieces_;
  std::vector<double> cumulative_;
  std::vector<Corner> corners_;
  std::vector<Scatterer> scatterers_;
  std::optional<HorizonReport> horizon_;
  double area_{0.0};
};

/// Stadium: rectangle [-l/2,l/2]x[-1,1] capped by unit half-discs.
/// r = 0 sits at (-l/2,-1) and increases counterclockwise.
Table build_stadium(double length);

struct HorizonOptions {
  std::size_t rays{1'000'000};
  std::uint64_t seed{0x5eed'4a11'0f'f1a7ULL};
};

/// Sinai billiard on the unit torus with disc scatterers.
/// Throws on empty input or overlapping closures (wrap-around included).
/// The finite-horizon report is attached; infinite horizon is reported, not rejected.
Table build_sinai(const std::vector<Scatterer>& scatterers, const HorizonOptions& opts = {});

/// Corridor scan and sampled free-flight bound for a torus scatterer set.
HorizonReport check_finite_horizon(const std::vector<Scatterer>& scatterers,
                                   const HorizonOptions& opts = {});

/// Diamond billiard bounded by four discs given in counterclockwise order around
/// the table. Corner C_i joins arc i and arc i+1. The result is posed with C_1 at
/// the origin and its inner bisector along +x; piece i runs from C_{i-1} to C_i.
Table build_diamond(const std::vector<Scatterer>& discs);

/// Default diamond instance: radius 2.5 discs centred at (3,0),(0,3),(-3,0),(0,-3).
Table default_diamond();
/// Default finite-horizon Sinai instance.
std::vector<Scatterer> default_sinai_scatterers();

struct BoundarySample {
  Vec2 point;
  Vec2 normal;          ///< unit, into Q
  double curvature{0};
  std::size_t piece{0};
  bool at_corner{false};
};

/// Point, inward normal and curvature at arc-length r (wrapped modulo perimeter).
BoundarySample boundary_point(const Table& table, double r);

enum class HitStatus { ok, corner_hit, tangency };

struct Collision {
  HitStatus status{HitStatus::ok};
  double time{0.0};          ///< flight time tau+ (unit speed)
  double r{0.0};             ///< hit arc-length
  double phi{0.0};           ///< angle from inward normal to reflected direction
  std::size_t piece{0};
  Vec2 point;                ///< hit point (unfolded plane coordinates on the torus)
  Vec2 reflected;            ///< post-reflection unit direction
};

/// Next boundary collision of the ray origin + t*direction, t > guard.
/// Throws GeometryError when no boundary is met.
Collision ray_next_collision(const Table& table, Vec2 origin, Vec2 direction);

/// Same, for a ray leaving the boundary at arc-length r (the source piece is
/// treated analytically so the emission point is never re-hit).
Collision ray_from_boundary(const Table& table, double r, Vec2 direction);

/// Circle-circle intersection points (empty, one or two).
std::vector<Vec2> circle_intersections(Vec2 c0, double r0, Vec2 c1, double r1);

}  // namespace stp
