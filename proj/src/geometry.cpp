#include "stp/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace stp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double positive_mod(double x, double m) {
  double r = std::fmod(x, m);
  if (r < 0.0) r += m;
  if (r >= m) r -= m;
  return r;
}

/// Local arc-length of `p` along `arc`, or nullopt if p lies outside its angular range.
std::optional<double> arc_local(const ArcPiece& arc, Vec2 p) {
  const double theta = std::atan2(p.y - arc.center.y, p.x - arc.center.x);
  const double span = std::abs(arc.sweep);
  if (span >= kTwoPi - 1e-15) {
    const double along = positive_mod(arc.sweep > 0 ? theta - arc.start_angle
                                                    : arc.start_angle - theta,
                                      kTwoPi);
    return along * arc.radius;
  }
  const double mid = arc.start_angle + 0.5 * arc.sweep;
  const double delta = std::remainder(theta - mid, kTwoPi);
  if (std::abs(delta) > 0.5 * span + 1e-12) return std::nullopt;
  const double along = (arc.sweep > 0 ? delta : -delta) + 0.5 * span;
  return std::clamp(along, 0.0, span) * arc.radius;
}

double polish_root(Vec2 w, Vec2 d, double radius, double t) {
  const Vec2 q = w + d * t;
  const double deriv = 2.0 * q.dot(d);
  if (std::abs(deriv) < 1e-14) return t;
  return t - (q.norm2() - radius * radius) / deriv;
}

double signed_area_of(const BoundaryPiece& piece) {
  if (piece.is_arc()) {
    const auto& a = piece.as_arc();
    const double t0 = a.start_angle, t1 = a.start_angle + a.sweep;
    return 0.5 * (a.radius * a.radius * a.sweep +
                  a.radius * (a.center.x * (std::sin(t1) - std::sin(t0)) -
                              a.center.y * (std::cos(t1) - std::cos(t0))));
  }
  const auto& s = piece.as_segment();
  return 0.5 * s.a.cross(s.b);
}

struct Candidate {
  double t{std::numeric_limits<double>::infinity()};
  std::size_t piece{0};
  double local{0.0};
  Vec2 point;
  Vec2 normal;
};

/// Nearest boundary hit on a planar table; `skip` marks the emitting piece.
Candidate cast_planar(const Table& table, Vec2 o, Vec2 d, std::optional<std::size_t> skip) {
  Candidate best;
  const auto& pieces = table.pieces();
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    const bool own = skip && *skip == j;
    if (pieces[j].is_arc()) {
      const ArcPiece& arc = pieces[j].as_arc();
      const bool focusing = arc.sweep > 0;
      if (own && !focusing) continue;
      const Vec2 w = o - arc.center;
      const double b = w.dot(d);
      std::array<double, 2> roots{};
      int nroots = 0;
      if (own) {
        roots[nroots++] = -2.0 * b;
      } else {
        const double c = w.norm2() - arc.radius * arc.radius;
        const double disc = b * b - c;
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        if (focusing) {
          roots[nroots++] = -b - sq;
          roots[nroots++] = -b + sq;
        } else {
          roots[nroots++] = -b - sq;
        }
      }
      for (int k = 0; k < nroots; ++k) {
        double t = roots[k];
        if (t <= tol::rehit_guard || t >= best.t) continue;
        if (!own) t = polish_root(w, d, arc.radius, t);
        const Vec2 p = o + d * t;
        const auto local = arc_local(arc, p);
        if (!local) continue;
        const Vec2 radial = (p - arc.center) / arc.radius;
        best = {t, j, *local, p, focusing ? -radial : radial};
        break;
      }
    } else {
      if (own) continue;
      const SegmentPiece& seg = pieces[j].as_segment();
      const Vec2 e = seg.b - seg.a;
      const double denom = d.cross(e);
      if (std::abs(denom) < 1e-300) continue;
      const Vec2 ao = seg.a - o;
      const double t = ao.cross(e) / denom;
      const double u = ao.cross(d) / denom;
      if (t <= tol::rehit_guard || t >= best.t) continue;
      if (u < -1e-12 || u > 1.0 + 1e-12) continue;
      const double len = e.norm();
      best = {t, j, std::clamp(u, 0.0, 1.0) * len, o + d * t, e.perp() / len};
    }
  }
  return best;
}

/// Nearest scatterer hit on the torus by walking the unit cells crossed by the ray.
/// A disc copy centred in cell c only meets cells c +- 1, so testing the 3x3 block
/// around each visited cell finds every hit inside that cell.
Candidate cast_torus(const Table& table, Vec2 o, Vec2 d,
                     std::optional<std::size_t> skip_scatterer) {
  Candidate best;
  const auto& sc = table.scatterers();
  long ix = static_cast<long>(std::floor(o.x));
  long iy = static_cast<long>(std::floor(o.y));
  const int step_x = d.x > 0 ? 1 : -1;
  const int step_y = d.y > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  const double delta_x = d.x != 0.0 ? std::abs(1.0 / d.x) : inf;
  const double delta_y = d.y != 0.0 ? std::abs(1.0 / d.y) : inf;
  double next_x = d.x != 0.0 ? ((d.x > 0 ? ix + 1 : ix) - o.x) / d.x : inf;
  double next_y = d.y != 0.0 ? ((d.y > 0 ? iy + 1 : iy) - o.y) / d.y : inf;

  constexpr std::size_t kMaxCells = 2'000'000;
  for (std::size_t walked = 0; walked < kMaxCells; ++walked) {
    for (long cx = ix - 1; cx <= ix + 1; ++cx) {
      for (long cy = iy - 1; cy <= iy + 1; ++cy) {
        for (std::size_t i = 0; i < sc.size(); ++i) {
          if (skip_scatterer && *skip_scatterer == i && cx == 0 && cy == 0) continue;
          const Vec2 center = sc[i].center + Vec2(static_cast<double>(cx), static_cast<double>(cy));
          const Vec2 w = o - center;
          const double b = w.dot(d);
          if (b >= 0.0) continue;  // moving away from this copy
          const double c = w.norm2() - sc[i].radius * sc[i].radius;
          const double disc = b * b - c;
          if (disc < 0.0) continue;
          double t = -b - std::sqrt(disc);
          if (t <= tol::rehit_guard || t >= best.t) continue;
          t = polish_root(w, d, sc[i].radius, t);
          const Vec2 p = o + d * t;
          const Vec2 n = (p - center) / sc[i].radius;
          const double theta = std::atan2(n.y, n.x);
          best = {t, i, positive_mod(-theta, kTwoPi) * sc[i].radius, p, n};
        }
      }
    }
    const double exit_t = std::min(next_x, next_y);
    if (best.t <= exit_t) return best;
    if (next_x < next_y) {
      ix += step_x;
      next_x += delta_x;
    } else {
      iy += step_y;
      next_y += delta_y;
    }
  }
  return best;
}

Collision finish(const Table& table, const Candidate& hit, Vec2 d) {
  if (!std::isfinite(hit.t)) {
    throw GeometryError("ray left the table without meeting the boundary");
  }
  Collision c;
  c.time = hit.t;
  c.piece = hit.piece;
  c.point = hit.point;
  c.r = table.wrap(table.cumulative()[hit.piece] + hit.local);
  c.reflected = reflect(d, hit.normal);
  c.phi = signed_angle(hit.normal, c.reflected);
  if (table.corner_distance(c.r) < tol::corner) {
    c.status = HitStatus::corner_hit;
  } else if (std::abs(c.phi) > 0.5 * kPi - tol::tangency) {
    c.status = HitStatus::tangency;
  }
  return c;
}

Collision cast(const Table& table, Vec2 o, Vec2 d, std::optional<std::size_t> skip) {
  const double n = d.norm();
  if (!(n > 0.0)) throw GeometryError("ray direction must be nonzero");
  d = d / n;
  const Candidate hit = table.topology() == Topology::torus ? cast_torus(table, o, d, skip)
                                                            : cast_planar(table, o, d, skip);
  return finish(table, hit, d);
}

}  // namespace

// ---------------------------------------------------------------- pieces

BoundaryPiece BoundaryPiece::arc(Vec2 center, double radius, double start_angle, double sweep) {
  if (!(radius > 0.0)) throw GeometryError("arc radius must be positive");
  if (sweep == 0.0 || std::abs(sweep) > kTwoPi + 1e-12) {
    throw GeometryError("arc angular range must be nonempty and at most 2*pi");
  }
  return BoundaryPiece{ArcPiece{center, radius, start_angle, sweep}};
}

BoundaryPiece BoundaryPiece::segment(Vec2 a, Vec2 b) {
  if ((b - a).norm() <= 0.0) throw GeometryError("degenerate segment");
  return BoundaryPiece{SegmentPiece{a, b}};
}

double BoundaryPiece::length() const {
  if (is_arc()) return as_arc().radius * std::abs(as_arc().sweep);
  return (as_segment().b - as_segment().a).norm();
}

Vec2 BoundaryPiece::point_at(double s) const {
  if (is_arc()) {
    const auto& a = as_arc();
    const double theta = a.start_angle + (a.sweep > 0 ? s : -s) / a.radius;
    return a.center + Vec2(std::cos(theta), std::sin(theta)) * a.radius;
  }
  const auto& g = as_segment();
  return g.a + (g.b - g.a) * (s / length());
}

Vec2 BoundaryPiece::inward_normal_at(double s) const {
  if (is_arc()) {
    const auto& a = as_arc();
    const Vec2 radial = (point_at(s) - a.center) / a.radius;
    return a.sweep > 0 ? -radial : radial;
  }
  const auto& g = as_segment();
  return (g.b - g.a).perp().normalized();
}

double BoundaryPiece::curvature() const {
  if (!is_arc()) return 0.0;
  const auto& a = as_arc();
  return a.sweep > 0 ? -1.0 / a.radius : 1.0 / a.radius;
}

// ---------------------------------------------------------------- table

Table::Table(std::string name, Topology topology, std::vector<BoundaryPiece> pieces)
    : name_(std::move(name)), topology_(topology), pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw GeometryError("table needs at least one boundary piece");
  cumulative_.reserve(pieces_.size() + 1);
  cumulative_.push_back(0.0);
  for (const auto& p : pieces_) {
    const double len = p.length();
    if (!(len > 0.0)) throw GeometryError("boundary piece of zero length");
    cumulative_.push_back(cumulative_.back() + len);
  }
  if (topology_ == Topology::planar) {
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto& cur = pieces_[i];
      const auto& next = pieces_[(i + 1) % pieces_.size()];
      const double gap = (cur.point_at(cur.length()) - next.point_at(0.0)).norm();
      if (gap > 1e-9) {
        std::ostringstream msg;
        msg << "boundary chain does not close between pieces " << i << " and "
            << (i + 1) % pieces_.size() << " (gap " << gap << ")";
        throw GeometryError(msg.str());
      }
    }
    double a = 0.0;
    for (const auto& p : pieces_) a += signed_area_of(p);
    if (!(a > 0.0)) throw GeometryError("boundary must be oriented counterclockwise");
    area_ = a;
  }
}

double Table::wrap(double r) const { return positive_mod(r, perimeter()); }

std::pair<std::size_t, double> Table::locate(double r) const {
  r = wrap(r);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  std::size_t idx = static_cast<std::size_t>(std::distance(cumulative_.begin(), it)) - 1;
  idx = std::min(idx, pieces_.size() - 1);
  return {idx, std::min(r - cumulative_[idx], pieces_[idx].length())};
}

double Table::corner_distance(double r) const {
  double best = std::numeric_limits<double>::infinity();
  const double per = perimeter();
  r = wrap(r);
  for (const auto& c : corners_) {
    const double d = std::abs(std::remainder(r - c.r, per));
    best = std::min(best, d);
  }
  return best;
}

// ---------------------------------------------------------------- builders

Table build_stadium(double length) {
  if (!(length > 0.0)) throw GeometryError("stadium length must be positive");
  const double h = 0.5 * length;
  std::vector<BoundaryPiece> pieces{
      BoundaryPiece::segment({-h, -1.0}, {h, -1.0}),
      BoundaryPiece::arc({h, 0.0}, 1.0, -0.5 * kPi, kPi),
      BoundaryPiece::segment({h, 1.0}, {-h, 1.0}),
      BoundaryPiece::arc({-h, 0.0}, 1.0, 0.5 * kPi, kPi),
  };
  return Table("stadium", Topology::planar, std::move(pieces));
}

namespace {

void validate_scatterers(const std::vector<Scatterer>& in) {
  if (in.empty()) throw GeometryError("Sinai table needs at least one scatterer");
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!(in[i].radius > 0.0)) throw GeometryError("scatterer radius must be positive");
    if (in[i].radius >= 0.5) {
      throw GeometryError("scatterer " + std::to_string(i) + " overlaps its own torus copies");
    }
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    for (std::size_t j = i + 1; j < in.size(); ++j) {
      const Vec2 d = in[i].center - in[j].center;
      const Vec2 w(std::remainder(d.x, 1.0), std::remainder(d.y, 1.0));
      if (w.norm() <= in[i].radius + in[j].radius) {
        std::ostringstream msg;
        msg << "scatterers " << i << " and " << j << " have overlapping closures (torus distance "
            << w.norm() << " <= " << in[i].radius + in[j].radius << ")";
        throw GeometryError(msg.str());
      }
    }
  }
}

Table torus_table(const std::vector<Scatterer>& in) {
  std::vector<Scatterer> sc;
  std::vector<BoundaryPiece> pieces;
  for (const auto& s : in) {
    Scatterer r{{positive_mod(s.center.x, 1.0), positive_mod(s.center.y, 1.0)}, s.radius};
    sc.push_back(r);
    pieces.push_back(BoundaryPiece::arc(r.center, r.radius, 0.0, -kTwoPi));
  }
  Table t("sinai", Topology::torus, std::move(pieces));
  double free_area = 1.0;
  for (const auto& s : sc) free_area -= kPi * s.radius * s.radius;
  t.set_area(free_area);
  t.set_scatterers(std::move(sc));
  return t;
}

double free_flight(const Table& table, double r, double phi) {
  const BoundarySample b = boundary_point(table, r);
  const Collision c = ray_from_boundary(table, r, b.normal.rotated(phi));
  return c.time;
}

/// Pattern search on (r, phi) that climbs the free-flight function.
std::pair<double, std::pair<double, double>> refine_flight(const Table& table, double r,
                                                           double phi, double value) {
  double step = 1e-3;
  const double lim = 0.5 * kPi - 2.0 * tol::tangency;
  while (step > 1e-12) {
    bool improved = false;
    for (const auto& [dr, dp] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0},
                                {1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}}) {
      const double rr = table.wrap(r + dr * step);
      const double pp = std::clamp(phi + dp * step, -lim, lim);
      const double v = free_flight(table, rr, pp);
      if (v > value) {
        value = v;
        r = rr;
        phi = pp;
        improved = true;
        break;
      }
    }
    if (!improved) step *= 0.5;
  }
  return {value, {r, phi}};
}

}  // namespace

HorizonReport check_finite_horizon(const std::vector<Scatterer>& scatterers,
                                   const HorizonOptions& opts) {
  validate_scatterers(scatterers);
  HorizonReport report;
  constexpr int kMaxDen = 8;
  for (int a = 0; a <= kMaxDen; ++a) {
    for (int b = -kMaxDen; b <= kMaxDen; ++b) {
      if (std::gcd(a, b) != 1) continue;
      if (a == 0 && b != 1) continue;  // (0,1) and (0,-1) are the same corridor
      const double len = std::hypot(a, b);
      const double period = 1.0 / len;
      const Vec2 normal(-b / len, a / len);
      std::vector<std::pair<double, double>> cover;
      bool full = false;
      for (const auto& s : scatterers) {
        if (2.0 * s.radius >= period) {
          full = true;
          break;
        }
        const double c = positive_mod(s.center.dot(normal), period);
        cover.emplace_back(c - s.radius, c + s.radius);
      }
      if (full) continue;
      std::sort(cover.begin(), cover.end());
      // Walk one period starting at the first interval; any uncovered gap is a corridor.
      double reach = cover.front().second;
      bool open = false;
      for (std::size_t k = 1; k < cover.size(); ++k) {
        if (cover[k].first > reach + 1e-12) {
          open = true;
          break;
        }
        reach = std::max(reach, cover[k].second);
      }
      if (!open && cover.front().first + period > reach + 1e-12) open = true;
      if (open) report.open_corridors.emplace_back(a, b);
    }
  }
  report.finite = report.open_corridors.empty();

  const Table table = torus_table(scatterers);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr std::size_t kTop = 16;
  std::vector<std::tuple<double, double, double>> top;  // (flight, r, phi)
  for (std::size_t i = 0; i < opts.rays; ++i) {
    const double r = unit(rng) * table.perimeter();
    const double phi = std::asin(2.0 * unit(rng) - 1.0);
    double flight = 0.0;
    try {
      flight = free_flight(table, r, phi);
    } catch (const GeometryError&) {
      continue;  // corridor ray: only possible with infinite horizon
    }
    if (top.size() < kTop || flight > std::get<0>(top.back())) {
      top.emplace_back(flight, r, phi);
      std::sort(top.begin(), top.end(), std::greater<>());
      if (top.size() > kTop) top.pop_back();
    }
  }
  report.rays_sampled = opts.rays;
  double best = top.empty() ? 0.0 : std::get<0>(top.front());
  if (report.finite) {
    for (const auto& [flight, r, phi] : top) {
      best = std::max(best, refine_flight(table, r, phi, flight).first);
    }
    report.bound = best * (1.0 + 1e-9);
  }
  report.max_free_flight = best;
  return report;
}

Table build_sinai(const std::vector<Scatterer>& scatterers, const HorizonOptions& opts) {
  validate_scatterers(scatterers);
  Table t = torus_table(scatterers);
  t.set_horizon(check_finite_horizon(scatterers, opts));
  return t;
}

std::vector<Vec2> circle_intersections(Vec2 c0, double r0, Vec2 c1, double r1) {
  const Vec2 d = c1 - c0;
  const double dist = d.norm();
  if (dist == 0.0 || dist > r0 + r1 || dist < std::abs(r0 - r1)) return {};
  const double a = (r0 * r0 - r1 * r1 + dist * dist) / (2.0 * dist);
  const double h2 = r0 * r0 - a * a;
  const Vec2 u = d / dist;
  const Vec2 base = c0 + u * a;
  if (h2 <= 0.0) return {base};
  const double h = std::sqrt(h2);
  return {base + u.perp() * h, base - u.perp() * h};
}

Table build_diamond(const std::vector<Scatterer>& discs) {
  if (discs.size() != 4) throw GeometryError("diamond needs exactly four arcs");
  for (const auto& d : discs) {
    if (!(d.radius > 0.0)) throw GeometryError("arc radius must be positive");
  }
  Vec2 centroid;
  for (const auto& d : discs) centroid += d.center / 4.0;

  for (std::size_t i = 0; i < 2; ++i) {
    const auto& a = discs[i];
    const auto& b = discs[i + 2];
    if ((a.center - b.center).norm() <= a.radius + b.radius) {
      throw GeometryError("non-consecutive arcs " + std::to_string(i) + " and " +
                          std::to_string(i + 2) + " intersect");
    }
  }

  // Corner k joins arc k and arc k+1.
  std::array<Vec2, 4> corner{};
  std::array<double, 4> opening{};
  std::array<Vec2, 4> bisector{};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& a = discs[k];
    const auto& b = discs[(k + 1) % 4];
    const auto pts = circle_intersections(a.center, a.radius, b.center, b.radius);
    if (pts.empty()) {
      throw GeometryError("arcs " + std::to_string(k) + " and " + std::to_string((k + 1) % 4) +
                          " do not meet");
    }
    Vec2 c = pts.front();
    if (pts.size() == 2 && (pts[1] - centroid).norm() < (pts[0] - centroid).norm()) c = pts[1];
    // Leaving the corner backwards along arc k and forwards along arc k+1 (both clockwise
    // about their centres).
    const Vec2 back = (c - a.center).perp() / a.radius;
    const Vec2 fwd = -(c - b.center).perp() / b.radius;
    const double angle = std::acos(std::clamp(back.dot(fwd), -1.0, 1.0));
    if (pts.size() < 2 || angle < tol::transversality) {
      throw GeometryError("non-transversal corner between arcs " + std::to_string(k) + " and " +
                          std::to_string((k + 1) % 4));
    }
    corner[k] = c;
    opening[k] = angle;
    bisector[k] = (back + fwd).normalized();
  }

  // Pose: C_1 (corner 0) at the origin, inner bisector along +x.
  const double rot = -std::atan2(bisector[0].y, bisector[0].x);
  const Vec2 shift = corner[0];
  auto pose = [&](Vec2 p) { return (p - shift).rotated(rot); };

  std::vector<BoundaryPiece> pieces;
  for (std::size_t j = 0; j < 4; ++j) {
    const Vec2 c = pose(discs[j].center);
    const Vec2 from = pose(corner[(j + 3) % 4]);
    const Vec2 to = pose(corner[j]);
    const double a0 = std::atan2(from.y - c.y, from.x - c.x);
    const double a1 = std::atan2(to.y - c.y, to.x - c.x);
    double sweep = std::remainder(a1 - a0, kTwoPi);
    if (sweep >= 0.0) sweep -= kTwoPi;
    if (-sweep >= kPi) {
      throw GeometryError("arc " + std::to_string(j) + " does not face the table");
    }
    pieces.push_back(BoundaryPiece::arc(c, discs[j].radius, a0, sweep));
  }
  Table t("diamond", Topology::planar, std::move(pieces));
  std::vector<Corner> corners;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t piece = (k + 1) % 4;
    corners.push_back({piece, pose(corner[k]), t.cumulative()[piece], opening[k]});
  }
  t.set_corners(std::move(corners));
  return t;
}

Table default_diamond() {
  return build_diamond({{{3.0, 0.0}, 2.5}, {{0.0, 3.0}, 2.5}, {{-3.0, 0.0}, 2.5}, {{0.0, -3.0}, 2.5}});
}

std::vector<Scatterer> default_sinai_scatterers() {
  return {{{0.0, 0.0}, 0.4}, {{0.5, 0.5}, 0.25}};
}

// ---------------------------------------------------------------- queries

BoundarySample boundary_point(const Table& table, double r) {
  const auto [idx, s] = table.locate(r);
  const auto& piece = table.pieces()[idx];
  BoundarySample out;
  out.point = piece.point_at(s);
  out.normal = piece.inward_normal_at(s);
  out.curvature = piece.curvature();
  out.piece = idx;
  out.at_corner = table.corner_distance(r) < tol::corner;
  return out;
}

Collision ray_next_collision(const Table& table, Vec2 origin, Vec2 direction) {
  return cast(table, origin, direction, std::nullopt);
}

Collision ray_from_boundary(const Table& table, double r, Vec2 direction) {
  const auto [idx, s] = table.locate(r);
  (void)s;
  return cast(table, boundary_point(table, r).point, direction, idx);
}

}  // namespace stp
