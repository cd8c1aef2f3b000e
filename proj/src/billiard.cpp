#include "stp/billiard.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stp {

FlightRecord step(const Table& table, const ReflectedVector& state) {
  FlightRecord rec;
  rec.before = state;
  const BoundarySample b = boundary_point(table, state.r);
  rec.from = b.point;
  if (b.at_corner) {
    rec.status = StepStatus::corner_hit;
    rec.after = state;
    return rec;
  }
  if (std::abs(state.phi) > 0.5 * std::numbers::pi - tol::tangency) {
    rec.status = StepStatus::tangency;
    rec.after = state;
    return rec;
  }
  const Collision c = ray_from_boundary(table, state.r, b.normal.rotated(state.phi));
  rec.tau = c.time;
  rec.to = c.point;
  rec.after = {c.r, c.phi};
  switch (c.status) {
    case HitStatus::ok: rec.status = StepStatus::ok; break;
    case HitStatus::corner_hit: rec.status = StepStatus::corner_hit; break;
    case HitStatus::tangency: rec.status = StepStatus::tangency; break;
  }
  return rec;
}

double invariant_density(const Table& table, const ReflectedVector& state) {
  return std::cos(state.phi) / (2.0 * table.perimeter());
}

ReflectedVector sample_mu(const Table& table, RandomStream& rng) {
  const double r = rng.uniform() * table.perimeter();
  const double phi = std::asin(2.0 * rng.uniform() - 1.0);
  return {r, phi};
}

BirkhoffSum birkhoff_tau(const Table& table, const ReflectedVector& state, std::uint64_t n) {
  if (n < 1) throw std::invalid_argument("birkhoff_tau needs n >= 1");
  BirkhoffSum out;
  ReflectedVector x = state;
  for (std::uint64_t k = 0; k < n; ++k) {
    const FlightRecord rec = step(table, x);
    if (!rec.ok()) {
      out.status = rec.status;
      break;
    }
    out.sum += rec.tau;
    ++out.steps;
    x = rec.after;
  }
  out.end = x;
  return out;
}

double mean_free_flight(const Table& table) {
  return std::numbers::pi * table.area() / table.perimeter();
}

}  // namespace stp
