#pragma once

#include <cstdint>
#include <memory>

#include "stp/geometry.hpp"
#include "stp/rng.hpp"

namespace stp {

/// Phase point of the billiard map: boundary arc-length and reflection angle.
struct ReflectedVector {
  double r{0.0};
  double phi{0.0};
};

enum class StepStatus { ok, corner_hit, tangency };

/// One free flight between consecutive reflections.
struct FlightRecord {
  ReflectedVector before;
  ReflectedVector after;
  double tau{0.0};
  Vec2 from;   ///< chord start (plane coordinates)
  Vec2 to;     ///< chord end; unfolded on the torus
  StepStatus status{StepStatus::ok};

  bool ok() const { return status == StepStatus::ok; }
  Vec2 velocity() const { return (to - from) / tau; }
};

/// Billiard map T on the reflected vectors of `table`.
FlightRecord step(const Table& table, const ReflectedVector& state);

/// h(r,phi) = cos(phi) / (2 |dQ|).
double invariant_density(const Table& table, const ReflectedVector& state);

/// Draw from mu: r uniform, phi = asin(2U-1).
ReflectedVector sample_mu(const Table& table, RandomStream& rng);

struct BirkhoffSum {
  double sum{0.0};
  std::uint64_t steps{0};
  StepStatus status{StepStatus::ok};
  ReflectedVector end;
};

/// S_n tau along the orbit of `state`; stops early on a degenerate collision.
BirkhoffSum birkhoff_tau(const Table& table, const ReflectedVector& state, std::uint64_t n);

/// Mean free flight from the Santalo identity: pi Area(Q) / |dQ|.
double mean_free_flight(const Table& table);

/// Reverse the velocity at a reflected vector (the time-reversal involution).
inline ReflectedVector reversed(const ReflectedVector& x) { return {x.r, -x.phi}; }

}  // namespace stp
