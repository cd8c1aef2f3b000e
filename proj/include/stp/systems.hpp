#pragma once

#include <memory>
#include <string>
#include <variant>

#include "stp/billiard.hpp"
#include "stp/maps.hpp"

namespace stp {

/// Transition of a map without a roof function (tau = 1 per step).
template <class S>
struct MapStep {
  S before;
  S after;
  bool ok() const { return true; }
};

/// Billiard map on a shared immutable table.
struct BilliardSystem {
  using State = ReflectedVector;
  using Transition = FlightRecord;

  std::shared_ptr<const Table> table;

  explicit BilliardSystem(Table t) : table(std::make_shared<const Table>(std::move(t))) {}

  Transition advance(const State& x) const { return step(*table, x); }
  static const State& next(const Transition& t) { return t.after; }
  static double roof(const Transition& t) { return t.tau; }
  State sample(RandomStream& rng) const { return sample_mu(*table, rng); }
  double tau_bar() const { return mean_free_flight(*table); }
};

/// Hyperbolic toral automorphism with Lebesgue measure.
struct ToralSystem {
  using State = Vec2;
  using Transition = MapStep<Vec2>;

  ToralAutomorphism map;

  explicit ToralSystem(ToralAutomorphism m) : map(m) {}

  Transition advance(const State& x) const { return {x, map.apply(x)}; }
  static const State& next(const Transition& t) { return t.after; }
  static double roof(const Transition&) { return 1.0; }
  State sample(RandomStream& rng) const { return {rng.uniform(), rng.uniform()}; }
  double tau_bar() const { return 1.0; }
};

/// b-adic map x -> b x mod 1 with exact digit orbits.
struct DigitSystem {
  using State = DigitOrbit;
  using Transition = MapStep<DigitOrbit>;

  int base{2};

  explicit DigitSystem(int b) : base(b) {
    if (b < 2 || b > 255) throw MapError("base must be in [2,255]");
  }

  Transition advance(const State& x) const {
    Transition t{x, x};
    t.after.advance();
    return t;
  }
  static const State& next(const Transition& t) { return t.after; }
  static double roof(const Transition&) { return 1.0; }
  State sample(RandomStream& rng) const { return DigitOrbit(base, rng.bits()); }
  State start_at(double x, std::uint64_t tail_seed) const { return DigitOrbit(base, x, tail_seed); }
  double tau_bar() const { return 1.0; }
};

using Dynamics = std::variant<BilliardSystem, ToralSystem, DigitSystem>;

}  // namespace stp
