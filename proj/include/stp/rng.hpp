#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace stp {

/// SplitMix64 finalizer; used to derive well-separated child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for trajectory `index` of ladder step `level` under `master`.
/// This is the documented splittable derivation: every (master, level, index)
/// triple names an independent stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t level,
                                    std::uint64_t index) {
  return mix64(mix64(mix64(master) ^ (level * 0xd1b54a32d192ed03ULL)) ^
               (index * 0x8cb92ba72f3d8dd7ULL));
}

constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seeded random stream; children are derived by name or index.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  /// Uniform double in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t bits() { return engine_(); }
  double exponential() { return -std::log1p(-uniform()); }

  RandomStream child(std::uint64_t index) const { return RandomStream(derive_seed(seed_, 0, index)); }
  RandomStream child(std::string_view name) const {
    return RandomStream(derive_seed(seed_, hash_name(name), 0));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace stp
