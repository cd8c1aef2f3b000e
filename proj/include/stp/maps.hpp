#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "stp/rng.hpp"
#include "stp/vec2.hpp"

namespace stp {

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Real 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a{1}, b{0}, c{0}, d{1};

  static Mat2 identity() { return {}; }
  static Mat2 diag(double x, double y) { return {x, 0, 0, y}; }

  Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  Mat2 inverse() const;
  Mat2 pow(int n) const;
};

/// Integer 2x2 matrix, used for toral automorphisms.
struct IntMat2 {
  std::int64_t a{1}, b{0}, c{0}, d{1};

  IntMat2 operator*(const IntMat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  std::int64_t det() const { return a * d - b * c; }
  std::int64_t trace() const { return a + d; }
  IntMat2 pow(int n) const;
  Mat2 to_real() const {
    return {static_cast<double>(a), static_cast<double>(b), static_cast<double>(c),
            static_cast<double>(d)};
  }
};

/// Eigenvalues of a real 2x2 matrix; complex pairs are reported by modulus.
struct Spectrum {
  bool real{true};
  std::array<double, 2> values{};   ///< ordered |values[0]| >= |values[1]|; moduli when complex
  std::array<Vec2, 2> vectors{};    ///< unit eigenvectors (real case only)
};
Spectrum spectrum(const Mat2& m);

/// Hyperbolic linear automorphism of the torus: integer entries, |det| = 1,
/// no eigenvalue on the unit circle.
class ToralAutomorphism {
 public:
  explicit ToralAutomorphism(IntMat2 m);
  static ToralAutomorphism cat() { return ToralAutomorphism({2, 1, 1, 1}); }

  const IntMat2& matrix() const { return m_; }
  Mat2 derivative() const { return m_.to_real(); }
  /// x -> M x mod 1, componentwise in [0,1).
  Vec2 apply(Vec2 x) const;
  Vec2 apply_inverse(Vec2 x) const;

 private:
  IntMat2 m_;
  IntMat2 inv_;
};

/// Reduce both components to [0,1).
Vec2 wrap_torus(Vec2 x);
/// Componentwise difference folded into [-1/2,1/2).
Vec2 torus_delta(Vec2 x, Vec2 y);

/// Periodic point x = num / denom (mod 1) with its minimal period.
struct PeriodicPoint {
  Vec2 point;
  std::int64_t num_x{0}, num_y{0}, denom{1};
  int minimal_period{1};
};

/// All solutions of M^p x = x on the torus. Throws MapError when M^p - I is
/// singular or the orbit count is out of reach (> 4e6 points).
std::vector<PeriodicPoint> periodic_points(const IntMat2& m, int p);

/// Real matrix certified to have no eigenvalue of modulus one.
class HyperbolicMatrix {
 public:
  explicit HyperbolicMatrix(Mat2 a);
  const Mat2& matrix() const { return a_; }
  const Spectrum& eigen() const { return spec_; }

 private:
  Mat2 a_;
  Spectrum spec_;
};

struct ContractionOptions {
  std::size_t directions{100'000};
  int n_check{64};
  int q_max{64};
  double slack{1e-12};
  std::uint64_t verify_seed{0xc0ffee};
};

struct ContractionCertificate {
  int q{0};
  /// max over sampled directions of |A^q v| / max(|v|, min_n |A^n v|)
  double worst_ratio{0.0};
  /// same quantity on a fresh random direction sample
  double reverify_ratio{0.0};
  std::size_t directions{0};
  int n_check{0};
};

/// Smallest q with |A^q v| <= max(|v|, |A^n v|)/4 for n in [2q, 2q+n_check],
/// over a dense direction grid plus the eigendirections; re-verified on a
/// random sample. Throws MapError when no q <= q_max qualifies.
ContractionCertificate contraction_exponent(const HyperbolicMatrix& a,
                                            const ContractionOptions& opts = {});

/// Worst ratio for a given q over `directions` random directions.
double contraction_ratio(const HyperbolicMatrix& a, int q, std::size_t directions, int n_check,
                         RandomStream& rng);

/// Membership of A^n v in the open unit ball (Euclidean) for n = 0..n_max.
std::vector<bool> ball_pattern(const Mat2& a, Vec2 v, int n_max);

/// Doubling map x -> 2x mod 1 in floating point (loses one bit per step).
double doubling_step(double x);
/// b-adic map x -> b x mod 1 in floating point.
double badic_step(double x, int base);

/// Exact orbit of the b-adic map: keeps a window of base-b digits and draws the
/// digits beyond it lazily from a private stream, so long orbits never collapse
/// to the floating-point fixed point.
class DigitOrbit {
 public:
  static constexpr int kWindow = 64;

  /// Uniformly random starting point.
  DigitOrbit(int base, std::uint64_t seed);
  /// Start at x in [0,1); digits of the double, then a random tail.
  DigitOrbit(int base, double x, std::uint64_t seed);

  int base() const { return base_; }
  double value() const;
  int digit(int k) const { return digits_[(head_ + k) % kWindow]; }
  void advance();

 private:
  int next_tail_digit();

  int base_;
  std::array<std::uint8_t, kWindow> digits_{};
  int head_{0};
  std::uint64_t tail_state_;
};

}  // namespace stp
