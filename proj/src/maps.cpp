#include "stp/maps.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>
#include <unordered_set>

namespace stp {

Mat2 Mat2::inverse() const {
  const double dt = det();
  if (dt == 0.0) throw MapError("singular matrix");
  return {d / dt, -b / dt, -c / dt, a / dt};
}

Mat2 Mat2::pow(int n) const {
  if (n < 0) return inverse().pow(-n);
  Mat2 out = identity();
  Mat2 base = *this;
  while (n > 0) {
    if (n & 1) out = out * base;
    base = base * base;
    n >>= 1;
  }
  return out;
}

IntMat2 IntMat2::pow(int n) const {
  if (n < 0) throw MapError("negative integer matrix power");
  IntMat2 out{};
  IntMat2 base = *this;
  while (n > 0) {
    if (n & 1) out = out * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return out;
}

namespace {

Vec2 eigenvector(const Mat2& m, double lambda) {
  Vec2 v;
  const double u1 = std::hypot(m.b, lambda - m.a);
  const double u2 = std::hypot(lambda - m.d, m.c);
  if (std::max(u1, u2) < 1e-14) return {1.0, 0.0};
  v = u1 >= u2 ? Vec2{m.b, lambda - m.a} : Vec2{lambda - m.d, m.c};
  return v.normalized();
}

}  // namespace

Spectrum spectrum(const Mat2& m) {
  Spectrum s;
  const double half = 0.5 * m.trace();
  const double disc = half * half - m.det();
  if (disc < 0.0) {
    s.real = false;
    const double mod = std::sqrt(m.det());
    s.values = {mod, mod};
    return s;
  }
  const double root = std::sqrt(disc);
  double l1 = half + root;
  double l2 = half - root;
  if (std::abs(l2) > std::abs(l1)) std::swap(l1, l2);
  s.values = {l1, l2};
  if (m.b == 0.0 && m.c == 0.0) {
    const bool first = std::abs(m.a) >= std::abs(m.d);
    s.vectors = {first ? Vec2{1, 0} : Vec2{0, 1}, first ? Vec2{0, 1} : Vec2{1, 0}};
  } else {
    s.vectors = {eigenvector(m, l1), eigenvector(m, l2)};
  }
  return s;
}

ToralAutomorphism::ToralAutomorphism(IntMat2 m) : m_(m) {
  const std::int64_t dt = m.det();
  if (dt != 1 && dt != -1) throw MapError("toral automorphism needs determinant +-1");
  const std::int64_t tr = m.trace();
  if ((dt == 1 && std::abs(tr) <= 2) || (dt == -1 && tr == 0)) {
    throw MapError("matrix has an eigenvalue on the unit circle");
  }
  inv_ = {dt * m.d, -dt * m.b, -dt * m.c, dt * m.a};
}

Vec2 wrap_torus(Vec2 x) {
  x.x -= std::floor(x.x);
  x.y -= std::floor(x.y);
  if (x.x >= 1.0) x.x = 0.0;
  if (x.y >= 1.0) x.y = 0.0;
  return x;
}

Vec2 torus_delta(Vec2 x, Vec2 y) {
  Vec2 d = x - y;
  d.x -= std::floor(d.x + 0.5);
  d.y -= std::floor(d.y + 0.5);
  return d;
}

Vec2 ToralAutomorphism::apply(Vec2 x) const { return wrap_torus(m_.to_real() * x); }

Vec2 ToralAutomorphism::apply_inverse(Vec2 x) const { return wrap_torus(inv_.to_real() * x); }

namespace {

std::int64_t mod(std::int64_t v, std::int64_t m) {
  const std::int64_t r = v % m;
  return r < 0 ? r + m : r;
}

}  // namespace

std::vector<PeriodicPoint> periodic_points(const IntMat2& m, int p) {
  if (p < 1) throw MapError("period must be positive");
  const Spectrum s = spectrum(m.to_real());
  if (p * std::log10(std::max(1.0, std::abs(s.values[0]))) > 12.0) {
    throw MapError("period too large for exact enumeration");
  }
  const IntMat2 mp = m.pow(p);
  const IntMat2 n{mp.a - 1, mp.b, mp.c, mp.d - 1};
  const std::int64_t det = n.det();
  if (det == 0) throw MapError("M^p - I is singular");
  const std::int64_t big_d = std::abs(det);
  if (big_d > 4'000'000) throw MapError("too many periodic points to enumerate");
  const std::int64_t sg = det > 0 ? 1 : -1;
  // x = adj(N) k / det, so numerators over |det| form the group generated by
  // the columns of sign(det) adj(N).
  const std::array<std::int64_t, 2> g1{mod(sg * n.d, big_d), mod(-sg * n.c, big_d)};
  const std::array<std::int64_t, 2> g2{mod(-sg * n.b, big_d), mod(sg * n.a, big_d)};

  std::unordered_set<std::int64_t> seen;
  std::vector<std::array<std::int64_t, 2>> points;
  std::deque<std::array<std::int64_t, 2>> queue{{0, 0}};
  seen.insert(0);
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    points.push_back(u);
    for (const auto& g : {g1, g2}) {
      const std::array<std::int64_t, 2> w{(u[0] + g[0]) % big_d, (u[1] + g[1]) % big_d};
      if (seen.insert(w[0] * big_d + w[1]).second) queue.push_back(w);
    }
  }

  std::vector<int> divisors;
  for (int d = 1; d <= p; ++d) {
    if (p % d == 0) divisors.push_back(d);
  }
  std::vector<IntMat2> powers;
  for (int d : divisors) {
    const IntMat2 md = m.pow(d);
    powers.push_back({mod(md.a, big_d), mod(md.b, big_d), mod(md.c, big_d), mod(md.d, big_d)});
  }

  std::vector<PeriodicPoint> out;
  out.reserve(points.size());
  for (const auto& u : points) {
    PeriodicPoint pt;
    pt.num_x = u[0];
    pt.num_y = u[1];
    pt.denom = big_d;
    pt.point = {static_cast<double>(u[0]) / static_cast<double>(big_d),
                static_cast<double>(u[1]) / static_cast<double>(big_d)};
    pt.minimal_period = p;
    for (std::size_t i = 0; i < divisors.size(); ++i) {
      const IntMat2& q = powers[i];
      const std::int64_t x = (q.a * u[0] + q.b * u[1]) % big_d;
      const std::int64_t y = (q.c * u[0] + q.d * u[1]) % big_d;
      if (x == u[0] && y == u[1]) {
        pt.minimal_period = divisors[i];
        break;
      }
    }
    out.push_back(pt);
  }
  std::sort(out.begin(), out.end(), [](const PeriodicPoint& l, const PeriodicPoint& r) {
    return std::tie(l.num_x, l.num_y) < std::tie(r.num_x, r.num_y);
  });
  return out;
}

HyperbolicMatrix::HyperbolicMatrix(Mat2 a) : a_(a), spec_(spectrum(a)) {
  if (!std::isfinite(a.a) || !std::isfinite(a.b) || !std::isfinite(a.c) || !std::isfinite(a.d)) {
    throw MapError("matrix entries must be finite");
  }
  if (a.det() == 0.0) throw MapError("matrix is singular");
  for (double v : spec_.values) {
    if (std::abs(std::abs(v) - 1.0) < 1e-12) throw MapError("eigenvalue of modulus one");
  }
}

namespace {

struct PowerTable {
  std::vector<Mat2> pw;
  explicit PowerTable(const Mat2& a, int n_max) {
    pw.reserve(static_cast<std::size_t>(n_max) + 1);
    pw.push_back(Mat2::identity());
    for (int n = 1; n <= n_max; ++n) pw.push_back(pw.back() * a);
  }
};

double direction_ratio(const PowerTable& t, int q, int n_check, Vec2 v) {
  const double nq = (t.pw[q] * v).norm();
  double mn = std::numeric_limits<double>::infinity();
  for (int n = 2 * q; n <= 2 * q + n_check; ++n) mn = std::min(mn, (t.pw[n] * v).norm());
  return nq / std::max(v.norm(), mn);
}

}  // namespace

double contraction_ratio(const HyperbolicMatrix& a, int q, std::size_t directions, int n_check,
                         RandomStream& rng) {
  const PowerTable t(a.matrix(), 2 * q + n_check);
  double worst = 0.0;
  for (std::size_t i = 0; i < directions; ++i) {
    const double th = std::numbers::pi * rng.uniform();
    worst = std::max(worst, direction_ratio(t, q, n_check, {std::cos(th), std::sin(th)}));
  }
  return worst;
}

ContractionCertificate contraction_exponent(const HyperbolicMatrix& a,
                                            const ContractionOptions& opts) {
  if (opts.directions == 0 || opts.q_max < 1 || opts.n_check < 0) {
    throw MapError("invalid contraction options");
  }
  const PowerTable t(a.matrix(), 2 * opts.q_max + opts.n_check);
  const double limit = 0.25 + opts.slack;
  std::vector<Vec2> dirs;
  dirs.reserve(opts.directions + 2);
  for (std::size_t k = 0; k < opts.directions; ++k) {
    const double th = std::numbers::pi * (static_cast<double>(k) + 0.5) /
                      static_cast<double>(opts.directions);
    dirs.push_back({std::cos(th), std::sin(th)});
  }
  if (a.eigen().real) {
    dirs.push_back(a.eigen().vectors[0]);
    dirs.push_back(a.eigen().vectors[1]);
  }
  for (int q = 1; q <= opts.q_max; ++q) {
    double worst = 0.0;
    bool ok = true;
    for (const Vec2& v : dirs) {
      const double r = direction_ratio(t, q, opts.n_check, v);
      worst = std::max(worst, r);
      if (r > limit) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    RandomStream rng(opts.verify_seed);
    const double again = contraction_ratio(a, q, opts.directions, opts.n_check, rng);
    if (again > limit) continue;
    return {q, worst, again, dirs.size(), opts.n_check};
  }
  throw MapError("no contraction exponent q <= " + std::to_string(opts.q_max));
}

std::vector<bool> ball_pattern(const Mat2& a, Vec2 v, int n_max) {
  std::vector<bool> out;
  Vec2 w = v;
  for (int n = 0; n <= n_max; ++n) {
    out.push_back(w.norm() < 1.0);
    w = a * w;
  }
  return out;
}

double doubling_step(double x) { return badic_step(x, 2); }

double badic_step(double x, int base) {
  if (base < 2) throw MapError("base must be at least 2");
  const double y = x * base;
  return y - std::floor(y);
}

DigitOrbit::DigitOrbit(int base, std::uint64_t seed) : base_(base), tail_state_(seed) {
  if (base < 2 || base > 255) throw MapError("base must be in [2,255]");
  for (auto& d : digits_) d = static_cast<std::uint8_t>(next_tail_digit());
}

DigitOrbit::DigitOrbit(int base, double x, std::uint64_t seed) : base_(base), tail_state_(seed) {
  if (base < 2 || base > 255) throw MapError("base must be in [2,255]");
  if (!(x >= 0.0 && x < 1.0)) throw MapError("initial point must lie in [0,1)");
  for (auto& d : digits_) {
    x *= base;
    const double f = std::floor(x);
    d = static_cast<std::uint8_t>(std::clamp(f, 0.0, static_cast<double>(base - 1)));
    x -= f;
  }
}

int DigitOrbit::next_tail_digit() {
  tail_state_ += 0x9e3779b97f4a7c15ULL;
  const std::uint64_t z = mix64(tail_state_);
  return static_cast<int>(((z >> 32) * static_cast<std::uint64_t>(base_)) >> 32);
}

double DigitOrbit::value() const {
  double v = 0.0;
  for (int k = kWindow - 1; k >= 0; --k) v = (v + digit(k)) / base_;
  return v;
}

void DigitOrbit::advance() {
  digits_[head_] = static_cast<std::uint8_t>(next_tail_digit());
  head_ = (head_ + 1) % kWindow;
}

}  // namespace stp
