#include "stp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>

namespace stp {

double TestReport::detail(const std::string& key) const {
  for (const auto& [k, v] : details) {
    if (k == key) return v;
  }
  throw std::out_of_range("no detail named " + key);
}

// ------------------------------------------------------------------ distributions

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double chi2_cdf(double x, double dof) {
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared(dof), x);
}

double chi2_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), x));
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-transformed series converges fast for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
}

double binomial_two_sided(std::uint64_t k, std::uint64_t n, double p) {
  if (n == 0) return 1.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  const boost::math::binomial dist(static_cast<double>(n), p);
  const double pk = boost::math::pdf(dist, static_cast<double>(k));
  double total = 0.0;
  for (std::uint64_t i = 0; i <= n; ++i) {
    const double pi = boost::math::pdf(dist, static_cast<double>(i));
    if (pi <= pk * (1.0 + 1e-7)) total += pi;
  }
  return std::min(1.0, total);
}

std::pair<double, double> mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw StatsError("Mann-Whitney needs two non-empty samples");
  struct Item {
    double v;
    int group;
  };
  std::vector<Item> all;
  all.reserve(a.size() + b.size());
  for (double v : a) all.push_back({v, 0});
  for (double v : b) all.push_back({v, 1});
  std::sort(all.begin(), all.end(), [](const Item& l, const Item& r) { return l.v < r.v; });
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  double rank_sum = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].group == 0) rank_sum += avg;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;
  const double mean = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return {0.0, 1.0};
  const double diff = u - mean;
  const double z = (diff - std::copysign(std::min(0.5, std::abs(diff)), diff)) / std::sqrt(var);
  return {z, std::min(1.0, 2.0 * normal_sf(std::abs(z)))};
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw StatsError("empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

TestReport uniformity_test(std::vector<double> pvalues, double alpha) {
  TestReport r;
  r.name = "p-value uniformity (KS)";
  r.null_desc = "p-values ~ U(0,1)";
  r.n = pvalues.size();
  r.alpha = alpha;
  r.statistic = ks_statistic(std::move(pvalues), [](double x) { return std::clamp(x, 0.0, 1.0); });
  r.p_value = ks_pvalue(r.statistic, r.n);
  r.pass = r.p_value > alpha;
  return r;
}

// ------------------------------------------------------------------ process tests

std::vector<double> censored_gaps(const Realization& r, double censor) {
  std::vector<double> out;
  const double last_start = r.window_T - censor;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const double t = r.points[i].t;
    if (t > last_start) break;
    const double next = i + 1 < r.points.size() ? r.points[i + 1].t : r.window_T + censor;
    out.push_back(std::min(next - t, censor));
  }
  return out;
}

TestReport interarrival_test(const std::vector<Realization>& rs, double alpha, double censor,
                             std::size_t min_gaps) {
  std::vector<double> gaps;
  for (const Realization& r : rs) {
    const auto g = censored_gaps(r, censor);
    gaps.insert(gaps.end(), g.begin(), g.end());
  }
  if (gaps.size() < min_gaps) {
    throw StatsError("inter-arrival test needs at least " + std::to_string(min_gaps) + " gaps, got " +
                     std::to_string(gaps.size()));
  }
  std::sort(gaps.begin(), gaps.end());
  const double n = static_cast<double>(gaps.size());
  double d = 0.0;
  std::size_t below = 0;
  for (std::size_t i = 0; i < gaps.size() && gaps[i] < censor; ++i) {
    const double f = 1.0 - std::exp(-gaps[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    below = i + 1;
  }
  d = std::max(d, std::abs(static_cast<double>(below) / n - (1.0 - std::exp(-censor))));
  double mean = 0.0;
  for (double g : gaps) mean += g;
  mean /= n;

  TestReport r;
  r.name = "inter-arrival KS vs Exp(1)";
  r.null_desc = "gaps ~ Exp(1), censored at " + std::to_string(censor);
  r.statistic = d;
  r.n = gaps.size();
  r.alpha = alpha;
  r.p_value = ks_pvalue(d, gaps.size());
  r.pass = r.p_value > alpha;
  r.details = {{"mean_gap", mean}, {"min_gap", gaps.front()}, {"censored", n - static_cast<double>(below)}};
  return r;
}

TestReport dispersion_test(const std::vector<Realization>& rs, double bin_width, double alpha,
                           std::size_t min_bins) {
  if (!(bin_width > 0.0)) throw StatsError("bin width must be positive");
  std::vector<double> counts;
  for (const Realization& r : rs) {
    const auto c = window_counts(r, bin_width);
    counts.insert(counts.end(), c.begin(), c.end());
  }
  if (counts.size() < min_bins) {
    throw StatsError("dispersion test needs at least " + std::to_string(min_bins) + " bins");
  }
  const double n = static_cast<double>(counts.size());
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
  if (mean <= 0.0) throw StatsError("all bins are empty");
  double ss = 0.0;
  for (double c : counts) ss += (c - mean) * (c - mean);
  const double var = ss / (n - 1.0);
  const double index = var / mean;
  const double stat = (n - 1.0) * index;
  const double lower = chi2_cdf(stat, n - 1.0);
  const boost::math::chi_squared dist(n - 1.0);

  TestReport r;
  r.name = "index of dispersion";
  r.null_desc = "(n-1) var/mean ~ chi2(n-1)";
  r.statistic = index;
  r.n = counts.size();
  r.alpha = alpha;
  r.p_value = std::min(1.0, 2.0 * std::min(lower, 1.0 - lower));
  r.ci = std::pair{boost::math::quantile(dist, alpha / 2.0) / (n - 1.0),
                   boost::math::quantile(dist, 1.0 - alpha / 2.0) / (n - 1.0)};
  r.pass = r.p_value > alpha;
  r.details = {{"mean_count", mean}, {"variance", var}, {"bin_width", bin_width}};
  return r;
}

std::vector<Rectangle> auto_rectangles(const IntensityModel& m, double window_T, std::size_t count) {
  const Box s = m.support;
  const double m0 = 0.5 * (s.lo[0] + s.hi[0]);
  const double m1 = 0.5 * (s.lo[1] + s.hi[1]);
  std::vector<Box> boxes;
  if (m.dim == 1) {
    const double q1 = s.lo[0] + 0.25 * (s.hi[0] - s.lo[0]);
    const double q3 = s.lo[0] + 0.75 * (s.hi[0] - s.lo[0]);
    boxes = {s, {{s.lo[0], 0}, {m0, 0}}, {{m0, 0}, {s.hi[0], 0}}, {{q1, 0}, {q3, 0}}};
  } else {
    const double c0 = 0.5 * (s.hi[0] - s.lo[0]) * 0.5;
    const double c1 = 0.5 * (s.hi[1] - s.lo[1]) * 0.5;
    boxes = {s,
             {{s.lo[0], s.lo[1]}, {m0, s.hi[1]}},
             {{m0, s.lo[1]}, {s.hi[0], s.hi[1]}},
             {{s.lo[0], s.lo[1]}, {s.hi[0], m1}},
             {{s.lo[0], m1}, {s.hi[0], s.hi[1]}},
             {{s.lo[0], s.lo[1]}, {m0, m1}},
             {{m0, m1}, {s.hi[0], s.hi[1]}},
             {{m0 - c0, m1 - c1}, {m0 + c0, m1 + c1}}};
  }
  const double targets[] = {1.0, 2.0, 0.5, 3.0, 1.5, 0.8, 4.0, 2.5};
  std::vector<Rectangle> out;
  for (std::size_t i = 0; out.size() < count && i < 4 * count; ++i) {
    const Box& f = boxes[i % boxes.size()];
    const double mf = m.mass(f);
    if (mf <= 0.0) continue;
    double eta = targets[i % 8];
    double len = eta / mf;
    if (len > window_T) {
      len = window_T;
      eta = len * mf;
    }
    if (eta < 0.2 || eta > 5.0) continue;
    const double room = window_T - len;
    const double frac = std::fmod(0.618033988749895 * static_cast<double>(i), 1.0);
    const double t1 = room * frac;
    out.push_back({t1, t1 + len, f});
  }
  if (out.empty()) throw StatsError("no rectangle with expected count in [0.2, 5]");
  return out;
}

TestReport kallenberg_check(const std::vector<Realization>& rs, const std::vector<Rectangle>& rects,
                            const IntensityModel& m, double alpha, std::size_t min_realizations) {
  if (rs.size() < min_realizations) {
    throw StatsError("Kallenberg check needs at least " + std::to_string(min_realizations) +
                     " realizations");
  }
  if (rects.empty()) throw StatsError("no rectangles");
  const double n = static_cast<double>(rs.size());
  TestReport r;
  r.name = "Kallenberg mean/void check";
  r.null_desc = "mean count = eta(R), P(void) = exp(-eta(R)), Bonferroni over all tests";
  r.n = rs.size();
  r.alpha = alpha;
  double min_p = 1.0;
  double max_z = 0.0;
  std::vector<std::vector<double>> counts;
  for (std::size_t k = 0; k < rects.size(); ++k) {
    const Rectangle& R = rects[k];
    if (!(R.t1 < R.t2)) throw StatsError("rectangle with empty time interval");
    const double mf = m.mass(R.mark);
    if (mf <= 0.0) throw StatsError("rectangle outside the mark support");
    const double eta = (R.t2 - R.t1) * mf;
    std::vector<double> c;
    std::uint64_t voids = 0;
    double sum = 0.0;
    for (const Realization& x : rs) {
      if (R.t2 > x.window_T * (1.0 + 1e-12)) throw StatsError("rectangle beyond the window");
      const double v = static_cast<double>(x.count_in(R.t1, R.t2, &R.mark));
      c.push_back(v);
      sum += v;
      if (v == 0.0) ++voids;
    }
    const double mean = sum / n;
    const double z = (mean - eta) / std::sqrt(eta / n);
    const double p_mean = std::min(1.0, 2.0 * normal_sf(std::abs(z)));
    const double p_void = binomial_two_sided(voids, rs.size(), std::exp(-eta));
    min_p = std::min({min_p, p_mean, p_void});
    max_z = std::max(max_z, std::abs(z));
    const std::string tag = "R" + std::to_string(k) + "_";
    r.details.push_back({tag + "eta", eta});
    r.details.push_back({tag + "mean", mean});
    r.details.push_back({tag + "void_freq", static_cast<double>(voids) / n});
    r.details.push_back({tag + "p_mean", p_mean});
    r.details.push_back({tag + "p_void", p_void});
    counts.push_back(std::move(c));
  }
  // Independence: correlation of counts over time-disjoint pairs.
  double max_corr = 0.0;
  for (std::size_t a = 0; a < rects.size(); ++a) {
    for (std::size_t b = a + 1; b < rects.size(); ++b) {
      if (rects[a].t2 > rects[b].t1 && rects[b].t2 > rects[a].t1) continue;
      const auto& x = counts[a];
      const auto& y = counts[b];
      const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
      const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
      }
      if (sxx > 0.0 && syy > 0.0) max_corr = std::max(max_corr, std::abs(sxy / std::sqrt(sxx * syy)));
    }
  }
  const double tests = 2.0 * static_cast<double>(rects.size());
  r.statistic = max_z;
  r.p_value = std::min(1.0, tests * min_p);
  r.pass = r.p_value > alpha;
  r.details.push_back({"rectangles", static_cast<double>(rects.size())});
  r.details.push_back({"max_abs_corr_disjoint", max_corr});
  return r;
}

std::vector<Mark> pooled_marks(const std::vector<Realization>& rs) {
  std::vector<Mark> out;
  for (const Realization& r : rs) {
    for (const MarkedPoint& p : r.points) out.push_back(p.mark);
  }
  return out;
}

TestReport spatial_gof(const std::vector<Mark>& marks, const IntensityModel& m, Grid grid, double alpha,
                       std::size_t min_marks) {
  if (marks.size() < min_marks) {
    throw StatsError("spatial test needs at least " + std::to_string(min_marks) + " marks, got " +
                     std::to_string(marks.size()));
  }
  const int nx = grid.nx;
  const int ny = m.dim == 1 ? 1 : grid.ny;
  if (nx < 1 || ny < 1) throw StatsError("grid must have positive size");
  const Box s = m.support;
  const double dx = (s.hi[0] - s.lo[0]) / nx;
  const double dy = m.dim == 1 ? 0.0 : (s.hi[1] - s.lo[1]) / ny;
  const double n = static_cast<double>(marks.size());
  std::vector<double> obs(static_cast<std::size_t>(nx) * ny, 0.0);
  std::size_t outside = 0;
  for (const Mark& x : marks) {
    int i = static_cast<int>(std::floor((x[0] - s.lo[0]) / dx));
    int j = m.dim == 1 ? 0 : static_cast<int>(std::floor((x[1] - s.lo[1]) / dy));
    if (x[0] == s.hi[0]) i = nx - 1;
    if (m.dim == 2 && x[1] == s.hi[1]) j = ny - 1;
    if (i < 0 || i >= nx || j < 0 || j >= ny) {
      ++outside;
      continue;
    }
    obs[static_cast<std::size_t>(i) * ny + j] += 1.0;
  }
  std::vector<double> expct(obs.size());
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      Box cell{{s.lo[0] + i * dx, m.dim == 1 ? 0.0 : s.lo[1] + j * dy},
               {s.lo[0] + (i + 1) * dx, m.dim == 1 ? 0.0 : s.lo[1] + (j + 1) * dy}};
      expct[static_cast<std::size_t>(i) * ny + j] = n * m.mass(cell);
    }
  }
  // Cells below 5 expected are pooled into one bin (order independent).
  std::vector<std::pair<double, double>> bins;
  double low_o = 0.0, low_e = 0.0;
  bool impossible = outside > 0;
  for (std::size_t c = 0; c < obs.size(); ++c) {
    if (expct[c] <= 0.0) {
      if (obs[c] > 0.0) impossible = true;
      continue;
    }
    if (expct[c] < 5.0) {
      low_o += obs[c];
      low_e += expct[c];
    } else {
      bins.push_back({obs[c], expct[c]});
    }
  }
  if (low_e > 0.0) {
    if (low_e < 5.0 && !bins.empty()) {
      auto smallest = std::min_element(bins.begin(), bins.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
      smallest->first += low_o;
      smallest->second += low_e;
    } else {
      bins.push_back({low_o, low_e});
    }
  }
  if (bins.size() < 2) throw StatsError("too few bins for a chi-square test");
  double chi2 = 0.0;
  for (const auto& [o, e] : bins) chi2 += (o - e) * (o - e) / e;
  const double dof = static_cast<double>(bins.size()) - 1.0;

  TestReport r;
  r.name = "spatial chi-square";
  r.null_desc = "marks ~ " + m.name;
  r.statistic = chi2;
  r.n = marks.size();
  r.alpha = alpha;
  r.p_value = impossible ? 0.0 : chi2_sf(chi2, dof);
  r.pass = r.p_value > alpha;
  r.details = {{"bins", static_cast<double>(bins.size())}, {"outside_support", static_cast<double>(outside)}};
  return r;
}

// ------------------------------------------------------------------ diagnostics

ProportionEstimate wilson(std::uint64_t hits, std::uint64_t n, double z) {
  ProportionEstimate e;
  e.n = n;
  e.hits = hits;
  if (n == 0) return e;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  e.p = p;
  e.lo = std::max(0.0, centre - half);
  e.hi = std::min(1.0, centre + half);
  return e;
}

namespace {

std::uint64_t draw_cap(std::uint64_t budget) { return std::max<std::uint64_t>(10'000'000, 10'000 * budget); }

[[noreturn]] void starve() { throw StatsError("rejection sampler starved; target too small for the budget"); }

}  // namespace

ProportionEstimate short_return_prob(const BilliardSystem& sys, const TargetSpec& spec, int p_eps,
                                     std::uint64_t budget, RandomStream& rng) {
  if (p_eps < 1) throw StatsError("return window must be at least one step");
  const BilliardDetector det(sys, spec);
  std::uint64_t got = 0, hits = 0, draws = 0;
  while (got < budget) {
    if (++draws > draw_cap(budget)) starve();
    ReflectedVector y = sys.sample(rng);
    if (det.barrier()) {
      const FlightRecord f = sys.advance(y);
      if (!det.probe(f)) continue;
      y = f.after;
    } else if (!det.contains(y)) {
      continue;
    }
    bool returned = false;
    bool broken = false;
    for (int k = 0; k < p_eps && !returned; ++k) {
      const FlightRecord f = sys.advance(y);
      if (!f.ok()) {
        broken = true;
        break;
      }
      if (det.probe(f)) returned = true;
      y = f.after;
    }
    if (broken) continue;
    ++got;
    if (returned) ++hits;
  }
  return wilson(hits, got);
}

ProportionEstimate short_return_prob(const ToralSystem& sys, const TargetSpec& spec, int p_eps,
                                     std::uint64_t budget, RandomStream& rng) {
  if (p_eps < 1) throw StatsError("return window must be at least one step");
  const ToralDetector det(sys, spec);
  const double eps = target_epsilon(spec);
  const Vec2 c = std::visit([](const auto& s) -> Vec2 {
    if constexpr (requires { s.center; }) return s.center;
    else throw StatsError("target has no centre");
  }, spec);
  std::uint64_t got = 0, hits = 0, draws = 0;
  while (got < budget) {
    if (++draws > draw_cap(budget)) starve();
    Vec2 y = wrap_torus(c + Vec2{eps * (2.0 * rng.uniform() - 1.0), eps * (2.0 * rng.uniform() - 1.0)});
    if (!det.contains(y)) continue;
    bool returned = false;
    for (int k = 0; k < p_eps && !returned; ++k) {
      y = sys.map.apply(y);
      if (det.contains(y)) returned = true;
    }
    ++got;
    if (returned) ++hits;
  }
  return wilson(hits, got);
}

ProportionEstimate short_return_prob(const DigitSystem& sys, const TargetSpec& spec, int p_eps,
                                     std::uint64_t budget, RandomStream& rng) {
  if (p_eps < 1) throw StatsError("return window must be at least one step");
  const DigitDetector det(sys, spec);
  std::uint64_t got = 0, hits = 0, draws = 0;
  while (got < budget) {
    if (++draws > draw_cap(budget)) starve();
    DigitOrbit y = sys.sample(rng);
    if (!det.contains(y)) continue;
    bool returned = false;
    for (int k = 0; k < p_eps && !returned; ++k) {
      y.advance();
      if (det.contains(y)) returned = true;
    }
    ++got;
    if (returned) ++hits;
  }
  return wilson(hits, got);
}

ProportionEstimate annulus_ratio(const std::function<double(RandomStream&)>& distance_sampler, double eps,
                                 double delta, std::uint64_t budget, RandomStream& rng) {
  if (!(delta > 1.0)) throw StatsError("annulus exponent delta must exceed 1");
  if (!(eps > 0.0)) throw StatsError("epsilon must be positive");
  const double inner = eps - std::pow(eps, delta);
  std::uint64_t in = 0, ring = 0;
  for (std::uint64_t i = 0; i < budget; ++i) {
    const double d = distance_sampler(rng);
    if (d < eps) {
      ++in;
      if (d >= inner) ++ring;
    }
  }
  if (in == 0) starve();
  return wilson(ring, in);
}

double sup_annulus_exact(double eps, double delta) {
  const double k = (eps - std::pow(eps, delta)) / eps;
  return 1.0 - k * k;
}

// ------------------------------------------------------------------ clusters

ClusterSizeLaw psi_size_law(const Mat2& dt, int p, int q0, std::size_t samples, RandomStream& rng,
                            BallNorm norm) {
  if (samples == 0) throw StatsError("need at least one sample");
  const Mat2 fwd = dt.pow(p);
  std::vector<std::size_t> hist;
  ClusterSizeLaw law;
  std::size_t draws = 0;
  while (law.samples < samples) {
    if (++draws > 1000 * samples + 1'000'000) throw StatsError("pruned limit set too small to sample");
    const Vec2 y{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
    if (norm == BallNorm::euclidean && y.norm() >= 1.0) continue;
    if (!in_pruned_limit(fwd, q0, y, norm)) continue;
    std::vector<PsiElement> chain;
    try {
      chain = psi_predict(dt, p, q0, y, norm);
    } catch (const ProcessError&) {
      ++law.capped;
      continue;
    }
    std::size_t size = 0;
    for (const auto& e : chain) size += e.in_ball ? 1 : 0;
    if (hist.size() < size) hist.resize(size, 0);
    ++hist[size - 1];
    ++law.samples;
  }
  const double n = static_cast<double>(law.samples);
  law.prob.resize(hist.size());
  law.mean = 0.0;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    law.prob[k] = static_cast<double>(hist[k]) / n;
    law.mean += static_cast<double>(k + 1) * law.prob[k];
  }
  law.theta = 1.0 / law.mean;
  return law;
}

std::vector<double> window_counts(const Realization& r, double w) {
  const auto nw = static_cast<std::size_t>(std::floor(r.window_T / w + 1e-9));
  std::vector<double> c(nw, 0.0);
  for (const MarkedPoint& p : r.points) {
    const auto k = static_cast<std::size_t>(std::floor(p.t / w));
    if (k < nw) c[k] += 1.0;
  }
  return c;
}

Realization synthetic_compound_poisson(const ClusterSizeLaw& law, double rate, double window_T,
                                       RandomStream& rng) {
  if (law.prob.empty()) throw StatsError("empty cluster-size law");
  Realization r;
  r.window_T = window_T;
  r.mark_dim = 0;
  double t = 0.0;
  while (true) {
    t += rng.exponential() / rate;
    if (t > window_T) break;
    double u = rng.uniform();
    std::size_t size = law.prob.size();
    for (std::size_t k = 0; k < law.prob.size(); ++k) {
      u -= law.prob[k];
      if (u < 0.0) {
        size = k + 1;
        break;
      }
    }
    for (std::size_t k = 0; k < size; ++k) r.points.push_back({t, {0.0, 0.0}});
  }
  return r;
}

TestReport compound_poisson_test(const std::vector<ClusterRealization>& crs, const ClusterSizeLaw& law,
                                 double window, RandomStream& rng, double alpha, std::size_t min_clusters) {
  if (law.prob.empty()) throw StatsError("cluster-size model undefined");
  std::vector<std::size_t> sizes;
  for (const auto& cr : crs) {
    for (const auto& c : cr.clusters) sizes.push_back(c.size());
  }
  if (sizes.size() < min_clusters) {
    throw StatsError("compound Poisson test needs at least " + std::to_string(min_clusters) +
                     " clusters, got " + std::to_string(sizes.size()));
  }
  const double n = static_cast<double>(sizes.size());
  const std::size_t kmax = std::max(*std::max_element(sizes.begin(), sizes.end()), law.prob.size());
  std::vector<double> obs(kmax, 0.0), expct(kmax, 0.0);
  for (std::size_t s : sizes) obs[s - 1] += 1.0;
  for (std::size_t k = 0; k < law.prob.size(); ++k) expct[k] = n * law.prob[k];
  // Merge upward until each bin expects at least 5; remainder joins the last bin.
  std::vector<std::pair<double, double>> bins;
  double ao = 0.0, ae = 0.0;
  for (std::size_t k = 0; k < kmax; ++k) {
    ao += obs[k];
    ae += expct[k];
    if (ae >= 5.0) {
      bins.push_back({ao, ae});
      ao = ae = 0.0;
    }
  }
  if (ao > 0.0 || ae > 0.0) {
    if (bins.empty()) {
      bins.push_back({ao, ae});
    } else {
      bins.back().first += ao;
      bins.back().second += ae;
    }
  }
  double chi2 = 0.0;
  bool impossible = false;
  for (const auto& [o, e] : bins) {
    if (e <= 0.0) {
      if (o > 0.0) impossible = true;
      continue;
    }
    chi2 += (o - e) * (o - e) / e;
  }
  const double dof = static_cast<double>(bins.size()) - 1.0;
  const double p_sizes = impossible ? 0.0 : (dof < 1.0 ? 1.0 : chi2_sf(chi2, dof));

  std::vector<double> real_counts;
  for (const auto& cr : crs) {
    const Realization times = theta_rescale(temporal_projection(cr.ball_visits), cr.theta);
    const auto c = window_counts(times, window);
    real_counts.insert(real_counts.end(), c.begin(), c.end());
  }
  if (real_counts.size() < 20) throw StatsError("too few count windows");
  std::vector<double> synth_counts;
  while (synth_counts.size() < real_counts.size()) {
    const Realization s = synthetic_compound_poisson(law, law.theta, 100.0 * window, rng);
    const auto c = window_counts(s, window);
    synth_counts.insert(synth_counts.end(), c.begin(), c.end());
  }
  synth_counts.resize(real_counts.size());
  const auto [z, p_counts] = mann_whitney(real_counts, synth_counts);

  auto mean_var = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [rm, rv] = mean_var(real_counts);
  const auto [sm, sv] = mean_var(synth_counts);
  double mean_size = 0.0;
  for (std::size_t s : sizes) mean_size += static_cast<double>(s);
  mean_size /= n;

  TestReport r;
  r.name = "compound Poisson cluster test";
  r.null_desc = "sizes ~ cluster-map law; windowed counts ~ compound Poisson(theta, law)";
  r.statistic = chi2;
  r.n = sizes.size();
  r.alpha = alpha;
  // min of two independent p-values, made uniform again
  const double pmin = std::min(p_sizes, p_counts);
  r.p_value = 1.0 - (1.0 - pmin) * (1.0 - pmin);
  r.pass = r.p_value > alpha;
  r.details = {{"p_sizes", p_sizes},          {"size_bins", static_cast<double>(bins.size())},
               {"mean_size", mean_size},      {"model_mean_size", law.mean},
               {"p_counts", p_counts},        {"mann_whitney_z", z},
               {"count_mean", rm},            {"count_var", rv},
               {"synthetic_mean", sm},        {"synthetic_var", sv},
               {"windows", static_cast<double>(real_counts.size())}};
  return r;
}

// ------------------------------------------------------------------ i.i.d. oracle

double oracle_product(const std::vector<OracleWindow>& w) {
  double p = 1.0;
  for (const auto& x : w) p *= std::pow(1.0 - (x.hi - x.lo), x.q);
  return p;
}

TestReport iid_oracle_check(const std::vector<OracleWindow>& w, int base, std::uint64_t budget,
                            RandomStream& rng, double alpha) {
  if (w.empty()) throw StatsError("no avoidance windows");
  if (base < 2 || base > 255) throw StatsError("base must be in [2,255]");
  struct Digits {
    int p, q, lo, hi;
  };
  std::vector<Digits> d;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& x = w[i];
    if (x.p < 0 || x.q < 1) throw StatsError("window needs p >= 0 and q >= 1");
    if (i + 1 < w.size() && !(x.p + x.q < w[i + 1].p)) {
      throw StatsError("windows overlap: need p_i + q_i < p_{i+1}");
    }
    const double lo = x.lo * base;
    const double hi = x.hi * base;
    if (std::abs(lo - std::round(lo)) > 1e-9 || std::abs(hi - std::round(hi)) > 1e-9 || !(x.lo < x.hi) ||
        x.lo < 0.0 || x.hi > 1.0) {
      throw StatsError("targets must be unions of first-digit cylinders of the base");
    }
    d.push_back({x.p, x.q, static_cast<int>(std::round(lo)), static_cast<int>(std::round(hi))});
  }
  const double exact = oracle_product(w);
  std::uint64_t avoid = 0;
  for (std::uint64_t s = 0; s < budget; ++s) {
    DigitOrbit o(base, rng.bits());
    int pos = 0;
    bool ok = true;
    for (const auto& x : d) {
      for (int j = 1; j <= x.q && ok; ++j) {
        // T^{p+j} x lies in the cylinder iff digit p+j (0-based) of x does
        while (pos < x.p + j) {
          o.advance();
          ++pos;
        }
        const int dig = o.digit(0);
        if (dig >= x.lo && dig < x.hi) ok = false;
      }
      if (!ok) break;
    }
    if (ok) ++avoid;
  }
  const double n = static_cast<double>(budget);
  const double phat = static_cast<double>(avoid) / n;
  const double sigma = std::sqrt(exact * (1.0 - exact) / n);
  const double z = sigma > 0.0 ? (phat - exact) / sigma : 0.0;

  TestReport r;
  r.name = "i.i.d. oracle joint avoidance";
  r.null_desc = "P(avoid all windows) = prod (1 - mu(A_i))^{q_i}";
  r.statistic = z;
  r.n = budget;
  r.alpha = alpha;
  r.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(z)));
  r.ci = std::pair{phat - 3.0 * sigma, phat + 3.0 * sigma};
  r.pass = std::abs(z) <= 3.0;
  r.details = {{"estimate", phat}, {"exact", exact}, {"sigma", sigma}, {"abs_diff", std::abs(phat - exact)}};
  return r;
}

}  // namespace stp
