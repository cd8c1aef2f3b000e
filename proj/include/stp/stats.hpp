#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stp/process.hpp"

namespace stp {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultAlpha = 0.01;

struct TestReport {
  std::string name;
  double statistic{0.0};
  std::string null_desc;
  double p_value{1.0};
  std::optional<std::pair<double, double>> ci;
  std::size_t n{0};
  double alpha{kDefaultAlpha};
  bool pass{true};
  std::vector<std::pair<std::string, double>> details;

  double detail(const std::string& key) const;
};

// ------------------------------------------------------------------ distributions

double normal_sf(double z);
double chi2_cdf(double x, double dof);
double chi2_sf(double x, double dof);
/// Kolmogorov limiting tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);
/// One-sample KS p-value with Stephens' small-sample correction.
double ks_pvalue(double d, std::size_t n);
/// Two-sided exact binomial test (sum of outcomes no more likely than k).
double binomial_two_sided(std::uint64_t k, std::uint64_t n, double p);
/// Two-sided Mann-Whitney U test, normal approximation with tie correction.
std::pair<double, double> mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

/// KS statistic of a sample against a continuous cdf.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
/// KS test of p-values against U(0,1).
TestReport uniformity_test(std::vector<double> pvalues, double alpha = 0.001);

// ------------------------------------------------------------------ process tests

/// Gaps used by the inter-arrival test: the residual time from each event t_i
/// with t_i <= T - censor to the next event, censored at `censor`.
std::vector<double> censored_gaps(const Realization& r, double censor);

TestReport interarrival_test(const std::vector<Realization>& rs, double alpha = kDefaultAlpha,
                             double censor = 8.0, std::size_t min_gaps = 500);

TestReport dispersion_test(const std::vector<Realization>& rs, double bin_width,
                           double alpha = kDefaultAlpha, std::size_t min_bins = 50);

struct Rectangle {
  double t1{0.0};
  double t2{1.0};
  Box mark;
};

/// Rectangles with expected counts in [0.2, 5] spread over time and mark space.
std::vector<Rectangle> auto_rectangles(const IntensityModel& m, double window_T, std::size_t count = 8);

TestReport kallenberg_check(const std::vector<Realization>& rs, const std::vector<Rectangle>& rects,
                            const IntensityModel& m, double alpha = kDefaultAlpha,
                            std::size_t min_realizations = 100);

struct Grid {
  int nx{10};
  int ny{10};
};

std::vector<Mark> pooled_marks(const std::vector<Realization>& rs);

TestReport spatial_gof(const std::vector<Mark>& marks, const IntensityModel& m, Grid grid = {},
                       double alpha = kDefaultAlpha, std::size_t min_marks = 1000);

// ------------------------------------------------------------------ diagnostics

struct ProportionEstimate {
  double p{0.0};
  double lo{0.0};
  double hi{1.0};
  std::uint64_t n{0};
  std::uint64_t hits{0};
};

/// Wilson score interval at the given two-sided level.
ProportionEstimate wilson(std::uint64_t hits, std::uint64_t n, double z = 2.5758);

/// Fraction of A-conditioned starts that return to A within p_eps steps.
ProportionEstimate short_return_prob(const BilliardSystem& sys, const TargetSpec& spec, int p_eps,
                                     std::uint64_t budget, RandomStream& rng);
ProportionEstimate short_return_prob(const ToralSystem& sys, const TargetSpec& spec, int p_eps,
                                     std::uint64_t budget, RandomStream& rng);
ProportionEstimate short_return_prob(const DigitSystem& sys, const TargetSpec& spec, int p_eps,
                                     std::uint64_t budget, RandomStream& rng);

/// mu(B(x0,eps) minus B(x0, eps - eps^delta)) / mu(B(x0,eps)) from sampled distances d(x, x0).
ProportionEstimate annulus_ratio(const std::function<double(RandomStream&)>& distance_sampler,
                                 double eps, double delta, std::uint64_t budget, RandomStream& rng);
/// Exact ratio for Lebesgue sup-balls: 1 - ((eps - eps^delta)/eps)^2.
double sup_annulus_exact(double eps, double delta);

// ------------------------------------------------------------------ clusters

/// Cluster-size law predicted by the cluster map on uniformly sampled anchors.
struct ClusterSizeLaw {
  std::vector<double> prob;   ///< prob[k] = P(size = k + 1)
  double mean{1.0};
  double theta{1.0};          ///< 1 / mean
  std::size_t samples{0};
  std::size_t capped{0};
};

ClusterSizeLaw psi_size_law(const Mat2& dt, int p, int q0, std::size_t samples, RandomStream& rng,
                            BallNorm norm = BallNorm::sup);

/// Windowed counts of a times-only process (windows of width w inside [0, window_T]).
std::vector<double> window_counts(const Realization& r, double w);

/// Compound Poisson sample: anchors at rate `rate`, sizes drawn from `law`.
Realization synthetic_compound_poisson(const ClusterSizeLaw& law, double rate, double window_T,
                                       RandomStream& rng);

TestReport compound_poisson_test(const std::vector<ClusterRealization>& crs, const ClusterSizeLaw& law,
                                 double window, RandomStream& rng, double alpha = kDefaultAlpha,
                                 std::size_t min_clusters = 300);

// ------------------------------------------------------------------ i.i.d. oracle

/// Avoidance window: the orbit point T^{p+j} x stays out of the digit cylinder
/// [lo, hi) for j = 1..q.
struct OracleWindow {
  int p{0};
  int q{1};
  double lo{0.0};
  double hi{0.1};
};

double oracle_product(const std::vector<OracleWindow>& w);

TestReport iid_oracle_check(const std::vector<OracleWindow>& w, int base, std::uint64_t budget,
                            RandomStream& rng, double alpha = kDefaultAlpha);

}  // namespace stp
