#pragma once

#include <vector>

#include "stp/maps.hpp"
#include "stp/stats.hpp"

namespace stp {

class ClusterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A hyperbolic periodic point of a toral automorphism and the epsilon ladder
/// used to shrink balls around it.
struct PeriodicSiteConfig {
  ToralAutomorphism map{ToralAutomorphism::cat()};
  Vec2 x0{0.0, 0.0};
  int period{1};
  int q0{0};  ///< 0 selects q0 from the contraction exponent
  std::vector<double> eps_ladder{0.1, 0.05};
  double a{1.0};
};

/// Checks T^p x0 = x0 with p minimal; throws ClusterError otherwise.
void validate_site(const PeriodicSiteConfig& c);

struct Q0Selection {
  int q0{0};
  ContractionCertificate certificate;
};

/// q0 = 2 q where q is the certified contraction exponent of DT^p.
Q0Selection select_q0(const PeriodicSiteConfig& c, const ContractionOptions& opts = {});

/// Samples mu(.|A) and counts returns to A within floor(a log(1/eps)) steps.
/// With `pruned` false the plain ball is used instead (negative control).
TestReport validate_separation(const PeriodicSiteConfig& c, double eps, std::uint64_t budget,
                               RandomStream& rng, bool pruned = true);

struct ClusterRunOptions {
  double horizon_T{20.0};
  int seeds{100};
  std::uint64_t master_seed{1};
  std::uint64_t measure_budget{1'000'000};
  std::size_t psi_samples{100'000};
  double count_window{5.0};
  double lin_alpha{1.0};
  double alpha{kDefaultAlpha};
  unsigned jobs{0};
};

struct EpsilonBundle {
  double eps{0.0};
  MeasureEstimate mu_A;
  double mu_B{0.0};
  double theta_hat{1.0};
  ClusterSizeLaw law;
  std::vector<std::size_t> cluster_sizes;
  std::size_t dropped_open{0};
  std::vector<TestReport> reports;  ///< (a) interarrival, kallenberg, spatial; (b); (c); (d)

  bool pass() const;
};

struct ClusterRunBundle {
  int q0{0};
  ContractionCertificate certificate;
  std::vector<EpsilonBundle> per_eps;
  TestReport theta_drift;

  bool pass() const;
};

/// Fraction of clusters whose marks disagree with the cluster map of their
/// anchor, at tolerance 10 eps^alpha on normalized marks.
TestReport cluster_linearization(const std::vector<ClusterRealization>& crs, const ToralSystem& sys,
                                 const ClusterPruned& spec, double lin_alpha, double max_fraction = 0.05);

/// Theta-rescaled ball process count identity, checked pointwise per realization.
TestReport rescale_identity(const std::vector<ClusterRealization>& crs);

/// Relative change of theta-hat between consecutive ladder steps below `max_rel`.
TestReport theta_stability(const std::vector<double>& eps, const std::vector<double>& theta, double max_rel = 0.10);

ClusterRunBundle run_cluster_experiment(const PeriodicSiteConfig& c, const ClusterRunOptions& opts);

}  // namespace stp
