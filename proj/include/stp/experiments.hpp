#pragma once

#include <vector>

#include "stp/config.hpp"

namespace stp {

/// Pruned targets with q0 = 0 get q0 from the contraction exponent.
ExperimentConfig resolve_config(ExperimentConfig c);

/// mu(A) used for time normalization: analytic when known, else Monte Carlo.
struct TargetMeasure {
  double value{0.0};
  MeasureEstimate estimate;
  bool analytic{false};
};

TargetMeasure target_measure(const Dynamics& sys, const TargetSpec& spec, std::uint64_t budget,
                             std::uint64_t seed);

/// One realization per seed at one ladder step. Starts are drawn from the
/// invariant measure; orbits that hit a corner or graze are redrawn.
std::vector<Realization> simulate_eps(const Dynamics& sys, const TargetSpec& spec, double mu,
                                      const ExperimentConfig& c, std::size_t eps_index);

IntensityModel model_for(const Dynamics& sys, const TargetSpec& spec);

/// Inter-arrival, dispersion, Kallenberg and spatial tests (the last two only
/// when marks are present).
std::vector<TestReport> poisson_battery(const std::vector<Realization>& rs, const IntensityModel& m,
                                        double alpha, double bin_width);

/// S_n tau / (n tau_bar) along one orbit.
TestReport birkhoff_ratio(const Table& table, std::uint64_t n, std::uint64_t seed, double tol = 0.01);

/// Inter-arrival KS statistics of the map- and flow-normalized views of the
/// same orbits must differ by less than `tol`.
TestReport flow_map_consistency(const BilliardSystem& sys, const TargetSpec& spec, double mu,
                                const ExperimentConfig& c, double tol = 0.02);

/// Homogeneous Poisson realizations with uniform marks on (-1,1)^2.
std::vector<Realization> poisson_fixture(int count, double horizon_T, std::uint64_t seed);

}  // namespace stp
