#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stp/cluster.hpp"
#include "stp/geometry.hpp"
#include "stp/process.hpp"
#include "stp/stats.hpp"
#include "stp/systems.hpp"

namespace stp {

/// Schema violation; `field` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& msg)
      : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct SystemConfig {
  std::string type{"stadium"};  ///< stadium | sinai | diamond | cat | doubling
  double length{2.0};
  std::vector<Scatterer> discs;
  IntMat2 matrix{2, 1, 1, 1};
  int base{2};
};

struct OracleConfig {
  int base{10};
  std::vector<OracleWindow> windows;
  std::uint64_t budget{1'000'000};
};

struct ExperimentConfig {
  SystemConfig system;
  TargetSpec target{MetricBall{}};
  std::vector<double> eps_ladder{0.05};
  TimeBase time_base{TimeBase::map};
  double horizon_T{20.0};
  int seeds{100};
  std::uint64_t master_seed{1};
  std::uint64_t measure_budget{1'000'000};
  std::uint64_t step_budget{kDefaultStepBudget};
  double alpha{kDefaultAlpha};
  double bin_width{1.0};
  std::string output{"out"};
  unsigned jobs{0};
  // periodic-point experiments
  int period{1};
  int q0{0};
  double separation_a{1.0};
  std::uint64_t separation_budget{100'000};
  std::size_t psi_samples{100'000};
  double count_window{5.0};
  std::optional<OracleConfig> oracle;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& p);
/// Every field with its effective value, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& c);

Dynamics build_system(const SystemConfig& s);
PeriodicSiteConfig periodic_site(const ExperimentConfig& c);
ClusterRunOptions cluster_run_options(const ExperimentConfig& c);

}  // namespace stp
