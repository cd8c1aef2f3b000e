#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "stp/cluster.hpp"
#include "stp/stats.hpp"

namespace stp {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest-safe decimal form: printf %.17g.
std::string fmt17(double x);

/// Columns: seed, t, m0[, m1].
void write_realization_csv(std::ostream& os, const Realization& r);
/// Points and seed only; metadata lives in the JSON file.
Realization read_realization_csv(std::istream& is);

nlohmann::json realization_to_json(const Realization& r);
Realization realization_from_json(const nlohmann::json& j);

/// Writes <stem>.csv and <stem>.json.
void save_realization(const std::filesystem::path& stem, const Realization& r);
/// Reads the JSON file (metadata and points).
Realization load_realization(const std::filesystem::path& json_file);
/// Every *.json realization in a directory, sorted by file name.
std::vector<Realization> load_realization_dir(const std::filesystem::path& dir);

nlohmann::json report_to_json(const TestReport& r);
TestReport report_from_json(const nlohmann::json& j);
nlohmann::json bundle_to_json(const ClusterRunBundle& b);

void write_cluster_sizes_csv(std::ostream& os, const std::vector<std::size_t>& sizes);

/// Fixed-width table: name, statistic, p-value, verdict.
void print_summary(std::ostream& os, const std::vector<TestReport>& reports);

void write_json_file(const std::filesystem::path& p, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& p);

}  // namespace stp
