#include "stp/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace stp {

using nlohmann::json;

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError("bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void write_realization_csv(std::ostream& os, const Realization& r) {
  os << "seed,t";
  for (int i = 0; i < r.mark_dim; ++i) os << ",m" << i;
  os << '\n';
  for (const MarkedPoint& p : r.points) {
    os << r.seed << ',' << fmt17(p.t);
    for (int i = 0; i < r.mark_dim; ++i) os << ',' << fmt17(p.mark[i]);
    os << '\n';
  }
}

Realization read_realization_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty CSV");
  const auto head = split(line);
  if (head.size() < 2 || head[0] != "seed" || head[1] != "t" || head.size() > 4) {
    throw IoError("CSV header must be seed,t[,m0[,m1]]");
  }
  Realization r;
  r.mark_dim = static_cast<int>(head.size()) - 2;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != head.size()) throw IoError("ragged CSV row");
    r.seed = std::stoull(c[0]);
    MarkedPoint p;
    p.t = parse_double(c[1]);
    for (int i = 0; i < r.mark_dim; ++i) p.mark[i] = parse_double(c[2 + i]);
    r.points.push_back(p);
  }
  return r;
}

json realization_to_json(const Realization& r) {
  json pts = json::array();
  for (const MarkedPoint& p : r.points) {
    json row = json::array({p.t});
    for (int i = 0; i < r.mark_dim; ++i) row.push_back(p.mark[i]);
    pts.push_back(std::move(row));
  }
  return {{"seed", r.seed},
          {"window_T", r.window_T},
          {"epsilon", r.epsilon},
          {"mu_target", r.mu_target},
          {"raw_events", r.raw_events},
          {"collisions", r.collisions},
          {"degenerate", r.degenerate},
          {"truncated", r.truncated},
          {"mark_dim", r.mark_dim},
          {"time_base", r.time_base == TimeBase::map ? "map" : "flow"},
          {"tau_bar", r.tau_bar},
          {"points", std::move(pts)}};
}

Realization realization_from_json(const json& j) {
  try {
    Realization r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.window_T = j.at("window_T").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    r.mu_target = j.at("mu_target").get<double>();
    r.raw_events = j.at("raw_events").get<std::uint64_t>();
    r.collisions = j.at("collisions").get<std::uint64_t>();
    r.degenerate = j.at("degenerate").get<std::uint64_t>();
    r.truncated = j.at("truncated").get<bool>();
    r.mark_dim = j.at("mark_dim").get<int>();
    r.time_base = j.at("time_base").get<std::string>() == "flow" ? TimeBase::flow : TimeBase::map;
    r.tau_bar = j.at("tau_bar").get<double>();
    for (const auto& row : j.at("points")) {
      MarkedPoint p;
      p.t = row.at(0).get<double>();
      for (int i = 0; i < r.mark_dim; ++i) p.mark[i] = row.at(1 + i).get<double>();
      r.points.push_back(p);
    }
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed realization JSON: ") + e.what());
  }
}

void write_json_file(const std::filesystem::path& p, const json& j) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  os << std::setw(2) << j << '\n';
}

json read_json_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("cannot read " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

void save_realization(const std::filesystem::path& stem, const Realization& r) {
  std::filesystem::path csv = stem;
  csv += ".csv";
  std::ofstream os(csv);
  if (!os) throw IoError("cannot write " + csv.string());
  write_realization_csv(os, r);
  std::filesystem::path js = stem;
  js += ".json";
  write_json_file(js, realization_to_json(r));
}

Realization load_realization(const std::filesystem::path& json_file) {
  return realization_from_json(read_json_file(json_file));
}

std::vector<Realization> load_realization_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.path().extension() == ".json" && name.rfind("real_", 0) == 0) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Realization> out;
  for (const auto& f : files) out.push_back(load_realization(f));
  return out;
}

json report_to_json(const TestReport& r) {
  json d = json::object();
  for (const auto& [k, v] : r.details) d[k] = v;
  json j = {{"name", r.name},   {"statistic", r.statistic}, {"null", r.null_desc},
            {"p_value", r.p_value}, {"n", r.n},             {"alpha", r.alpha},
            {"pass", r.pass},   {"details", std::move(d)}};
  j["ci"] = r.ci ? json::array({r.ci->first, r.ci->second}) : json(nullptr);
  return j;
}

TestReport report_from_json(const json& j) {
  try {
    TestReport r;
    r.name = j.at("name").get<std::string>();
    r.statistic = j.at("statistic").get<double>();
    r.null_desc = j.at("null").get<std::string>();
    r.p_value = j.at("p_value").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.alpha = j.at("alpha").get<double>();
    r.pass = j.at("pass").get<bool>();
    if (!j.at("ci").is_null()) r.ci = std::pair{j["ci"].at(0).get<double>(), j["ci"].at(1).get<double>()};
    for (const auto& [k, v] : j.at("details").items()) r.details.push_back({k, v.get<double>()});
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report JSON: ") + e.what());
  }
}

json bundle_to_json(const ClusterRunBundle& b) {
  json per = json::array();
  for (const auto& e : b.per_eps) {
    json reps = json::array();
    for (const auto& r : e.reports) reps.push_back(report_to_json(r));
    per.push_back({{"eps", e.eps},
                   {"mu_A", e.mu_A.estimate},
                   {"mu_A_ci", {e.mu_A.ci_lo, e.mu_A.ci_hi}},
                   {"mu_B", e.mu_B},
                   {"theta_hat", e.theta_hat},
                   {"psi_theta", e.law.theta},
                   {"psi_size_law", e.law.prob},
                   {"clusters", e.cluster_sizes.size()},
                   {"dropped_open", e.dropped_open},
                   {"pass", e.pass()},
                   {"reports", std::move(reps)}});
  }
  return {{"q0", b.q0},
          {"certificate",
           {{"q", b.certificate.q},
            {"worst_ratio", b.certificate.worst_ratio},
            {"reverify_ratio", b.certificate.reverify_ratio},
            {"directions", b.certificate.directions},
            {"n_check", b.certificate.n_check}}},
          {"per_eps", std::move(per)},
          {"theta_drift", report_to_json(b.theta_drift)},
          {"pass", b.pass()}};
}

void write_cluster_sizes_csv(std::ostream& os, const std::vector<std::size_t>& sizes) {
  os << "size\n";
  for (std::size_t s : sizes) os << s << '\n';
}

void print_summary(std::ostream& os, const std::vector<TestReport>& reports) {
  os << std::left << std::setw(38) << "test" << std::right << std::setw(14) << "statistic" << std::setw(14)
     << "p-value" << std::setw(10) << "n" << "  verdict\n";
  for (const auto& r : reports) {
    os << std::left << std::setw(38) << r.name.substr(0, 37) << std::right << std::setw(14)
       << std::setprecision(5) << r.statistic << std::setw(14) << r.p_value << std::setw(10) << r.n << "  "
       << (r.pass ? "PASS" : "FAIL") << '\n';
  }
}

}  // namespace stp
