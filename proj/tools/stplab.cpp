#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stp/experiments.hpp"
#include "stp/io.hpp"

using namespace stp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kFault = 3 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<double> alpha;
};

ExperimentConfig load(const Common& o) {
  ExperimentConfig c = load_config(o.config);
  if (!o.out.empty()) c.output = o.out;
  if (o.seed) c.master_seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.alpha) {
    if (!(*o.alpha > 0.0 && *o.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
    c.alpha = *o.alpha;
  }
  return resolve_config(c);
}

fs::path eps_dir(const ExperimentConfig& c, std::size_t i) { return fs::path(c.output) / ("eps_" + std::to_string(i)); }

std::string stem(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "real_%05zu", k);
  return buf;
}

int cmd_simulate(const Common& o, int fixture) {
  if (fixture > 0) {
    const fs::path dir = o.out.empty() ? fs::path("fixture") : fs::path(o.out);
    fs::create_directories(dir / "eps_0");
    const auto rs = poisson_fixture(fixture, 20.0, o.seed.value_or(1));
    for (std::size_t k = 0; k < rs.size(); ++k) save_realization(dir / "eps_0" / stem(k), rs[k]);
    std::cout << "wrote " << rs.size() << " Poisson realizations to " << (dir / "eps_0").string() << '\n';
    return kPass;
  }
  const ExperimentConfig c = load(o);
  const Dynamics sys = build_system(c.system);
  json meta = {{"config", config_to_json(c)}, {"ladder", json::array()}};
  for (std::size_t i = 0; i < c.eps_ladder.size(); ++i) {
    const TargetSpec spec = with_epsilon(c.target, c.eps_ladder[i]);
    const TargetMeasure mu = target_measure(sys, spec, c.measure_budget, derive_seed(c.master_seed, 1000 + i, 0));
    const auto rs = simulate_eps(sys, spec, mu.value, c, i);
    fs::create_directories(eps_dir(c, i));
    std::uint64_t events = 0;
    for (std::size_t k = 0; k < rs.size(); ++k) {
      save_realization(eps_dir(c, i) / stem(k), rs[k]);
      events += rs[k].count();
    }
    meta["ladder"].push_back({{"eps", c.eps_ladder[i]},
                              {"mu", mu.value},
                              {"mu_analytic", mu.analytic},
                              {"mu_mc", mu.estimate.estimate},
                              {"mu_mc_stderr", mu.estimate.stderr_},
                              {"events", events},
                              {"dir", eps_dir(c, i).filename().string()}});
    std::cout << "eps " << c.eps_ladder[i] << ": mu " << fmt17(mu.value) << ", " << rs.size()
              << " realizations, " << events << " events\n";
  }
  write_json_file(fs::path(c.output) / "metadata.json", meta);
  return kPass;
}

int cmd_verify(const Common& o, const std::string& data) {
  const ExperimentConfig c = load(o);
  const fs::path root = data.empty() ? fs::path(c.output) : fs::path(data);
  const Dynamics sys = build_system(c.system);
  std::vector<TestReport> all;
  json per = json::array();
  bool any = false;
  for (std::size_t i = 0; i < std::max<std::size_t>(c.eps_ladder.size(), 1); ++i) {
    const fs::path dir = root / ("eps_" + std::to_string(i));
    if (!fs::exists(dir)) continue;
    const auto rs = load_realization_dir(dir);
    if (rs.empty()) continue;
    any = true;
    const double eps = rs.front().epsilon > 0.0 ? rs.front().epsilon : c.eps_ladder[i];
    const IntensityModel m = model_for(sys, with_epsilon(c.target, eps));
    const auto reps = poisson_battery(rs, m, c.alpha, c.bin_width);
    json jr = json::array();
    for (const auto& r : reps) {
      jr.push_back(report_to_json(r));
      all.push_back(r);
    }
    per.push_back({{"eps", eps}, {"realizations", rs.size()}, {"model", m.name}, {"reports", jr}});
  }
  if (!any) throw IoError("no realizations under " + root.string());
  bool pass = true;
  for (const auto& r : all) pass = pass && r.pass;
  fs::create_directories(c.output);
  write_json_file(fs::path(c.output) / "report.json", {{"config", config_to_json(c)}, {"per_eps", per}, {"pass", pass}});
  print_summary(std::cout, all);
  return pass ? kPass : kFail;
}

int cmd_cluster(const Common& o) {
  const ExperimentConfig c = load(o);
  const PeriodicSiteConfig site = periodic_site(c);
  std::vector<TestReport> seps;
  for (std::size_t i = 0; i < site.eps_ladder.size(); ++i) {
    RandomStream rng(derive_seed(c.master_seed, 4000 + i, 0));
    seps.push_back(validate_separation(site, site.eps_ladder[i], c.separation_budget, rng));
  }
  const ClusterRunBundle b = run_cluster_experiment(site, cluster_run_options(c));
  fs::create_directories(c.output);
  json j = bundle_to_json(b);
  j["config"] = config_to_json(c);
  j["separation"] = json::array();
  for (const auto& r : seps) j["separation"].push_back(report_to_json(r));
  write_json_file(fs::path(c.output) / "bundle.json", j);
  std::vector<TestReport> all = seps;
  for (std::size_t i = 0; i < b.per_eps.size(); ++i) {
    std::ofstream os(fs::path(c.output) / ("cluster_sizes_eps_" + std::to_string(i) + ".csv"));
    write_cluster_sizes_csv(os, b.per_eps[i].cluster_sizes);
    std::cout << "eps " << b.per_eps[i].eps << ": theta " << b.per_eps[i].theta_hat << ", cluster-map theta "
              << b.per_eps[i].law.theta << ", " << b.per_eps[i].cluster_sizes.size() << " clusters\n";
    all.insert(all.end(), b.per_eps[i].reports.begin(), b.per_eps[i].reports.end());
  }
  all.push_back(b.theta_drift);
  print_summary(std::cout, all);
  bool pass = b.pass();
  for (const auto& r : seps) pass = pass && r.pass;
  return pass ? kPass : kFail;
}

int cmd_oracle(const Common& o) {
  const ExperimentConfig c = load(o);
  if (!c.oracle) throw ConfigError("oracle", "missing required field");
  RandomStream rng(derive_seed(c.master_seed, 5000, 0));
  const TestReport r = iid_oracle_check(c.oracle->windows, c.oracle->base, c.oracle->budget, rng, c.alpha);
  fs::create_directories(c.output);
  write_json_file(fs::path(c.output) / "oracle.json", {{"config", config_to_json(c)}, {"report", report_to_json(r)}});
  print_summary(std::cout, {r});
  std::cout << "exact product " << fmt17(r.detail("exact")) << ", estimate " << fmt17(r.detail("estimate")) << '\n';
  return r.pass ? kPass : kFail;
}

void collect(const json& j, std::vector<TestReport>& out) {
  if (j.is_object()) {
    if (j.contains("name") && j.contains("p_value") && j.contains("pass")) {
      out.push_back(report_from_json(j));
      return;
    }
    for (const auto& [k, v] : j.items()) collect(v, out);
  } else if (j.is_array()) {
    for (const auto& v : j) collect(v, out);
  }
}

int cmd_report(const std::string& file) {
  std::vector<TestReport> reps;
  collect(read_json_file(file), reps);
  if (reps.empty()) throw IoError("no test reports in " + file);
  print_summary(std::cout, reps);
  for (const auto& r : reps) {
    if (!r.pass) return kFail;
  }
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatio-temporal Poisson laboratory"};
  app.require_subcommand(1);
  Common o;
  auto add_common = [&](CLI::App* s, bool config_required) {
    auto* opt = s->add_option("--config", o.config, "experiment config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    s->add_option("--out", o.out, "output directory");
    s->add_option("--seed", o.seed, "master seed");
    s->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
    s->add_option("--alpha", o.alpha, "per-test significance level");
  };
  int fixture = 0;
  std::string data;
  std::string report_file;
  auto* sim = app.add_subcommand("simulate", "extract point processes and write realizations");
  add_common(sim, false);
  sim->add_option("--poisson-fixture", fixture, "write N synthetic Poisson realizations instead");
  auto* ver = app.add_subcommand("verify", "run the test battery on stored realizations");
  add_common(ver, true);
  ver->add_option("--data", data, "realization directory (default: config output)");
  auto* clu = app.add_subcommand("cluster", "periodic-point pipeline");
  add_common(clu, true);
  auto* ora = app.add_subcommand("oracle", "joint-avoidance oracle on the b-adic map");
  add_common(ora, true);
  auto* rep = app.add_subcommand("report", "summarize a report or bundle JSON");
  rep->add_option("file", report_file, "JSON file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }
  try {
    if (*sim) {
      if (fixture == 0 && o.config.empty()) throw ConfigError("config", "simulate needs --config");
      return cmd_simulate(o, fixture);
    }
    if (*ver) return cmd_verify(o, data);
    if (*clu) return cmd_cluster(o);
    if (*ora) return cmd_oracle(o);
    if (*rep) return cmd_report(report_file);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const StepBudgetError& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFault;
  }
  return kUsage;
}
