#include "stp/config.hpp"

#include <fstream>
#include <set>

namespace stp {

using nlohmann::json;

namespace {

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  if (!j.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "missing required field");
  return j.at(key);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

template <class T>
T as(const json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "wrong type");
  }
}

template <class T>
T opt(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  return as<T>(j.at(key), join(path, key));
}

Vec2 vec(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(path, "expected [x, y]");
  return {as<double>(v[0], path + "[0]"), as<double>(v[1], path + "[1]")};
}

std::vector<Scatterer> discs(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of discs");
  std::vector<Scatterer> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    out.push_back({vec(require(v[i], "center", p), p + ".center"), as<double>(require(v[i], "radius", p), p + ".radius")});
    if (!(out.back().radius > 0.0)) throw ConfigError(p + ".radius", "must be positive");
  }
  return out;
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw ConfigError(join(path, k), "unknown field");
  }
}

SystemConfig parse_system(const json& j) {
  SystemConfig s;
  s.type = as<std::string>(require(j, "type", "system"), "system.type");
  if (s.type == "stadium") {
    check_keys(j, "system", {"type", "length"});
    s.length = as<double>(require(j, "length", "system"), "system.length");
    if (!(s.length > 0.0)) throw ConfigError("system.length", "must be positive");
  } else if (s.type == "sinai") {
    check_keys(j, "system", {"type", "scatterers"});
    s.discs = j.contains("scatterers") ? discs(j["scatterers"], "system.scatterers") : default_sinai_scatterers();
  } else if (s.type == "diamond") {
    check_keys(j, "system", {"type", "arcs"});
    if (j.contains("arcs")) {
      s.discs = discs(j["arcs"], "system.arcs");
      if (s.discs.size() != 4) throw ConfigError("system.arcs", "a diamond needs exactly four arcs");
    }
  } else if (s.type == "cat") {
    check_keys(j, "system", {"type", "matrix"});
    if (j.contains("matrix")) {
      const json& m = j["matrix"];
      if (!m.is_array() || m.size() != 2 || !m[0].is_array() || !m[1].is_array() || m[0].size() != 2 ||
          m[1].size() != 2) {
        throw ConfigError("system.matrix", "expected [[a, b], [c, d]]");
      }
      s.matrix = {as<std::int64_t>(m[0][0], "system.matrix"), as<std::int64_t>(m[0][1], "system.matrix"),
                  as<std::int64_t>(m[1][0], "system.matrix"), as<std::int64_t>(m[1][1], "system.matrix")};
    }
  } else if (s.type == "doubling") {
    check_keys(j, "system", {"type", "base"});
    s.base = opt<int>(j, "base", "system", 2);
    if (s.base < 2 || s.base > 255) throw ConfigError("system.base", "must be in [2, 255]");
  } else {
    throw ConfigError("system.type", "unknown system '" + s.type + "'");
  }
  return s;
}

TargetSpec parse_target(const json& j, const SystemConfig& sys, double eps, int period, int q0) {
  const std::string type = as<std::string>(require(j, "type", "target"), "target.type");
  const bool billiard = sys.type == "stadium" || sys.type == "sinai" || sys.type == "diamond";
  if (type == "ball") {
    check_keys(j, "target", {"type", "center"});
    if (sys.type == "doubling") throw ConfigError("target.type", "ball targets need a billiard or toral system");
    return MetricBall{vec(require(j, "center", "target"), "target.center"), eps};
  }
  if (type == "strip") {
    check_keys(j, "target", {"type", "r0"});
    if (!billiard) throw ConfigError("target.type", "strip targets need a billiard system");
    return PositionStrip{as<double>(require(j, "r0", "target"), "target.r0"), eps};
  }
  if (type == "barrier") {
    check_keys(j, "target", {"type", "corner"});
    if (sys.type != "diamond") throw ConfigError("target.type", "barrier targets need the diamond system");
    return CornerBarrier{opt<int>(j, "corner", "target", 0), eps};
  }
  if (type == "pruned") {
    check_keys(j, "target", {"type", "center"});
    if (sys.type != "cat") throw ConfigError("target.type", "pruned targets need a toral system");
    const Vec2 c = j.contains("center") ? vec(j["center"], "target.center") : Vec2{0.0, 0.0};
    return ClusterPruned{c, period, std::max(q0, 1), eps};
  }
  if (type == "interval") {
    check_keys(j, "target", {"type", "lo", "hi"});
    if (sys.type != "doubling") throw ConfigError("target.type", "interval targets need the doubling system");
    const double lo = as<double>(require(j, "lo", "target"), "target.lo");
    const double hi = as<double>(require(j, "hi", "target"), "target.hi");
    if (!(0.0 <= lo && lo < hi && hi <= 1.0)) throw ConfigError("target", "need 0 <= lo < hi <= 1");
    return IntervalTarget{lo, hi};
  }
  throw ConfigError("target.type", "unknown target '" + type + "'");
}

OracleConfig parse_oracle(const json& j) {
  OracleConfig o;
  check_keys(j, "oracle", {"base", "windows", "budget"});
  o.base = opt<int>(j, "base", "oracle", 10);
  o.budget = opt<std::uint64_t>(j, "budget", "oracle", 1'000'000);
  const json& w = require(j, "windows", "oracle");
  if (!w.is_array() || w.empty()) throw ConfigError("oracle.windows", "expected a non-empty array");
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::string p = "oracle.windows[" + std::to_string(i) + "]";
    o.windows.push_back({as<int>(require(w[i], "p", p), p + ".p"), as<int>(require(w[i], "q", p), p + ".q"),
                         as<double>(require(w[i], "lo", p), p + ".lo"), as<double>(require(w[i], "hi", p), p + ".hi")});
  }
  return o;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be an object");
  check_keys(j, "",
             {"system", "target", "eps", "time", "horizon_T", "seeds", "master_seed", "measure_budget",
              "step_budget", "alpha", "bin_width", "output", "jobs", "period", "q0", "separation_a",
              "separation_budget", "psi_samples", "count_window", "oracle"});
  ExperimentConfig c;
  if (j.contains("oracle")) c.oracle = parse_oracle(j["oracle"]);
  if (!j.contains("system") && c.oracle) {
    c.system.type = "doubling";
    c.system.base = c.oracle->base;
  } else {
    c.system = parse_system(require(j, "system", ""));
  }
  if (j.contains("eps")) {
    const json& e = j["eps"];
    c.eps_ladder.clear();
    if (e.is_number()) {
      c.eps_ladder.push_back(as<double>(e, "eps"));
    } else if (e.is_array() && !e.empty()) {
      for (std::size_t i = 0; i < e.size(); ++i) c.eps_ladder.push_back(as<double>(e[i], "eps[" + std::to_string(i) + "]"));
    } else {
      throw ConfigError("eps", "expected a number or a non-empty array");
    }
    for (double x : c.eps_ladder) {
      if (!(x > 0.0)) throw ConfigError("eps", "every epsilon must be positive");
    }
  }
  const std::string tb = opt<std::string>(j, "time", "", "map");
  if (tb != "map" && tb != "flow") throw ConfigError("time", "must be 'map' or 'flow'");
  c.time_base = tb == "flow" ? TimeBase::flow : TimeBase::map;
  c.horizon_T = opt<double>(j, "horizon_T", "", c.horizon_T);
  if (!(c.horizon_T > 0.0)) throw ConfigError("horizon_T", "must be positive");
  c.seeds = opt<int>(j, "seeds", "", c.seeds);
  if (c.seeds < 1) throw ConfigError("seeds", "must be at least 1");
  c.master_seed = opt<std::uint64_t>(j, "master_seed", "", c.master_seed);
  c.measure_budget = opt<std::uint64_t>(j, "measure_budget", "", c.measure_budget);
  c.step_budget = opt<std::uint64_t>(j, "step_budget", "", c.step_budget);
  c.alpha = opt<double>(j, "alpha", "", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
  c.bin_width = opt<double>(j, "bin_width", "", c.bin_width);
  if (!(c.bin_width > 0.0)) throw ConfigError("bin_width", "must be positive");
  c.output = opt<std::string>(j, "output", "", c.output);
  c.jobs = opt<unsigned>(j, "jobs", "", c.jobs);
  c.period = opt<int>(j, "period", "", c.period);
  if (c.period < 1) throw ConfigError("period", "must be at least 1");
  c.q0 = opt<int>(j, "q0", "", c.q0);
  if (c.q0 < 0) throw ConfigError("q0", "must be non-negative");
  c.separation_a = opt<double>(j, "separation_a", "", c.separation_a);
  c.separation_budget = opt<std::uint64_t>(j, "separation_budget", "", c.separation_budget);
  c.psi_samples = opt<std::size_t>(j, "psi_samples", "", c.psi_samples);
  c.count_window = opt<double>(j, "count_window", "", c.count_window);
  if (j.contains("target")) {
    c.target = parse_target(j["target"], c.system, c.eps_ladder.front(), c.period, c.q0);
  } else if (!c.oracle) {
    throw ConfigError("target", "missing required field");
  } else {
    c.target = IntervalTarget{c.oracle->windows.front().lo, c.oracle->windows.front().hi};
  }
  if (c.time_base == TimeBase::flow && !(c.system.type == "stadium" || c.system.type == "sinai" ||
                                         c.system.type == "diamond")) {
    throw ConfigError("time", "flow time needs a billiard system");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("", "cannot open config file " + p.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& c) {
  json sys = {{"type", c.system.type}};
  if (c.system.type == "stadium") sys["length"] = c.system.length;
  auto disc_json = [](const std::vector<Scatterer>& d) {
    json a = json::array();
    for (const auto& s : d) a.push_back({{"center", {s.center.x, s.center.y}}, {"radius", s.radius}});
    return a;
  };
  if (c.system.type == "sinai") sys["scatterers"] = disc_json(c.system.discs);
  if (c.system.type == "diamond" && !c.system.discs.empty()) sys["arcs"] = disc_json(c.system.discs);
  if (c.system.type == "cat") {
    sys["matrix"] = {{c.system.matrix.a, c.system.matrix.b}, {c.system.matrix.c, c.system.matrix.d}};
  }
  if (c.system.type == "doubling") sys["base"] = c.system.base;
  json tgt = std::visit(
      [](const auto& t) -> json {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, MetricBall>) return {{"type", "ball"}, {"center", {t.center.x, t.center.y}}};
        else if constexpr (std::is_same_v<T, PositionStrip>) return {{"type", "strip"}, {"r0", t.r0}};
        else if constexpr (std::is_same_v<T, CornerBarrier>) return {{"type", "barrier"}, {"corner", t.corner}};
        else if constexpr (std::is_same_v<T, ClusterPruned>) return {{"type", "pruned"}, {"center", {t.center.x, t.center.y}}};
        else return {{"type", "interval"}, {"lo", t.lo}, {"hi", t.hi}};
      },
      c.target);
  json j = {{"system", sys},
            {"target", tgt},
            {"eps", c.eps_ladder},
            {"time", c.time_base == TimeBase::flow ? "flow" : "map"},
            {"horizon_T", c.horizon_T},
            {"seeds", c.seeds},
            {"master_seed", c.master_seed},
            {"measure_budget", c.measure_budget},
            {"step_budget", c.step_budget},
            {"alpha", c.alpha},
            {"bin_width", c.bin_width},
            {"output", c.output},
            {"jobs", c.jobs},
            {"period", c.period},
            {"q0", c.q0},
            {"separation_a", c.separation_a},
            {"separation_budget", c.separation_budget},
            {"psi_samples", c.psi_samples},
            {"count_window", c.count_window}};
  if (c.oracle) {
    json w = json::array();
    for (const auto& x : c.oracle->windows) w.push_back({{"p", x.p}, {"q", x.q}, {"lo", x.lo}, {"hi", x.hi}});
    j["oracle"] = {{"base", c.oracle->base}, {"windows", w}, {"budget", c.oracle->budget}};
  }
  return j;
}

Dynamics build_system(const SystemConfig& s) {
  if (s.type == "stadium") return BilliardSystem(build_stadium(s.length));
  if (s.type == "sinai") return BilliardSystem(build_sinai(s.discs));
  if (s.type == "diamond") return BilliardSystem(s.discs.empty() ? default_diamond() : build_diamond(s.discs));
  if (s.type == "cat") return ToralSystem(ToralAutomorphism(s.matrix));
  if (s.type == "doubling") return DigitSystem(s.base);
  throw ConfigError("system.type", "unknown system '" + s.type + "'");
}

PeriodicSiteConfig periodic_site(const ExperimentConfig& c) {
  if (c.system.type != "cat") throw ConfigError("system.type", "periodic-point experiments need a toral system");
  PeriodicSiteConfig s;
  s.map = ToralAutomorphism(c.system.matrix);
  if (const auto* p = std::get_if<ClusterPruned>(&c.target)) s.x0 = p->center;
  else if (const auto* b = std::get_if<MetricBall>(&c.target)) s.x0 = b->center;
  s.period = c.period;
  s.q0 = c.q0;
  s.eps_ladder = c.eps_ladder;
  s.a = c.separation_a;
  return s;
}

ClusterRunOptions cluster_run_options(const ExperimentConfig& c) {
  ClusterRunOptions o;
  o.horizon_T = c.horizon_T;
  o.seeds = c.seeds;
  o.master_seed = c.master_seed;
  o.measure_budget = c.measure_budget;
  o.psi_samples = c.psi_samples;
  o.count_window = c.count_window;
  o.alpha = c.alpha;
  o.jobs = c.jobs;
  return o;
}

}  // namespace stp
