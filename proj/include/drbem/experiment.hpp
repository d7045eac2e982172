#pragma once

// Experiment configuration and the method x seed driver used by the CLI and
// the acceptance suite.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "drbem/sim.hpp"

namespace drbem {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"cep", "olp", "adr", "tuned-cep"};
  return m;
}

struct RunConfig {
  std::filesystem::path output_dir = "out";
  DistrictConfig district;
  ScenarioParams generator;
  // Recorded data, disturbance id -> CSV path. Both empty: synthetic data per seed.
  std::map<std::string, std::filesystem::path> training;
  std::map<std::string, std::filesystem::path> evaluation;
  double epsilon = 0.01;
  double delta_chi = 0.01;
  double delta_st = 0.01;
  double gamma = 1e3;
  double beta_lower_share = 0.5;
  int horizon = 8;
  int weeks = 1;
  int first_week = 0;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> methods{"cep", "olp", "adr"};
  std::string lp_method = "auto";
  // Search range of the tuned-CEP tightening, degC.
  double tune_max = 3.0;
  double tune_resolution = 0.01;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw SpecError("epsilon must lie in (0,1)");
    if (!(delta_chi > 0.0 && delta_chi < 1.0) || !(delta_st > 0.0 && delta_st < 1.0)) {
      throw SpecError("confidence levels must lie in (0,1)");
    }
    if (!(gamma >= 0.0)) throw SpecError("gamma must be >= 0");
    if (!(beta_lower_share > 0.0 && beta_lower_share < 1.0)) {
      throw SpecError("beta_lower_share must lie in (0,1)");
    }
    if (horizon < 1) throw SpecError("horizon must be positive");
    if (weeks < 1 || first_week < 0) throw SpecError("weeks must be positive");
    if (seeds.empty()) throw SpecError("at least one seed is required");
    if (methods.empty()) throw SpecError("at least one method is required");
    for (const auto& m : methods) {
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
        throw SpecError("unknown method '" + m + "' (expected cep|olp|adr|tuned-cep)");
      }
    }
    if (training.empty() != evaluation.empty()) {
      throw SpecError("recorded data needs both training and evaluation CSVs");
    }
    for (const auto& id : district.disturbances) {
      if (!training.empty() && (!training.count(id) || !evaluation.count(id))) {
        throw SpecError("no CSV for disturbance '" + id + "'");
      }
    }
    lp_method_from_string(lp_method);
  }

  SimulationOptions options(const std::string& method, double c_b = 0.0) const {
    SimulationOptions o;
    o.policy.mode = method == "tuned-cep" ? Policy::CEP : policy_from_string(method);
    o.policy.horizon = horizon;
    o.policy.gamma = gamma;
    o.policy.epsilon = epsilon;
    o.policy.comfort_tightening = c_b;
    o.delta_chi = delta_chi;
    o.delta_st = delta_st;
    o.weeks = weeks;
    o.first_week = first_week;
    o.beta_lower_share = beta_lower_share;
    o.solver.method = lp_method_from_string(lp_method);
    return o;
  }
};

namespace detail {

inline std::map<std::string, std::filesystem::path> path_map(const nlohmann::json& j,
                                                             const std::filesystem::path& base) {
  std::map<std::string, std::filesystem::path> out;
  for (const auto& [id, p] : j.items()) {
    std::filesystem::path path = p.get<std::string>();
    out[id] = path.is_absolute() ? path : base / path;
  }
  return out;
}

inline ScenarioParams generator_from_json(const nlohmann::json& j, ScenarioParams p) {
  auto num = [&](const char* key, double& v) { v = j.value(key, v); };
  num("ambient_mean", p.ambient_mean);
  num("ambient_swing", p.ambient_swing);
  num("ambient_day_sd", p.ambient_day_sd);
  num("ambient_persistence", p.ambient_persistence);
  num("ground", p.ground);
  num("solar_peak", p.solar_peak);
  num("cloud_min", p.cloud_min);
  num("gains_peak", p.gains_peak);
  num("gains_base", p.gains_base);
  num("alpha_ambient", p.alpha_ambient);
  num("sigma_ambient", p.sigma_ambient);
  num("alpha_ground", p.alpha_ground);
  num("sigma_ground", p.sigma_ground);
  num("alpha_solar", p.alpha_solar);
  num("sigma_solar", p.sigma_solar);
  num("alpha_gains", p.alpha_gains);
  num("sigma_gains", p.sigma_gains);
  num("noise", p.noise);
  p.training_days = j.value("training_days", p.training_days);
  return p;
}

} // namespace detail

/// Reads a run configuration. Relative paths resolve against `base`. Unknown
/// keys are rejected so that typos do not silently fall back to defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base = ".") {
  static const std::vector<std::string> keys{
      "output_dir", "district",   "generator", "training",        "evaluation",
      "epsilon",    "delta_chi",  "delta_st",  "gamma",           "beta_lower_share",
      "horizon",    "weeks",      "first_week", "seeds",          "methods",
      "lp_method",  "tune_max",   "tune_resolution"};
  if (!j.is_object()) throw SpecError("run config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw SpecError("unknown run config key '" + k + "'");
    }
  }
  RunConfig c;
  try {
    if (j.contains("output_dir")) {
      std::filesystem::path p = j.at("output_dir").get<std::string>();
      c.output_dir = p.is_absolute() ? p : base / p;
    } else {
      c.output_dir = base / "out";
    }
    if (j.contains("district")) {
      const auto& d = j.at("district");
      if (d.is_string()) {
        std::filesystem::path p = d.get<std::string>();
        if (!p.is_absolute()) p = base / p;
        std::ifstream in(p);
        if (!in) throw SpecError("cannot open district file " + p.string());
        c.district = district_config_from_json(nlohmann::json::parse(in));
      } else {
        c.district = district_config_from_json(d);
      }
    }
    c.generator.disturbances = c.district.disturbances;
    if (j.contains("generator")) c.generator = detail::generator_from_json(j.at("generator"), c.generator);
    if (j.contains("training")) c.training = detail::path_map(j.at("training"), base);
    if (j.contains("evaluation")) c.evaluation = detail::path_map(j.at("evaluation"), base);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.delta_chi = j.value("delta_chi", c.delta_chi);
    c.delta_st = j.value("delta_st", c.delta_st);
    c.gamma = j.value("gamma", c.gamma);
    c.beta_lower_share = j.value("beta_lower_share", c.beta_lower_share);
    c.horizon = j.value("horizon", c.horizon);
    c.weeks = j.value("weeks", c.weeks);
    c.first_week = j.value("first_week", c.first_week);
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      c.seeds.clear();
      if (s.is_array()) {
        for (const auto& v : s) c.seeds.push_back(v.get<std::uint64_t>());
      } else {
        const std::uint64_t first = s.value("first", std::uint64_t{1});
        const int count = s.at("count").get<int>();
        for (int k = 0; k < count; ++k) c.seeds.push_back(first + static_cast<std::uint64_t>(k));
      }
    }
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    c.lp_method = j.value("lp_method", c.lp_method);
    c.tune_max = j.value("tune_max", c.tune_max);
    c.tune_resolution = j.value("tune_resolution", c.tune_resolution);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0, 0, path.string());
  }
  return run_config_from_json(j, path.parent_path().empty() ? "." : path.parent_path());
}

/// Evaluation scenario and fitted ambiguity sets for one seed.
struct RunInputs {
  Scenario scenario;
  std::vector<AmbiguitySpec> specs;
};

inline std::vector<DisturbanceHistory> load_histories(
    const std::map<std::string, std::filesystem::path>& paths,
    const std::vector<std::string>& ids) {
  std::vector<DisturbanceHistory> out;
  for (const auto& id : ids) out.push_back(read_history_csv(paths.at(id).string(), id));
  return out;
}

inline RunInputs prepare_inputs(const RunConfig& c, std::uint64_t seed) {
  RunInputs in;
  const auto& ids = c.district.disturbances;
  if (c.training.empty()) {
    ScenarioParams p = c.generator;
    p.disturbances = ids;
    auto data = synth_scenario(p, seed, c.first_week + c.weeks, c.horizon);
    in.scenario = std::move(data.scenario);
    in.specs = fit_all(data.training, c.delta_chi, c.delta_st);
  } else {
    in.specs = fit_all(load_histories(c.training, ids), c.delta_chi, c.delta_st);
    in.scenario = scenario_from_histories(load_histories(c.evaluation, ids));
    in.scenario.seed = seed;
  }
  return in;
}

/// Total Kh over all simulated weeks.
inline double total_violation(const SimulationTrace& t) {
  double v = 0.0;
  for (const auto& w : t.weeks) v += w.violation;
  return v;
}

/// Runs every configured method on one seed. Tuned CEP takes the smallest
/// tightening whose violations do not exceed those of ADR on the same data.
inline std::vector<SimulationTrace> run_methods(const RunConfig& c, const DistrictModel& district,
                                                const RunInputs& in) {
  std::vector<SimulationTrace> out;
  std::optional<SimulationTrace> adr;
  auto run = [&](const std::string& m, double c_b = 0.0) {
    return run_receding_horizon(district, in.scenario, in.specs, c.options(m, c_b));
  };
  for (const auto& m : c.methods) {
    if (m == "tuned-cep") {
      if (!adr) adr = run("adr");
      std::map<double, SimulationTrace> cache;
      auto violations = [&](double c_b) {
        auto it = cache.find(c_b);
        if (it == cache.end()) it = cache.emplace(c_b, run("tuned-cep", c_b)).first;
        return total_violation(it->second);
      };
      const double c_b =
          tune_cep(violations, total_violation(*adr), 0.0, c.tune_max, c.tune_resolution);
      violations(c_b);
      SimulationTrace t = cache.at(c_b);
      t.method = "tuned-cep";
      out.push_back(std::move(t));
    } else {
      SimulationTrace t = run(m);
      if (m == "adr") adr = t;
      out.push_back(std::move(t));
    }
  }
  return out;
}

// Weekly summaries on disk -------------------------------------------------------

inline nlohmann::json runs_to_json(const std::vector<SimulationTrace>& traces) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : traces) {
    nlohmann::json weeks = nlohmann::json::array();
    for (const auto& w : t.weeks) {
      weeks.push_back({{"week", w.week},
                       {"cost_chf", w.cost},
                       {"violation_kh", w.violation},
                       {"fallbacks", w.fallbacks}});
    }
    j.push_back({{"method", t.method},
                 {"seed", t.seed},
                 {"comfort_tightening", t.comfort_tightening},
                 {"weeks", weeks},
                 {"failures", t.failures}});
  }
  return j;
}

/// Traces carrying weekly summaries only (no hourly records).
inline std::vector<SimulationTrace> runs_from_json(const nlohmann::json& j) {
  std::vector<SimulationTrace> out;
  try {
    for (const auto& r : j) {
      SimulationTrace t;
      t.method = r.at("method").get<std::string>();
      t.seed = r.at("seed").get<std::uint64_t>();
      t.comfort_tightening = r.value("comfort_tightening", 0.0);
      for (const auto& w : r.at("weeks")) {
        t.weeks.push_back({w.at("week").get<int>(), w.at("cost_chf").get<double>(),
                           w.at("violation_kh").get<double>(), w.value("fallbacks", 0)});
      }
      t.failures = r.value("failures", std::vector<std::string>{});
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("runs file: ") + e.what());
  }
  return out;
}

} // namespace drbem
