// drbem: fit ambiguity sets, run closed-loop studies, export horizon LPs and
// summarize results. Exit codes: 0 ok, 1 runtime failure, 2 usage or input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "drbem/drbem.hpp"

namespace fs = std::filesystem;
using namespace drbem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Raised for bad command-line values that CLI11 cannot check on its own.
struct UsageError : Error {
  using Error::Error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> output;
};

RunConfig load(const Common& o) {
  RunConfig c = load_run_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (o.method) c.methods = {*o.method};
  if (o.output) c.output_dir = *o.output;
  c.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void print_report(const Report& r) {
  std::printf("%-10s %5s %12s %10s %8s %12s %10s %9s\n", "method", "weeks", "cost_chf", "cost_sd",
              "cost_pu", "kh", "kh_sd", "fallbacks");
  for (const auto& m : r.methods) {
    std::printf("%-10s %5d %12.4f %10.4f %8.3f %12.4f %10.4f %9d\n", m.method.c_str(), m.weeks,
                m.cost_mean, m.cost_std, m.cost_pu, m.violation_mean, m.violation_std,
                m.fallbacks);
  }
}

void write_report(const fs::path& dir, const Report& r) {
  write_file(dir / "report.json", report_to_json(r).dump(2) + "\n");
  std::ostringstream csv;
  write_report_csv(csv, r);
  write_file(dir / "report.csv", csv.str());
}

int cmd_fit(const Common& o) {
  const RunConfig c = load(o);
  const auto& ids = c.district.disturbances;
  std::vector<DisturbanceHistory> hist;
  if (c.training.empty()) {
    ScenarioParams p = c.generator;
    p.disturbances = ids;
    hist = synth_scenario(p, c.seeds.front(), 1).training;
  } else {
    hist = load_histories(c.training, ids);
  }
  // Per-hour box of one coordinate at the tail budget it receives in a plan
  // of the configured horizon.
  const double n = static_cast<double>(c.horizon) * static_cast<double>(ids.size());
  const double lo_budget = c.beta_lower_share * c.epsilon / n;
  const double hi_budget = (1.0 - c.beta_lower_share) * c.epsilon / n;
  nlohmann::json out = {{"epsilon", c.epsilon},
                        {"delta_chi", c.delta_chi},
                        {"delta_st", c.delta_st},
                        {"horizon", c.horizon},
                        {"disturbances", nlohmann::json::array()}};
  std::printf("%-4s %6s %8s %8s %6s\n", "id", "days", "alpha_lo", "alpha_hi", "flat");
  for (const auto& h : hist) {
    const AmbiguitySpec s = fit_ambiguity(h, c.delta_chi, c.delta_st);
    std::vector<double> lower, upper;
    int flat = 0;
    for (int t = 0; t < kHoursPerDay; ++t) {
      const auto box = build_box({{s.bounds[t]}}, lo_budget + hi_budget,
                                 Vec::Constant(1, lo_budget), Vec::Constant(1, hi_budget));
      lower.push_back(box.lower[0]);
      upper.push_back(box.upper[0]);
      flat += s.model.zero_energy[t] ? 1 : 0;
    }
    out["disturbances"].push_back(
        {{"id", h.id}, {"spec", s}, {"box", {{"lower", lower}, {"upper", upper}}}});
    const auto [amin, amax] = std::minmax_element(s.model.alpha.begin(), s.model.alpha.end());
    std::printf("%-4s %6d %8.4f %8.4f %6d\n", h.id.c_str(), h.days(), *amin, *amax, flat);
  }
  write_file(c.output_dir / "ambiguity.json", out.dump(2) + "\n");
  return 0;
}

int cmd_simulate(const Common& o, bool traces) {
  const RunConfig c = load(o);
  const DistrictModel district = c.district.build();
  const int n = static_cast<int>(c.seeds.size());
  std::vector<std::vector<SimulationTrace>> results(n);
  parallel_for(n, [&](int k) {
    const RunInputs in = prepare_inputs(c, c.seeds[k]);
    results[k] = run_methods(c, district, in);
    if (traces) {
      for (const auto& t : results[k]) {
        std::ostringstream csv;
        write_trace_csv(csv, district, t);
        write_file(c.output_dir / ("trace_" + t.method + "_seed" + std::to_string(t.seed) + ".csv"),
                   csv.str());
      }
    }
  });
  std::vector<SimulationTrace> all;
  for (auto& r : results) {
    for (auto& t : r) all.push_back(std::move(t));
  }
  write_file(c.output_dir / "runs.json", runs_to_json(all).dump(2) + "\n");
  const Report r = report(all);
  write_report(c.output_dir, r);
  print_report(r);
  for (const auto& t : all) {
    for (const auto& f : t.failures) {
      std::fprintf(stderr, "%s seed %llu: %s\n", t.method.c_str(),
                   static_cast<unsigned long long>(t.seed), f.c_str());
    }
  }
  return 0;
}

int cmd_export_lp(const Common& o, int hour, bool solve_it) {
  const RunConfig c = load(o);
  if (c.methods.size() != 1 || c.methods.front() == "tuned-cep") {
    throw UsageError("export-lp needs exactly one of --method cep|olp|adr");
  }
  const std::string method = c.methods.front();
  const DistrictModel district = c.district.build();
  const RunInputs in = prepare_inputs(c, c.seeds.front());
  const int last = in.scenario.hours() - c.horizon;
  if (hour < 0 || hour > last) {
    throw UsageError("hour " + std::to_string(hour) + " outside 0.." + std::to_string(last));
  }
  const auto u = horizon_uncertainty(in.scenario, in.specs, hour, c.horizon, c.epsilon,
                                     c.beta_lower_share);
  const auto prob = compile(district, c.options(method).policy, u.box, u.mu_box, u.map,
                            initial_plant_state(district), hour % kHoursPerDay);
  const std::string stem = "horizon_h" + std::to_string(hour) + "_" + method;
  write_file(c.output_dir / (stem + ".lp"), export_lp(prob.lp));
  std::printf("%s: %d columns, %d rows, %zu nonzeros\n", stem.c_str(), prob.lp.num_cols(),
              prob.lp.num_rows(), prob.lp.entries.size());
  if (solve_it) {
    SolveOptions opt = c.options(method).solver;
    const Solution s = solve(prob.lp, opt);
    write_file(c.output_dir / (stem + ".solution.json"), solution_to_json(prob.lp, s).dump(2) + "\n");
    std::printf("status %s objective %.10g\n", to_string(s.status).c_str(), s.objective);
    if (!s.optimal()) return kExitRuntime;
  }
  return 0;
}

int cmd_report(const Common& o) {
  const RunConfig c = load(o);
  const fs::path path = c.output_dir / "runs.json";
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string() + " (run simulate first)");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0, 0, path.string());
  }
  const Report r = report(runs_from_json(j));
  write_report(c.output_dir, r);
  print_report(r);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust energy management for building districts"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "run a single seed");
    sub->add_option("--method", common.method, "adr|olp|cep|tuned-cep")
        ->check(CLI::IsMember(known_methods()));
    sub->add_option("--output", common.output, "output directory (overrides the config)");
  };
  auto* fit = app.add_subcommand("fit", "fit AR models, ambiguity bounds and per-hour boxes");
  add_common(fit);
  auto* sim = app.add_subcommand("simulate", "closed-loop runs for every method and seed");
  add_common(sim);
  bool no_traces = false;
  sim->add_flag("--no-traces", no_traces, "skip the hourly trace CSVs");
  auto* exp = app.add_subcommand("export-lp", "write the horizon LP of one scenario hour");
  add_common(exp);
  int hour = 0;
  bool solve_it = false;
  exp->add_option("--hour", hour, "scenario hour index")->required();
  exp->add_flag("--solve", solve_it, "also solve and write the solution JSON");
  auto* rep = app.add_subcommand("report", "summary tables from a previous simulate run");
  add_common(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  try {
    if (*fit) return cmd_fit(common);
    if (*sim) return cmd_simulate(common, !no_traces);
    if (*exp) return cmd_export_lp(common, hour, solve_it);
    if (*rep) return cmd_report(common);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
