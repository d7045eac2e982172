#pragma once

// Closed-loop evaluation: synthetic weather/occupancy scenarios with AR(1)
// forecast errors, the hourly receding-horizon loop against the bilinear
// plant, CEP tightening search, and summary tables.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "drbem/compile.hpp"
#include "drbem/dist_model.hpp"
#include "drbem/lp_solve.hpp"
#include "drbem/plant.hpp"

namespace drbem {

inline constexpr int kHoursPerWeek = 168;

// Scenarios -------------------------------------------------------------------

/// Hourly forecast and realization series; hour 0 is Monday 00:00.
struct Scenario {
  std::vector<std::string> disturbances;
  std::vector<std::vector<double>> forecast;    // [i][hour]
  std::vector<std::vector<double>> realization; // [i][hour]
  std::uint64_t seed = 0;

  int hours() const { return forecast.empty() ? 0 : static_cast<int>(forecast.front().size()); }
  Vec forecast_at(int hour) const {
    Vec v(static_cast<Eigen::Index>(disturbances.size()));
    for (std::size_t i = 0; i < disturbances.size(); ++i) v[i] = forecast[i][hour];
    return v;
  }
  Vec realization_at(int hour) const {
    Vec v(static_cast<Eigen::Index>(disturbances.size()));
    for (std::size_t i = 0; i < disturbances.size(); ++i) v[i] = realization[i][hour];
    return v;
  }
  void validate() const {
    if (forecast.size() != disturbances.size() || realization.size() != disturbances.size()) {
      throw ShapeError("scenario: series count does not match disturbances");
    }
    for (std::size_t i = 0; i < disturbances.size(); ++i) {
      if (static_cast<int>(forecast[i].size()) != hours() ||
          static_cast<int>(realization[i].size()) != hours()) {
        throw ShapeError("scenario: misaligned series for '" + disturbances[i] + "'");
      }
      for (int h = 0; h < hours(); ++h) {
        if (!std::isfinite(forecast[i][h]) || !std::isfinite(realization[i][h])) {
          throw DomainError("scenario: non-finite value for '" + disturbances[i] + "'");
        }
      }
    }
  }
};

/// Generator settings. Forecast errors follow e_{h+1} = alpha e_h + sigma n_h
/// with standard normal n_h; `noise` scales every sigma (0 gives perfect
/// forecasts). Solar errors scale with the clear-sky profile, vanish at night,
/// and realizations are clipped at zero.
struct ScenarioParams {
  std::vector<std::string> disturbances = default_disturbances();
  double ambient_mean = 2.0;      // degC
  double ambient_swing = 4.0;     // degC, half peak-to-peak
  double ambient_day_sd = 2.5;    // degC, day-to-day weather level
  double ambient_persistence = 0.7;
  double ground = 8.0;            // degC
  double solar_peak = 0.30;       // kW/m2 on the south facade at noon
  double cloud_min = 0.2;         // smallest clear-sky fraction of a day
  double gains_peak = 2.5;        // kW per building
  double gains_base = 0.4;        // kW per building
  double alpha_ambient = 0.85;
  double sigma_ambient = 0.5;     // degC
  double alpha_ground = 0.9;
  double sigma_ground = 0.05;     // degC
  double alpha_solar = 0.6;
  double sigma_solar = 0.15;      // fraction of the clear-sky value
  double alpha_gains = 0.6;
  double sigma_gains = 0.25;      // kW
  double noise = 1.0;
  int training_days = 365;
};

namespace detail {

inline double clear_sky(const std::string& id, int hour_of_day, double peak) {
  // Sun between 07:00 and 17:00; facades see it at different times of day.
  const double h = hour_of_day + 0.5;
  if (h < 7.0 || h > 17.0) return 0.0;
  const double x = (h - 7.0) / 10.0; // 0..1 over the day
  const double base = std::sin(M_PI * x);
  if (id == "SRS") return peak * base;
  if (id == "SRE") return peak * 0.8 * base * std::max(0.0, 1.0 - x) * 1.6;
  if (id == "SRW") return peak * 0.8 * base * std::max(0.0, x) * 1.6;
  if (id == "SRN") return peak * 0.25 * base;
  return 0.0;
}

inline bool is_solar(const std::string& id) {
  return id == "SRS" || id == "SRE" || id == "SRW" || id == "SRN";
}

inline double occupancy(int hour_of_day) {
  return (hour_of_day >= 7 && hour_of_day < 19) ? 1.0 : 0.0;
}

/// Forecast and realization series of `days` days for every disturbance.
inline void generate_series(const ScenarioParams& p, int days, std::mt19937_64& rng,
                            std::vector<std::vector<double>>& forecast,
                            std::vector<std::vector<double>>& realization) {
  const int d = static_cast<int>(p.disturbances.size());
  const int H = days * kHoursPerDay;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  // Day-level weather: ambient level as an AR(1) walk, cloudiness i.i.d.
  std::vector<double> level(days), cloud(days);
  double lv = 0.0;
  for (int k = 0; k < days; ++k) {
    lv = p.ambient_persistence * lv +
         std::sqrt(1.0 - p.ambient_persistence * p.ambient_persistence) * p.ambient_day_sd *
             normal(rng);
    level[k] = lv;
    cloud[k] = p.cloud_min + (1.0 - p.cloud_min) * uniform(rng);
  }
  forecast.assign(d, std::vector<double>(H));
  realization.assign(d, std::vector<double>(H));
  for (int i = 0; i < d; ++i) {
    const std::string& id = p.disturbances[i];
    auto fc = [&](int h) {
      const int k = h / kHoursPerDay;
      const int hod = h % kHoursPerDay;
      if (id == "AT") {
        return p.ambient_mean + level[k] +
               p.ambient_swing * std::sin(2.0 * M_PI * (hod - 9.0) / kHoursPerDay);
      }
      if (id == "GT") return p.ground;
      if (is_solar(id)) return cloud[k] * clear_sky(id, hod, p.solar_peak);
      if (id == "IG") return p.gains_base + (p.gains_peak - p.gains_base) * occupancy(hod);
      throw SpecError("synth_scenario: unknown disturbance '" + id + "'");
    };
    double e = 0.0;
    for (int h = 0; h < H; ++h) {
      const double f = fc(h);
      forecast[i][h] = f;
      if (h > 0) {
        const int hod_prev = (h - 1) % kHoursPerDay;
        const int hod = h % kHoursPerDay;
        const double n = normal(rng);
        if (id == "AT") {
          e = p.alpha_ambient * e + p.noise * p.sigma_ambient * n;
        } else if (id == "GT") {
          e = p.alpha_ground * e + p.noise * p.sigma_ground * n;
        } else if (id == "IG") {
          e = p.alpha_gains * e + p.noise * p.sigma_gains * n;
        } else {
          const double cs_prev = clear_sky(id, hod_prev, p.solar_peak);
          const double cs = clear_sky(id, hod, p.solar_peak);
          const double a = (cs_prev > 0.0 && cs > 0.0) ? p.alpha_solar : 0.0;
          e = a * e + p.noise * p.sigma_solar * cs * n;
        }
      }
      double r = f + e;
      if (is_solar(id)) r = std::max(0.0, r);
      realization[i][h] = r;
    }
  }
}

} // namespace detail

/// Synthetic evaluation span of `weeks` weeks plus `tail` look-ahead hours,
/// and a training history of p.training_days days from an independent stream.
struct SyntheticData {
  Scenario scenario;
  std::vector<DisturbanceHistory> training;
};

inline SyntheticData synth_scenario(const ScenarioParams& p, std::uint64_t seed, int weeks,
                                    int tail = 24) {
  if (weeks < 1) throw SpecError("synth_scenario: at least one week is required");
  SyntheticData out;
  out.scenario.disturbances = p.disturbances;
  out.scenario.seed = seed;
  {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      1u};
    std::mt19937_64 rng(seq);
    const int days = weeks * 7 + (tail + kHoursPerDay - 1) / kHoursPerDay;
    detail::generate_series(p, days, rng, out.scenario.forecast, out.scenario.realization);
    const int H = weeks * kHoursPerWeek + tail;
    for (auto& s : out.scenario.forecast) s.resize(H);
    for (auto& s : out.scenario.realization) s.resize(H);
  }
  {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      2u};
    std::mt19937_64 rng(seq);
    std::vector<std::vector<double>> f, r;
    detail::generate_series(p, p.training_days, rng, f, r);
    for (std::size_t i = 0; i < p.disturbances.size(); ++i) {
      DisturbanceHistory h;
      h.id = p.disturbances[i];
      h.forecast.resize(p.training_days);
      h.realization.resize(p.training_days);
      for (int k = 0; k < p.training_days; ++k) {
        for (int t = 0; t < kHoursPerDay; ++t) {
          h.forecast[k][t] = f[i][k * kHoursPerDay + t];
          h.realization[k][t] = r[i][k * kHoursPerDay + t];
        }
      }
      out.training.push_back(std::move(h));
    }
  }
  return out;
}

/// Scenario from recorded histories (one per disturbance, equal day counts).
inline Scenario scenario_from_histories(const std::vector<DisturbanceHistory>& hist) {
  Scenario s;
  for (const auto& h : hist) {
    h.validate();
    if (h.days() != hist.front().days()) throw ShapeError("scenario: day counts differ");
    s.disturbances.push_back(h.id);
    std::vector<double> f, r;
    for (int k = 0; k < h.days(); ++k) {
      f.insert(f.end(), h.forecast[k].begin(), h.forecast[k].end());
      r.insert(r.end(), h.realization[k].begin(), h.realization[k].end());
    }
    s.forecast.push_back(std::move(f));
    s.realization.push_back(std::move(r));
  }
  return s;
}

inline std::vector<AmbiguitySpec> fit_all(const std::vector<DisturbanceHistory>& hist,
                                          double delta_chi, double delta_st) {
  std::vector<AmbiguitySpec> out;
  for (const auto& h : hist) out.push_back(fit_ambiguity(h, delta_chi, delta_st));
  return out;
}

// Receding horizon ----------------------------------------------------------

struct HourRecord {
  int hour = 0;           // scenario hour index
  int hour_of_day = 0;
  double grid = 0.0;      // purchased kWh
  double cost = 0.0;      // CHF
  double violation = 0.0; // Kh over all rooms at the end of the hour
  double pv_used = 0.0;
  double pv_available = 0.0;
  Vec hub_state;                   // after the step
  std::vector<Vec> building_state; // after the step
  Vec hub_input;
  std::vector<Vec> building_input;
  std::vector<Vec> blinds;
  bool fallback = false;           // solver failed, previous input held
  std::string status;
  double solve_seconds = 0.0;
};

struct WeekSummary {
  int week = 0;
  double cost = 0.0;
  double violation = 0.0;
  int fallbacks = 0;
};

struct SimulationTrace {
  std::string method;
  std::uint64_t seed = 0;
  double comfort_tightening = 0.0;
  std::vector<HourRecord> hours;
  std::vector<WeekSummary> weeks;
  std::vector<std::string> failures; // "hour N: STATUS"
};

struct SimulationOptions {
  PolicySpec policy;
  double delta_chi = 0.01;
  double delta_st = 0.01;
  int weeks = 1;
  int first_week = 0;
  bool restart_weekly = true;
  double beta_lower_share = 0.5;
  SolveOptions solver;
};

/// Box, mean box and map for a plan starting at scenario hour k.
struct HorizonUncertainty {
  UncertaintyBox box;
  UncertaintyBox mu_box;
  StackedDisturbanceMap map;
};

inline HorizonUncertainty horizon_uncertainty(const Scenario& sc,
                                              const std::vector<AmbiguitySpec>& specs, int k,
                                              int T, double epsilon, double lower_share = 0.5) {
  if (!(lower_share > 0.0 && lower_share < 1.0)) {
    throw DomainError("lower tail share must lie in (0,1)");
  }
  const int d = static_cast<int>(sc.disturbances.size());
  if (static_cast<int>(specs.size()) != d) throw DimensionError("one ambiguity spec per disturbance");
  if (k + T > sc.hours()) throw DomainError("scenario too short for the horizon");
  // The first residual of the plan drives the error from hour k-1 into hour k.
  const int first = ((k - 1) % kHoursPerDay + kHoursPerDay) % kHoursPerDay;
  Vec e_hat = Vec::Zero(d);
  if (k > 0) {
    for (int i = 0; i < d; ++i) e_hat[i] = sc.realization[i][k - 1] - sc.forecast[i][k - 1];
  }
  std::vector<Vec> fc(d, Vec(T));
  for (int i = 0; i < d; ++i) {
    for (int t = 0; t < T; ++t) fc[i][t] = sc.forecast[i][k + t];
  }
  const auto bounds = horizon_bounds(specs, first, T);
  HorizonUncertainty u;
  // The tail budget epsilon is spread evenly over coordinates and split
  // between lower and upper tails by lower_share.
  const double n = static_cast<double>(T) * d;
  u.box = build_box(bounds, epsilon, Vec::Constant(T * d, lower_share * epsilon / n),
                    Vec::Constant(T * d, (1.0 - lower_share) * epsilon / n));
  u.mu_box = mean_box(bounds);
  u.map = stack_disturbance(horizon_alphas(specs, first, T), fc, e_hat, T);
  return u;
}

inline double room_violation(const Building& b, const Vec& x, int hour_of_day) {
  const double lb = b.comfort.lb[hour_of_day];
  const double ub = b.comfort.ub[hour_of_day];
  double v = 0.0;
  for (int r : b.room_states) v += std::max({lb - x[r], 0.0, x[r] - ub});
  return v;
}

/// Applies one hour of the plan to the true plant. PV output follows the
/// realized electricity demand up to what the weather allows, so the plan's PV
/// value is not binding; grid purchase closes the balance and surplus PV is
/// curtailed (no selling).
inline HourRecord plant_step(const DistrictModel& district, PlantState& state,
                             const ControlAction& a, const Vec& xi, int hour, int hour_of_day) {
  const Hub& hub = district.hub;
  HourRecord rec;
  rec.hour = hour;
  rec.hour_of_day = hour_of_day;
  Vec u = a.hub;
  const int pv = hub.input_index("pv", 0);
  rec.pv_available = std::max(0.0, pv_bound(hub, xi));
  const BalanceNode* elec = nullptr;
  for (const auto& n : hub.nodes) {
    if (n.id == "electricity") elec = &n;
  }
  if (elec == nullptr) throw SpecError("hub has no electricity node");
  // Hp p + Hu u + Hd d = 0 with Hp = 1; rest excludes the PV term.
  u[pv] = 0.0;
  double rest = elec->Hu.dot(u);
  for (std::size_t b = 0; b < district.buildings.size(); ++b) {
    const Building& bl = district.buildings[b];
    for (int k = 0; k < bl.input_dim(); ++k) {
      rest += elec->Hd[static_cast<int>(bl.input_stream[k])] * a.building_inputs[b][k];
    }
  }
  const double pv_gain = elec->Hu[pv];
  if (pv_gain > 0.0) u[pv] = std::clamp(-rest / pv_gain, 0.0, rec.pv_available);
  rec.pv_used = u[pv];
  rest += pv_gain * u[pv];
  rec.grid = std::max(0.0, -rest / elec->Hp[0]);
  rec.cost = district.tariff[hour_of_day] * rec.grid;
  state.hub = hub_step(hub, state.hub, u, xi);
  const int next_hod = (hour_of_day + 1) % kHoursPerDay;
  for (std::size_t b = 0; b < district.buildings.size(); ++b) {
    const Building& bl = district.buildings[b];
    state.buildings[b] = simulate_true_step(bl, state.buildings[b], a.building_inputs[b],
                                            a.blinds[b], xi);
    rec.violation += room_violation(bl, state.buildings[b], next_hod);
  }
  rec.hub_state = state.hub;
  rec.building_state = state.buildings;
  rec.hub_input = u;
  rec.building_input = a.building_inputs;
  rec.blinds = a.blinds;
  return rec;
}

inline ControlAction idle_action(const DistrictModel& d) {
  ControlAction a;
  a.hub = Vec::Zero(d.hub.input_dim());
  for (const auto& b : d.buildings) {
    a.building_inputs.push_back(Vec::Zero(b.input_dim()));
    a.blinds.push_back(Vec::Zero(b.blind_dim()));
  }
  return a;
}

/// Hourly receding-horizon loop over opt.weeks weeks starting at
/// opt.first_week. The plant restarts from its configured initial state at
/// each week boundary when restart_weekly is set.
inline SimulationTrace run_receding_horizon(const DistrictModel& district, const Scenario& sc,
                                            const std::vector<AmbiguitySpec>& specs,
                                            const SimulationOptions& opt) {
  const int T = opt.policy.horizon;
  const int start = opt.first_week * kHoursPerWeek;
  const int end = start + opt.weeks * kHoursPerWeek;
  if (end + T > sc.hours()) throw DomainError("scenario does not cover the simulated weeks");
  SimulationTrace tr;
  tr.method = to_string(opt.policy.mode);
  tr.seed = sc.seed;
  tr.comfort_tightening = opt.policy.comfort_tightening;
  PlantState state = initial_plant_state(district);
  ControlAction held = idle_action(district);
  for (int k = start; k < end; ++k) {
    const int hod = k % kHoursPerDay;
    if (opt.restart_weekly && (k - start) % kHoursPerWeek == 0) {
      state = initial_plant_state(district);
      held = idle_action(district);
      tr.weeks.push_back({static_cast<int>(k / kHoursPerWeek), 0.0, 0.0, 0});
    } else if (tr.weeks.empty()) {
      tr.weeks.push_back({static_cast<int>(k / kHoursPerWeek), 0.0, 0.0, 0});
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto u = horizon_uncertainty(sc, specs, k, T, opt.policy.epsilon, opt.beta_lower_share);
    const auto prob = compile(district, opt.policy, u.box, u.mu_box, u.map, state, hod);
    const Solution sol = solve(prob.lp, opt.solver);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool fallback = false;
    if (sol.optimal()) {
      held = prob.first_step(sol.x);
    } else {
      fallback = true;
      tr.failures.push_back("hour " + std::to_string(k) + ": " + to_string(sol.status));
    }
    HourRecord rec = plant_step(district, state, held, sc.realization_at(k), k, hod);
    rec.fallback = fallback;
    rec.status = to_string(sol.status);
    rec.solve_seconds = secs;
    auto& wk = tr.weeks.back();
    wk.cost += rec.cost;
    wk.violation += rec.violation;
    wk.fallbacks += fallback ? 1 : 0;
    tr.hours.push_back(std::move(rec));
  }
  return tr;
}

// Parallel batches ------------------------------------------------------------

/// Worker count from DRBEM_THREADS (default: hardware concurrency).
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DRBEM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) n = v;
  }
  return std::max(1, n);
}

/// Runs job(i) for i in [0, n) on up to worker_count() threads. Results are
/// written by index, so the outcome does not depend on scheduling.
inline void parallel_for(int n, const std::function<void(int)>& job) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// CEP tightening ----------------------------------------------------------------

/// Smallest c_b on the grid lo, lo+res, ..., hi with violations(c_b) <= target,
/// found by bisection under the assumption that violations decrease in c_b.
inline double tune_cep(const std::function<double(double)>& violations, double target,
                       double lo = 0.0, double hi = 3.0, double res = 0.01) {
  if (violations(lo) <= target) return lo;
  const int steps = static_cast<int>(std::lround((hi - lo) / res));
  auto at = [&](int k) { return lo + k * res; };
  if (violations(at(steps)) > target) {
    throw NotAttainable("tune_cep: violations at c_b = " + std::to_string(hi) +
                        " still exceed the target");
  }
  int bad = 0, good = steps; // violations(at(bad)) > target >= violations(at(good))
  while (good - bad > 1) {
    const int mid = (bad + good) / 2;
    (violations(at(mid)) <= target ? good : bad) = mid;
  }
  return at(good);
}

// Reporting -------------------------------------------------------------------

struct MethodSummary {
  std::string method;
  int weeks = 0;
  double cost_mean = 0.0;
  double cost_std = 0.0;
  double violation_mean = 0.0;
  double violation_std = 0.0;
  double cost_pu = std::nan("");
  int fallbacks = 0;
};

struct Report {
  double basis = std::nan(""); // mean weekly CEP cost, CHF/week
  std::vector<MethodSummary> methods;
};

/// Per-method weekly mean and sample standard deviation (0 for one week); cost
/// in per-unit of the mean CEP cost when CEP is present.
inline Report report(const std::vector<SimulationTrace>& traces) {
  if (traces.empty()) throw SpecError("report: no traces");
  std::map<std::string, std::vector<const WeekSummary*>> by;
  std::vector<std::string> order;
  for (const auto& t : traces) {
    if (!by.count(t.method)) order.push_back(t.method);
    for (const auto& w : t.weeks) by[t.method].push_back(&w);
  }
  auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  Report r;
  for (const auto& m : order) {
    MethodSummary s;
    s.method = m;
    std::vector<double> c, v;
    for (const auto* w : by[m]) {
      c.push_back(w->cost);
      v.push_back(w->violation);
      s.fallbacks += w->fallbacks;
    }
    s.weeks = static_cast<int>(c.size());
    moments(c, s.cost_mean, s.cost_std);
    moments(v, s.violation_mean, s.violation_std);
    if (m == "cep") r.basis = s.cost_mean;
    r.methods.push_back(s);
  }
  if (std::isfinite(r.basis) && r.basis > 0.0) {
    for (auto& s : r.methods) s.cost_pu = s.cost_mean / r.basis;
  }
  return r;
}

inline nlohmann::json report_to_json(const Report& r) {
  nlohmann::json j;
  j["basis_chf_per_week"] = std::isfinite(r.basis) ? nlohmann::json(r.basis) : nlohmann::json();
  j["methods"] = nlohmann::json::array();
  for (const auto& s : r.methods) {
    j["methods"].push_back({{"method", s.method},
                            {"weeks", s.weeks},
                            {"cost_mean", s.cost_mean},
                            {"cost_std", s.cost_std},
                            {"cost_pu", std::isfinite(s.cost_pu) ? nlohmann::json(s.cost_pu)
                                                                 : nlohmann::json()},
                            {"violation_kh_mean", s.violation_mean},
                            {"violation_kh_std", s.violation_std},
                            {"fallbacks", s.fallbacks}});
  }
  return j;
}

inline void write_report_csv(std::ostream& out, const Report& r) {
  out << "method,weeks,cost_mean,cost_std,cost_pu,violation_kh_mean,violation_kh_std,fallbacks\n";
  char buf[512];
  for (const auto& s : r.methods) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", s.method.c_str(),
                  s.weeks, s.cost_mean, s.cost_std, s.cost_pu, s.violation_mean,
                  s.violation_std, s.fallbacks);
    out << buf;
  }
}

/// One row per simulated hour. Wall-clock solve times are left out so reruns
/// produce identical files.
inline void write_trace_csv(std::ostream& out, const DistrictModel& d, const SimulationTrace& t) {
  out << "method,seed,hour,hour_of_day,grid_kwh,cost_chf,violation_kh,pv_used,pv_available,"
         "fallback,status";
  for (std::size_t b = 0; b < d.buildings.size(); ++b) {
    for (int r = 0; r < d.buildings[b].rooms; ++r) {
      out << ",b" << b << "_room" << r << "_temp";
    }
    for (const auto& n : d.buildings[b].input_names) out << ",b" << b << "_" << n;
    for (const auto& n : d.buildings[b].blind_names) out << ",b" << b << "_" << n;
  }
  for (const auto& dev : d.hub.devices) {
    for (const auto& n : dev.input_names) out << "," << n;
  }
  for (int k = 0; k < d.hub.state_dim(); ++k) out << ",hub_x" << k;
  out << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out << ',' << buf;
  };
  for (const auto& h : t.hours) {
    out << t.method << ',' << t.seed << ',' << h.hour << ',' << h.hour_of_day;
    num(h.grid);
    num(h.cost);
    num(h.violation);
    num(h.pv_used);
    num(h.pv_available);
    out << ',' << (h.fallback ? 1 : 0) << ',' << h.status;
    for (std::size_t b = 0; b < d.buildings.size(); ++b) {
      for (int r : d.buildings[b].room_states) num(h.building_state[b][r]);
      for (Eigen::Index k = 0; k < h.building_input[b].size(); ++k) num(h.building_input[b][k]);
      for (Eigen::Index k = 0; k < h.blinds[b].size(); ++k) num(h.blinds[b][k]);
    }
    for (Eigen::Index k = 0; k < h.hub_input.size(); ++k) num(h.hub_input[k]);
    for (Eigen::Index k = 0; k < h.hub_state.size(); ++k) num(h.hub_state[k]);
    out << '\n';
  }
}

} // namespace drbem
