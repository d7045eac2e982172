#pragma once

// Forecast-error statistics: AR(1) fits per hour of day, confidence bounds on
// the residual mean and variance, the per-coordinate uncertainty box, and the
// affine map from stacked residuals to disturbance trajectories.
//
// Hours of day are indexed 0..23 throughout (hour label = index + 1).

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "drbem/error.hpp"
#include "drbem/stats.hpp"

namespace drbem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr int kHoursPerDay = 24;

using HourArray = std::array<double, kHoursPerDay>;

/// Daily forecast/realization pairs of one disturbance.
struct DisturbanceHistory {
  std::string id;
  std::vector<HourArray> forecast;
  std::vector<HourArray> realization;

  int days() const { return static_cast<int>(forecast.size()); }

  void validate() const {
    if (forecast.size() != realization.size()) {
      throw ShapeError("history '" + id + "': forecast and realization day counts differ");
    }
    if (days() < 3) throw DomainError("history '" + id + "': at least 3 days are required");
    for (std::size_t k = 0; k < forecast.size(); ++k) {
      for (int t = 0; t < kHoursPerDay; ++t) {
        if (!std::isfinite(forecast[k][t]) || !std::isfinite(realization[k][t])) {
          throw DomainError("history '" + id + "': non-finite value on day " +
                            std::to_string(k + 1) + " hour " + std::to_string(t + 1));
        }
      }
    }
  }

  double error(int day, int hour) const { return realization[day][hour] - forecast[day][hour]; }
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <class T>
T parse_number(std::string_view field, int line, int column, const std::string& source) {
  const std::string_view f = trim(field);
  T value{};
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), value);
  if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty()) {
    throw ParseError("expected a number, got '" + std::string(f) + "'", line, column, source);
  }
  return value;
}

} // namespace detail

/// Parses `day,hour,forecast,realization` rows; days must be contiguous and each
/// must carry hours 1..24 exactly once.
inline DisturbanceHistory read_history_csv(std::istream& in, const std::string& id,
                                           const std::string& source = {}) {
  DisturbanceHistory h;
  h.id = id;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  int first_day = 0;
  std::vector<std::array<bool, kHoursPerDay>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto fields = detail::split_csv(view);
    if (!header_seen) {
      static const std::array<std::string_view, 4> expected{"day", "hour", "forecast",
                                                            "realization"};
      if (fields.size() != 4) {
        throw ParseError("header must have columns day,hour,forecast,realization", line_no, 1,
                         source);
      }
      int col = 1;
      for (std::size_t c = 0; c < 4; ++c) {
        if (detail::trim(fields[c]) != expected[c]) {
          throw ParseError("expected column '" + std::string(expected[c]) + "'", line_no, col,
                           source);
        }
        col += static_cast<int>(fields[c].size()) + 1;
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), line_no, 1,
                       source);
    }
    std::array<int, 4> col{};
    col[0] = 1;
    for (std::size_t c = 1; c < 4; ++c) {
      col[c] = col[c - 1] + static_cast<int>(fields[c - 1].size()) + 1;
    }
    const int day = detail::parse_number<int>(fields[0], line_no, col[0], source);
    const int hour = detail::parse_number<int>(fields[1], line_no, col[1], source);
    const double f = detail::parse_number<double>(fields[2], line_no, col[2], source);
    const double r = detail::parse_number<double>(fields[3], line_no, col[3], source);
    if (hour < 1 || hour > kHoursPerDay) {
      throw ParseError("hour must be in 1..24", line_no, col[1], source);
    }
    if (h.forecast.empty()) first_day = day;
    const int k = day - first_day;
    if (k < 0 || k > h.days()) {
      throw ParseError("days must be contiguous and increasing", line_no, col[0], source);
    }
    if (k == h.days()) {
      if (k > 0) {
        for (int t = 0; t < kHoursPerDay; ++t) {
          if (!seen.back()[t]) {
            throw ParseError("day " + std::to_string(day - 1) + " is missing hour " +
                                 std::to_string(t + 1),
                             line_no, col[0], source);
          }
        }
      }
      h.forecast.emplace_back();
      h.realization.emplace_back();
      h.forecast.back().fill(NAN);
      h.realization.back().fill(NAN);
      seen.emplace_back();
      seen.back().fill(false);
    }
    if (seen[k][hour - 1]) throw ParseError("duplicate hour", line_no, col[1], source);
    seen[k][hour - 1] = true;
    h.forecast[k][hour - 1] = f;
    h.realization[k][hour - 1] = r;
  }
  if (!header_seen) throw ParseError("missing header", line_no + 1, 1, source);
  if (!seen.empty()) {
    for (int t = 0; t < kHoursPerDay; ++t) {
      if (!seen.back()[t]) {
        throw ParseError("last day is missing hour " + std::to_string(t + 1), line_no, 1, source);
      }
    }
  }
  return h;
}

inline DisturbanceHistory read_history_csv(const std::string& path, const std::string& id) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_history_csv(in, id, path);
}

inline void write_history_csv(std::ostream& out, const DisturbanceHistory& h) {
  out << "day,hour,forecast,realization\n";
  char buf[64];
  for (int k = 0; k < h.days(); ++k) {
    for (int t = 0; t < kHoursPerDay; ++t) {
      out << (k + 1) << ',' << (t + 1) << ',';
      auto r1 = std::to_chars(buf, buf + sizeof buf, h.forecast[k][t]);
      out.write(buf, r1.ptr - buf);
      out << ',';
      auto r2 = std::to_chars(buf, buf + sizeof buf, h.realization[k][t]);
      out.write(buf, r2.ptr - buf);
      out << '\n';
    }
  }
}

/// Per-hour AR(1) fit e_{t+1} = alpha_t e_t + w_t.
struct ARModel {
  std::string id;
  int days = 0;
  HourArray alpha{};
  std::array<std::vector<double>, kHoursPerDay> residuals;
  HourArray mean_hat{};
  HourArray var_hat{};
  /// Hours whose error energy sum_k e_t^2 vanished (alpha forced to 0).
  std::array<bool, kHoursPerDay> zero_energy{};

  int samples(int hour) const { return static_cast<int>(residuals[hour].size()); }
};

/// Least-squares AR(1) coefficient per hour, with hour 23 wrapping to hour 0 of
/// the next day; the last day contributes no residual at hour 23.
inline ARModel fit_ar(const DisturbanceHistory& history) {
  history.validate();
  ARModel m;
  m.id = history.id;
  m.days = history.days();
  const int n = history.days();
  for (int t = 0; t < kHoursPerDay; ++t) {
    const bool wraps = (t == kHoursPerDay - 1);
    const int usable = wraps ? n - 1 : n;
    auto next_error = [&](int k) {
      return wraps ? history.error(k + 1, 0) : history.error(k, t + 1);
    };
    double num = 0.0;
    double den = 0.0;
    for (int k = 0; k < usable; ++k) {
      const double e = history.error(k, t);
      num += next_error(k) * e;
      den += e * e;
    }
    m.zero_energy[t] = (den == 0.0);
    m.alpha[t] = m.zero_energy[t] ? 0.0 : num / den;
    auto& w = m.residuals[t];
    w.resize(usable);
    for (int k = 0; k < usable; ++k) w[k] = next_error(k) - m.alpha[t] * history.error(k, t);
    m.mean_hat[t] = stats::mean(w);
    m.var_hat[t] = stats::sample_variance(w);
  }
  return m;
}

/// Sum of squared one-step residuals at `hour` for a given coefficient; the
/// least-squares objective minimized by fit_ar.
inline double ar_objective(const DisturbanceHistory& history, int hour, double alpha) {
  const bool wraps = (hour == kHoursPerDay - 1);
  const int usable = wraps ? history.days() - 1 : history.days();
  double s = 0.0;
  for (int k = 0; k < usable; ++k) {
    const double next = wraps ? history.error(k + 1, 0) : history.error(k, hour + 1);
    const double r = next - alpha * history.error(k, hour);
    s += r * r;
  }
  return s;
}

/// Confidence rectangle for the residual mean and variance at one hour.
struct AmbiguityBounds {
  int samples = 0;
  double mu_hat = 0.0;
  double var_hat = 0.0;
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  double var_lo = 0.0;
  double var_hi = 0.0;
  double delta_chi = 0.01;
  double delta_st = 0.01;
  bool degenerate = false;

  double sigma_hi() const { return std::sqrt(var_hi); }
  bool contains(double mu, double var) const {
    return mu_lo <= mu && mu <= mu_hi && var_lo <= var && var <= var_hi;
  }
};

/// Bounds from summary statistics of `samples` residuals.
/// The variance interval uses the chi-square statistic (n-1)s^2/sigma^2 with
/// n-1 degrees of freedom; the larger quantile divides into the lower bound.
/// The mean interval uses the Student t statistic with n-1 degrees of freedom.
inline AmbiguityBounds ambiguity_bounds(double mu_hat, double var_hat, int samples,
                                        double delta_chi, double delta_st) {
  if (samples < 3) throw DomainError("ambiguity_bounds: at least 3 samples are required");
  if (!(delta_chi > 0.0 && delta_chi < 1.0 && delta_st > 0.0 && delta_st < 1.0)) {
    throw DomainError("ambiguity_bounds: confidence levels must lie in (0,1)");
  }
  if (delta_chi + delta_st >= 1.0) {
    throw DomainError("ambiguity_bounds: combined confidence level must be below 1");
  }
  if (var_hat < 0.0 || !std::isfinite(var_hat) || !std::isfinite(mu_hat)) {
    throw DomainError("ambiguity_bounds: invalid sample statistics");
  }
  AmbiguityBounds b;
  b.samples = samples;
  b.mu_hat = mu_hat;
  b.var_hat = var_hat;
  b.delta_chi = delta_chi;
  b.delta_st = delta_st;
  if (var_hat == 0.0) {
    b.degenerate = true;
    b.mu_lo = b.mu_hi = mu_hat;
    return b;
  }
  const int dof = samples - 1;
  const double scaled = dof * var_hat;
  b.var_lo = scaled / stats::chi2_quantile(1.0 - delta_chi / 2.0, dof);
  b.var_hi = scaled / stats::chi2_quantile(delta_chi / 2.0, dof);
  const double half = stats::student_t_quantile(1.0 - delta_st / 2.0, dof) *
                      std::sqrt(var_hat / samples);
  b.mu_lo = mu_hat - half;
  b.mu_hi = mu_hat + half;
  return b;
}

inline AmbiguityBounds ambiguity_bounds(const ARModel& model, int hour, double delta_chi,
                                        double delta_st) {
  if (hour < 0 || hour >= kHoursPerDay) throw DomainError("ambiguity_bounds: hour out of range");
  return ambiguity_bounds(model.mean_hat[hour], model.var_hat[hour], model.samples(hour),
                          delta_chi, delta_st);
}

/// Everything learned about one disturbance: its AR fit and hourly bounds.
struct AmbiguitySpec {
  ARModel model;
  std::array<AmbiguityBounds, kHoursPerDay> bounds;
};

inline AmbiguitySpec fit_ambiguity(const DisturbanceHistory& history, double delta_chi,
                                   double delta_st) {
  AmbiguitySpec s;
  s.model = fit_ar(history);
  for (int t = 0; t < kHoursPerDay; ++t) {
    s.bounds[t] = ambiguity_bounds(s.model, t, delta_chi, delta_st);
  }
  return s;
}

/// Axis-aligned box over stacked residuals; coordinate j = i*T + t (t 0-based).
struct UncertaintyBox {
  int horizon = 0;
  int disturbances = 0;
  Vec lower;
  Vec upper;
  Vec beta_lo;
  Vec beta_hi;

  int size() const { return horizon * disturbances; }
  int index(int t, int i) const { return i * horizon + t; }
  Vec center() const { return 0.5 * (lower + upper); }
  Vec halfwidth() const { return 0.5 * (upper - lower); }
  bool contains(const Vec& w, double tol = 0.0) const {
    for (int j = 0; j < size(); ++j) {
      if (w[j] < lower[j] - tol || w[j] > upper[j] + tol) return false;
    }
    return true;
  }

  /// A box collapsed onto the given point.
  static UncertaintyBox point(const Vec& at, int horizon, int disturbances) {
    UncertaintyBox b;
    b.horizon = horizon;
    b.disturbances = disturbances;
    b.lower = at;
    b.upper = at;
    b.beta_lo = Vec::Zero(at.size());
    b.beta_hi = Vec::Zero(at.size());
    return b;
  }
};

/// Box from bounds[i][t] with explicit tail budgets; budgets must sum to epsilon.
inline UncertaintyBox build_box(const std::vector<std::vector<AmbiguityBounds>>& bounds,
                                double epsilon, const Vec& beta_lo, const Vec& beta_hi) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("build_box: epsilon must lie in (0,1)");
  const int d = static_cast<int>(bounds.size());
  if (d == 0) throw ShapeError("build_box: no disturbances");
  const int horizon = static_cast<int>(bounds.front().size());
  for (const auto& row : bounds) {
    if (static_cast<int>(row.size()) != horizon) throw ShapeError("build_box: ragged bounds");
  }
  const int n = horizon * d;
  if (beta_lo.size() != n || beta_hi.size() != n) {
    throw ShapeError("build_box: budget vectors must have T*|D| entries");
  }
  if ((beta_lo.array() <= 0.0).any() || (beta_hi.array() <= 0.0).any() ||
      (beta_lo.array() >= 1.0).any() || (beta_hi.array() >= 1.0).any()) {
    throw DomainError("build_box: tail budgets must lie in (0,1)");
  }
  if (std::abs(beta_lo.sum() + beta_hi.sum() - epsilon) > 1e-12) {
    throw DomainError("build_box: tail budgets must sum to epsilon");
  }
  UncertaintyBox box;
  box.horizon = horizon;
  box.disturbances = d;
  box.lower.resize(n);
  box.upper.resize(n);
  box.beta_lo = beta_lo;
  box.beta_hi = beta_hi;
  for (int i = 0; i < d; ++i) {
    for (int t = 0; t < horizon; ++t) {
      const int j = box.index(t, i);
      const AmbiguityBounds& b = bounds[i][t];
      const double s = b.sigma_hi();
      box.lower[j] = b.mu_lo - (s > 0.0 ? stats::normal_quantile(1.0 - beta_lo[j]) * s : 0.0);
      box.upper[j] = b.mu_hi + (s > 0.0 ? stats::normal_quantile(1.0 - beta_hi[j]) * s : 0.0);
    }
  }
  return box;
}

/// Box with the uniform allocation beta = epsilon / (2 T |D|).
inline UncertaintyBox build_box(const std::vector<std::vector<AmbiguityBounds>>& bounds,
                                double epsilon) {
  if (bounds.empty()) throw ShapeError("build_box: no disturbances");
  const Eigen::Index n =
      static_cast<Eigen::Index>(bounds.size() * bounds.front().size());
  const Vec beta = Vec::Constant(n, epsilon / (2.0 * static_cast<double>(n)));
  return build_box(bounds, epsilon, beta, beta);
}

/// Box of residual means [mu_lo, mu_hi] over the same coordinates.
inline UncertaintyBox mean_box(const std::vector<std::vector<AmbiguityBounds>>& bounds) {
  const int d = static_cast<int>(bounds.size());
  const int horizon = d == 0 ? 0 : static_cast<int>(bounds.front().size());
  UncertaintyBox box;
  box.horizon = horizon;
  box.disturbances = d;
  box.lower.resize(horizon * d);
  box.upper.resize(horizon * d);
  box.beta_lo = Vec::Zero(horizon * d);
  box.beta_hi = Vec::Zero(horizon * d);
  for (int i = 0; i < d; ++i) {
    for (int t = 0; t < horizon; ++t) {
      box.lower[box.index(t, i)] = bounds[i][t].mu_lo;
      box.upper[box.index(t, i)] = bounds[i][t].mu_hi;
    }
  }
  return box;
}

/// Bounds for T consecutive coordinates whose first residual is drawn at
/// hour-of-day `first_hour` (0..23).
inline std::vector<std::vector<AmbiguityBounds>> horizon_bounds(
    const std::vector<AmbiguitySpec>& specs, int first_hour, int horizon) {
  std::vector<std::vector<AmbiguityBounds>> out(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out[i].resize(horizon);
    for (int t = 0; t < horizon; ++t) {
      out[i][t] = specs[i].bounds[((first_hour + t) % kHoursPerDay + kHoursPerDay) % kHoursPerDay];
    }
  }
  return out;
}

/// xi = offset + H w, stacked like UncertaintyBox (j = i*T + t).
struct StackedDisturbanceMap {
  int horizon = 0;
  int disturbances = 0;
  Vec offset;
  Mat H;
  Vec e_hat;

  Vec apply(const Vec& w) const { return offset + H * w; }
};

/// Unrolls e_t = a_t e_{t-1} + w_t, xi_t = f_t + e_t (t = 1..T, e_0 = e_hat).
/// alphas[i][t] is the coefficient a_{t+1} carrying the error into step t+1.
inline StackedDisturbanceMap stack_disturbance(const std::vector<std::vector<double>>& alphas,
                                               const std::vector<Vec>& forecasts,
                                               const Vec& e_hat, int horizon) {
  const int d = static_cast<int>(forecasts.size());
  if (static_cast<int>(alphas.size()) != d || e_hat.size() != d) {
    throw ShapeError("stack_disturbance: disturbance counts disagree");
  }
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(alphas[i].size()) != horizon || forecasts[i].size() != horizon) {
      throw ShapeError("stack_disturbance: horizon lengths disagree");
    }
  }
  StackedDisturbanceMap m;
  m.horizon = horizon;
  m.disturbances = d;
  m.e_hat = e_hat;
  m.offset = Vec::Zero(horizon * d);
  m.H = Mat::Zero(horizon * d, horizon * d);
  for (int i = 0; i < d; ++i) {
    const int base = i * horizon;
    double carry = e_hat[i];
    for (int t = 0; t < horizon; ++t) {
      const double a = alphas[i][t];
      carry *= a;
      m.offset[base + t] = forecasts[i][t] + carry;
      m.H(base + t, base + t) = 1.0;
      for (int s = 0; s < t; ++s) m.H(base + t, base + s) = a * m.H(base + t - 1, base + s);
    }
  }
  return m;
}

/// AR coefficients for T steps starting at hour-of-day `first_hour` of the
/// residual feeding step 1 (the hour of e_hat).
inline std::vector<std::vector<double>> horizon_alphas(const std::vector<AmbiguitySpec>& specs,
                                                       int first_hour, int horizon) {
  std::vector<std::vector<double>> out(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    out[i].resize(horizon);
    for (int t = 0; t < horizon; ++t) {
      out[i][t] = specs[i].model.alpha[((first_hour + t) % kHoursPerDay + kHoursPerDay) %
                                       kHoursPerDay];
    }
  }
  return out;
}

// JSON --------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ARModel& m) {
  j = nlohmann::json{{"id", m.id},
                     {"days", m.days},
                     {"alpha", m.alpha},
                     {"mean_hat", m.mean_hat},
                     {"var_hat", m.var_hat},
                     {"zero_energy", m.zero_energy},
                     {"residuals", m.residuals}};
}

inline void from_json(const nlohmann::json& j, ARModel& m) {
  j.at("id").get_to(m.id);
  j.at("days").get_to(m.days);
  j.at("alpha").get_to(m.alpha);
  j.at("mean_hat").get_to(m.mean_hat);
  j.at("var_hat").get_to(m.var_hat);
  j.at("zero_energy").get_to(m.zero_energy);
  j.at("residuals").get_to(m.residuals);
}

inline void to_json(nlohmann::json& j, const AmbiguityBounds& b) {
  j = nlohmann::json{{"samples", b.samples},   {"mu_hat", b.mu_hat},
                     {"var_hat", b.var_hat},   {"mu_lo", b.mu_lo},
                     {"mu_hi", b.mu_hi},       {"var_lo", b.var_lo},
                     {"var_hi", b.var_hi},     {"delta_chi", b.delta_chi},
                     {"delta_st", b.delta_st}, {"degenerate", b.degenerate}};
}

inline void from_json(const nlohmann::json& j, AmbiguityBounds& b) {
  j.at("samples").get_to(b.samples);
  j.at("mu_hat").get_to(b.mu_hat);
  j.at("var_hat").get_to(b.var_hat);
  j.at("mu_lo").get_to(b.mu_lo);
  j.at("mu_hi").get_to(b.mu_hi);
  j.at("var_lo").get_to(b.var_lo);
  j.at("var_hi").get_to(b.var_hi);
  j.at("delta_chi").get_to(b.delta_chi);
  j.at("delta_st").get_to(b.delta_st);
  j.at("degenerate").get_to(b.degenerate);
}

inline void to_json(nlohmann::json& j, const AmbiguitySpec& s) {
  j = nlohmann::json{{"model", s.model}, {"bounds", s.bounds}};
}

inline void from_json(const nlohmann::json& j, AmbiguitySpec& s) {
  j.at("model").get_to(s.model);
  j.at("bounds").get_to(s.bounds);
}

inline nlohmann::json box_to_json(const UncertaintyBox& b) {
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return nlohmann::json{{"horizon", b.horizon},       {"disturbances", b.disturbances},
                        {"lower", vec(b.lower)},      {"upper", vec(b.upper)},
                        {"beta_lo", vec(b.beta_lo)}, {"beta_hi", vec(b.beta_hi)}};
}

} // namespace drbem
