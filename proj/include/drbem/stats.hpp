#pragma once

// Distribution functions and quantiles used to build ambiguity sets.
//
// CDFs are evaluated through the regularized incomplete gamma and beta
// functions (series / continued-fraction expansions); quantiles invert the
// CDFs by monotone bracketing followed by bisection.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>

#include "drbem/error.hpp"

namespace drbem::stats {

namespace detail {

inline constexpr int kMaxTerms = 10000;
inline constexpr double kEps = 1e-16;
inline constexpr double kTiny = 1e-300;

// Lower regularized gamma by its power series; valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma by the modified Lentz continued fraction; valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Continued fraction of the incomplete beta function (modified Lentz).
inline double beta_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxTerms; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

inline void require_probability(double p, const char* who) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError(std::string(who) + ": probability must lie in (0,1), got " +
                      std::to_string(p));
  }
}

inline void require_dof(int dof, const char* who) {
  if (dof < 1) {
    throw DomainError(std::string(who) + ": degrees of freedom must be >= 1, got " +
                      std::to_string(dof));
  }
}

} // namespace detail

/// Regularized lower incomplete gamma function P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw DomainError("gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_fraction(a, x);
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw DomainError("gamma_q: shape must be positive");
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

/// Regularized incomplete beta function I_x(a, b).
inline double beta_inc(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_inc: parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_fraction(b, a, 1.0 - x) / b;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double chi2_cdf(double x, int dof) {
  detail::require_dof(dof, "chi2_cdf");
  return gamma_p(0.5 * dof, 0.5 * x);
}

inline double student_t_cdf(double t, int dof) {
  detail::require_dof(dof, "student_t_cdf");
  const double nu = dof;
  const double tail = 0.5 * beta_inc(0.5 * nu, 0.5, nu / (nu + t * t));
  return t > 0.0 ? 1.0 - tail : tail;
}

/// Inverts a nondecreasing CDF by expanding a bracket around `guess` and bisecting.
/// `lower_limit` is the left end of the support (use -inf for the real line).
inline double invert_cdf(const std::function<double(double)>& cdf, double p, double guess,
                         double lower_limit = -std::numeric_limits<double>::infinity()) {
  double lo = guess;
  double hi = guess;
  double step = std::max(1.0, std::abs(guess));
  if (cdf(guess) < p) {
    while (cdf(hi) < p) {
      lo = hi;
      hi += step;
      step *= 2.0;
    }
  } else {
    while (cdf(lo) >= p) {
      hi = lo;
      lo -= step;
      step *= 2.0;
      if (lo <= lower_limit) {
        lo = lower_limit;
        break;
      }
    }
  }
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-14 * std::max(1.0, std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
  detail::require_probability(p, "normal_quantile");
  if (p == 0.5) return 0.0;
  // Symmetric: invert on the lower half to keep the tail probability exact.
  const double tail = std::min(p, 1.0 - p);
  const double q = invert_cdf([](double z) { return normal_cdf(z); }, tail, -1.0);
  return p < 0.5 ? q : -q;
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
inline double chi2_quantile(double p, int dof) {
  detail::require_probability(p, "chi2_quantile");
  detail::require_dof(dof, "chi2_quantile");
  return invert_cdf([dof](double x) { return chi2_cdf(x, dof); }, p,
                    static_cast<double>(dof), 0.0);
}

/// Quantile of Student's t distribution with `dof` degrees of freedom.
inline double student_t_quantile(double p, int dof) {
  detail::require_probability(p, "student_t_quantile");
  detail::require_dof(dof, "student_t_quantile");
  if (p == 0.5) return 0.0;
  const double tail = std::min(p, 1.0 - p);
  const double q = invert_cdf([dof](double t) { return student_t_cdf(t, dof); }, tail, -1.0);
  return p < 0.5 ? q : -q;
}

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance (divisor n-1); zero for fewer than two samples.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

/// Pearson sample correlation coefficient.
inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson_correlation: length mismatch");
  if (x.size() < 3) throw DomainError("pearson_correlation: need at least 3 samples");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateVariance("pearson_correlation: sample variance is zero");
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

} // namespace drbem::stats
