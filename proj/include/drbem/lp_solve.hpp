#pragma once

// Front door for LP solves: a small presolve (fixed and row-free columns,
// rows emptied by substitution), then dense simplex for small problems and
// the interior-point method for large ones, each falling back to the other.

#include <cmath>
#include <string>
#include <vector>

#include "drbem/lp.hpp"
#include "drbem/lp_ipm.hpp"
#include "drbem/lp_simplex.hpp"

namespace drbem {

enum class LpMethod { Auto, Simplex, Ipm };

inline LpMethod lp_method_from_string(const std::string& s) {
  if (s == "auto") return LpMethod::Auto;
  if (s == "simplex") return LpMethod::Simplex;
  if (s == "ipm") return LpMethod::Ipm;
  throw SpecError("unknown LP method '" + s + "' (expected auto|simplex|ipm)");
}

struct SolveOptions {
  LpMethod method = LpMethod::Auto;
  double feasibility_tol = 1e-8;
  int iteration_limit = 0; // 0: method default
  // Auto picks simplex while the dense tableau stays below this many entries.
  double dense_limit = 2.5e5;
  SimplexOptions simplex;
  IpmOptions ipm;
};

namespace detail {

struct Presolved {
  LinearProgram reduced;
  std::vector<int> col_map;   // reduced column -> original column
  std::vector<double> fixed;  // original values of removed columns (NaN if kept)
  double obj_offset = 0.0;
  SolveStatus status = SolveStatus::Optimal; // non-Optimal: decided in presolve
};

inline Presolved presolve(const LinearProgram& lp, double tol) {
  Presolved out;
  const int n = lp.num_cols();
  std::vector<int> row_count(n, 0);
  for (const auto& e : lp.entries) {
    if (e.value != 0.0) ++row_count[e.col];
  }
  out.fixed.assign(n, std::nan(""));
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower[j];
    const double up = lp.upper[j];
    if (lo > up + tol) {
      out.status = SolveStatus::Infeasible;
      return out;
    }
    if (lo == up) {
      out.fixed[j] = lo;
    } else if (row_count[j] == 0) {
      const double c = lp.cost[j];
      const double v = c > 0.0 ? lo : (c < 0.0 ? up : (std::isfinite(lo) ? lo : (std::isfinite(up) ? up : 0.0)));
      if (!std::isfinite(v)) {
        out.status = SolveStatus::Unbounded;
        return out;
      }
      out.fixed[j] = v;
    }
  }
  std::vector<int> new_col(n, -1);
  auto& r = out.reduced;
  for (int j = 0; j < n; ++j) {
    if (std::isnan(out.fixed[j])) {
      new_col[j] = r.add_col(lp.col_names[j], lp.lower[j], lp.upper[j], lp.cost[j]);
      out.col_map.push_back(j);
    } else {
      out.obj_offset += lp.cost[j] * out.fixed[j];
    }
  }
  std::vector<double> shift(lp.num_rows(), 0.0);
  std::vector<std::vector<std::pair<int, double>>> rows(lp.num_rows());
  for (const auto& e : lp.entries) {
    if (e.value == 0.0) continue;
    if (new_col[e.col] >= 0) rows[e.row].emplace_back(new_col[e.col], e.value);
    else shift[e.row] += e.value * out.fixed[e.col];
  }
  for (int i = 0; i < lp.num_rows(); ++i) {
    const double b = lp.rhs[i] - shift[i];
    if (rows[i].empty()) {
      const double scale = std::max(1.0, std::abs(lp.rhs[i]));
      const bool ok = lp.sense[i] == Sense::EQ ? std::abs(b) <= tol * scale : b >= -tol * scale;
      if (!ok) {
        out.status = SolveStatus::Infeasible;
        return out;
      }
      continue;
    }
    r.add_row(lp.row_tags[i], lp.sense[i], b, rows[i], lp.row_names[i]);
  }
  return out;
}

inline bool dense_is_small(const LinearProgram& lp, double limit) {
  double m = lp.num_rows();
  double n = lp.num_cols();
  double le = 0;
  for (auto s : lp.sense) le += (s == Sense::LE);
  return m * (n + le + m) <= limit;
}

} // namespace detail

inline Solution solve(const LinearProgram& lp, const SolveOptions& opt = {}) {
  lp.validate();
  auto pre = detail::presolve(lp, opt.feasibility_tol);
  Solution sol;
  if (pre.status != SolveStatus::Optimal) {
    sol.status = pre.status;
    sol.method = "presolve";
    return sol;
  }
  Solution inner;
  if (pre.reduced.num_cols() == 0) {
    inner.status = SolveStatus::Optimal;
    inner.method = "presolve";
    inner.objective = 0.0;
  } else {
    SimplexOptions so = opt.simplex;
    IpmOptions io = opt.ipm;
    if (opt.iteration_limit > 0) {
      so.iteration_limit = opt.iteration_limit;
      io.iteration_limit = opt.iteration_limit;
    }
    const bool simplex_first =
        opt.method == LpMethod::Simplex ||
        (opt.method == LpMethod::Auto && detail::dense_is_small(pre.reduced, opt.dense_limit));
    auto run = [&](bool simplex) {
      return simplex ? solve_simplex(pre.reduced, so) : solve_ipm(pre.reduced, io);
    };
    inner = run(simplex_first);
    // Only Auto mode falls back; an explicit method choice is honored as is.
    if (opt.method == LpMethod::Auto && inner.status == SolveStatus::IterLimit) {
      inner = run(!simplex_first);
    }
  }
  sol.status = inner.status;
  sol.method = inner.method;
  sol.iterations = inner.iterations;
  if (sol.status != SolveStatus::Optimal) return sol;
  sol.x.assign(lp.num_cols(), 0.0);
  for (int j = 0; j < lp.num_cols(); ++j) {
    if (!std::isnan(pre.fixed[j])) sol.x[j] = pre.fixed[j];
  }
  for (std::size_t k = 0; k < pre.col_map.size(); ++k) sol.x[pre.col_map[k]] = inner.x[k];
  sol.objective = lp.objective(sol.x);
  sol.max_residual = verify(lp, sol.x, 0.0).max_violation;
  return sol;
}

} // namespace drbem
