#pragma once

// Two-phase bounded primal simplex on a dense tableau.
//
// Rows become equalities with a slack per <= row; nonbasic variables sit at a
// finite bound (or at zero when free). Pricing is Dantzig's rule with ties
// broken by lowest index; after a run of degenerate pivots the method falls
// back to Bland's rule until progress resumes. The final basic solution is
// recomputed from the original data with an LU factorization of the basis.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "drbem/lp.hpp"

namespace drbem {

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int iteration_limit = 0; // 0: 50 (m + n) + 1000
  int degenerate_switch = 50;
};

namespace detail {

class DenseSimplex {
public:
  DenseSimplex(const LinearProgram& lp, const SimplexOptions& opt) : lp_(lp), opt_(opt) {}

  Solution run() {
    build();
    Solution sol;
    sol.method = "simplex";
    const int limit = opt_.iteration_limit > 0 ? opt_.iteration_limit
                                               : 50 * (m_ + n_) + 1000;
    // Phase 1: minimize the sum of artificials.
    std::vector<double> phase1(total_, 0.0);
    for (int j = first_art_; j < total_; ++j) phase1[j] = 1.0;
    set_costs(phase1);
    Outcome o = iterate(limit, sol.iterations);
    if (o == Outcome::IterLimit) {
      sol.status = SolveStatus::IterLimit;
      return sol;
    }
    double infeas = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] >= first_art_) infeas += xb_[i];
    }
    double scale = 1.0;
    for (double b : lp_.rhs) scale = std::max(scale, std::abs(b));
    if (infeas > 10.0 * opt_.feasibility_tol * scale) {
      sol.status = SolveStatus::Infeasible;
      return sol;
    }
    retire_artificials();

    std::vector<double> phase2(total_, 0.0);
    for (int j = 0; j < n_; ++j) phase2[j] = lp_.cost[j];
    set_costs(phase2);
    o = iterate(limit, sol.iterations);
    if (o == Outcome::IterLimit) {
      sol.status = SolveStatus::IterLimit;
      return sol;
    }
    if (o == Outcome::Unbounded) {
      sol.status = SolveStatus::Unbounded;
      return sol;
    }
    recompute_basic_values();
    sol.x.assign(value_.begin(), value_.begin() + n_);
    sol.status = SolveStatus::Optimal;
    sol.objective = lp_.objective(sol.x);
    sol.max_residual = verify(lp_, sol.x, 0.0).max_violation;
    return sol;
  }

private:
  enum class Outcome { Optimal, Unbounded, IterLimit };
  enum class State { Basic, AtLower, AtUpper, FreeZero };

  void build() {
    n_ = lp_.num_cols();
    m_ = lp_.num_rows();
    slack_of_row_.assign(m_, -1);
    int ns = 0;
    for (int i = 0; i < m_; ++i) {
      if (lp_.sense[i] == Sense::LE) slack_of_row_[i] = n_ + ns++;
    }
    first_art_ = n_ + ns;
    total_ = first_art_ + m_;
    lo_.assign(total_, 0.0);
    up_.assign(total_, kInfinity);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = lp_.lower[j];
      up_[j] = lp_.upper[j];
    }
    a_ = Eigen::MatrixXd::Zero(m_, total_);
    for (const auto& e : lp_.entries) a_(e.row, e.col) += e.value;
    for (int i = 0; i < m_; ++i) {
      if (slack_of_row_[i] >= 0) a_(i, slack_of_row_[i]) = 1.0;
    }
    state_.assign(total_, State::AtLower);
    value_.assign(total_, 0.0);
    for (int j = 0; j < first_art_; ++j) {
      if (std::isfinite(lo_[j])) {
        state_[j] = State::AtLower;
        value_[j] = lo_[j];
      } else if (std::isfinite(up_[j])) {
        state_[j] = State::AtUpper;
        value_[j] = up_[j];
      } else {
        state_[j] = State::FreeZero;
        value_[j] = 0.0;
      }
    }
    Eigen::VectorXd resid = Eigen::Map<const Eigen::VectorXd>(lp_.rhs.data(), m_);
    for (int j = 0; j < first_art_; ++j) {
      if (value_[j] != 0.0) resid -= a_.col(j) * value_[j];
    }
    basis_.assign(m_, -1);
    xb_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const int art = first_art_ + i;
      const int sl = slack_of_row_[i];
      if (sl >= 0 && resid[i] >= 0.0) {
        basis_[i] = sl;
        state_[sl] = State::Basic;
        xb_[i] = resid[i];
        lo_[art] = up_[art] = 0.0; // unused artificial
        state_[art] = State::AtLower;
      } else {
        a_(i, art) = resid[i] >= 0.0 ? 1.0 : -1.0;
        basis_[i] = art;
        state_[art] = State::Basic;
        xb_[i] = std::abs(resid[i]);
      }
    }
    // The initial basis is a signed identity: scale rows so it is the identity.
    tab_ = a_;
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[i];
      const double piv = tab_(i, b);
      if (piv != 1.0) tab_.row(i) /= piv;
    }
    d_.assign(total_, 0.0);
  }

  void set_costs(const std::vector<double>& c) {
    cost_ = c;
    for (int j = 0; j < total_; ++j) {
      double dj = c[j];
      for (int i = 0; i < m_; ++i) {
        const double cb = c[basis_[i]];
        if (cb != 0.0) dj -= cb * tab_(i, j);
      }
      d_[j] = state_[j] == State::Basic ? 0.0 : dj;
    }
  }

  bool eligible(int j, int& dir) const {
    if (state_[j] == State::Basic) return false;
    if (up_[j] - lo_[j] == 0.0) return false;
    const double dj = d_[j];
    const double tol = opt_.optimality_tol;
    switch (state_[j]) {
    case State::AtLower:
      if (dj < -tol) {
        dir = 1;
        return true;
      }
      return false;
    case State::AtUpper:
      if (dj > tol) {
        dir = -1;
        return true;
      }
      return false;
    case State::FreeZero:
      if (std::abs(dj) > tol) {
        dir = dj < 0.0 ? 1 : -1;
        return true;
      }
      return false;
    default: return false;
    }
  }

  Outcome iterate(int limit, int& iterations) {
    int degenerate_run = 0;
    while (true) {
      if (iterations >= limit) return Outcome::IterLimit;
      const bool bland = degenerate_run >= opt_.degenerate_switch;
      int q = -1;
      int dir = 0;
      double best = 0.0;
      for (int j = 0; j < total_; ++j) {
        int dj_dir = 0;
        if (!eligible(j, dj_dir)) continue;
        if (bland) {
          q = j;
          dir = dj_dir;
          break;
        }
        if (std::abs(d_[j]) > best) {
          best = std::abs(d_[j]);
          q = j;
          dir = dj_dir;
        }
      }
      if (q < 0) return Outcome::Optimal;
      ++iterations;

      // Ratio test.
      double theta = up_[q] - lo_[q]; // bound flip distance (inf when unbounded)
      int leave = -1;
      double leave_alpha = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double alpha = dir * tab_(i, q);
        if (std::abs(alpha) <= opt_.pivot_tol) continue;
        const int b = basis_[i];
        double limit_i;
        if (alpha > 0.0) {
          if (!std::isfinite(lo_[b])) continue;
          limit_i = std::max(0.0, (xb_[i] - lo_[b]) / alpha);
        } else {
          if (!std::isfinite(up_[b])) continue;
          limit_i = std::max(0.0, (up_[b] - xb_[i]) / -alpha);
        }
        if (limit_i < theta - 1e-12) {
          theta = limit_i;
          leave = i;
          leave_alpha = alpha;
        } else if (leave >= 0 && limit_i <= theta + 1e-12) {
          const double a_abs = std::abs(alpha);
          const bool take = bland ? b < basis_[leave]
                                  : (a_abs > std::abs(leave_alpha) ||
                                     (a_abs == std::abs(leave_alpha) && b < basis_[leave]));
          if (take) {
            theta = std::min(theta, limit_i);
            leave = i;
            leave_alpha = alpha;
          }
        }
      }
      if (!std::isfinite(theta)) return Outcome::Unbounded;
      degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;

      // Move the entering variable by theta.
      for (int i = 0; i < m_; ++i) {
        const double t = tab_(i, q);
        if (t != 0.0) xb_[i] -= dir * theta * t;
      }
      const double entering_value = value_[q] + dir * theta;
      if (leave < 0) {
        // Bound flip.
        value_[q] = dir > 0 ? up_[q] : lo_[q];
        state_[q] = dir > 0 ? State::AtUpper : State::AtLower;
        continue;
      }
      const int out = basis_[leave];
      const bool to_lower = leave_alpha > 0.0;
      value_[out] = to_lower ? lo_[out] : up_[out];
      state_[out] = to_lower ? State::AtLower : State::AtUpper;
      pivot(leave, q);
      basis_[leave] = q;
      state_[q] = State::Basic;
      xb_[leave] = entering_value;
      value_[q] = entering_value;
    }
  }

  void pivot(int r, int q) {
    const double piv = tab_(r, q);
    tab_.row(r) /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = tab_(i, q);
      if (f != 0.0) tab_.row(i) -= f * tab_.row(r);
    }
    const double dq = d_[q];
    if (dq != 0.0) {
      for (int j = 0; j < total_; ++j) d_[j] -= dq * tab_(r, j);
    }
    d_[q] = 0.0;
  }

  void retire_artificials() {
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[i];
      if (b < first_art_) continue;
      int q = -1;
      double best = opt_.pivot_tol;
      for (int j = 0; j < first_art_; ++j) {
        if (state_[j] == State::Basic) continue;
        if (std::abs(tab_(i, j)) > best) {
          best = std::abs(tab_(i, j));
          q = j;
        }
      }
      if (q >= 0) {
        const double entering_value = value_[q];
        value_[b] = 0.0;
        state_[b] = State::AtLower;
        pivot(i, q);
        basis_[i] = q;
        state_[q] = State::Basic;
        // The artificial was at (numerically) zero, so nothing else moves.
        xb_[i] = entering_value;
        value_[q] = entering_value;
      }
    }
    for (int j = first_art_; j < total_; ++j) {
      lo_[j] = up_[j] = 0.0;
      if (state_[j] != State::Basic) {
        state_[j] = State::AtLower;
        value_[j] = 0.0;
      }
    }
  }

  void recompute_basic_values() {
    Eigen::MatrixXd B(m_, m_);
    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(lp_.rhs.data(), m_);
    for (int j = 0; j < total_; ++j) {
      if (state_[j] != State::Basic && value_[j] != 0.0) r -= a_.col(j) * value_[j];
    }
    for (int i = 0; i < m_; ++i) B.col(i) = a_.col(basis_[i]);
    if (m_ > 0) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
      const Eigen::VectorXd xb = lu.solve(r);
      if (xb.allFinite()) {
        for (int i = 0; i < m_; ++i) xb_[i] = xb[i];
      }
    }
    for (int i = 0; i < m_; ++i) value_[basis_[i]] = xb_[i];
  }

  static constexpr double kInfinity = std::numeric_limits<double>::infinity();

  const LinearProgram& lp_;
  SimplexOptions opt_;
  int n_ = 0;
  int m_ = 0;
  int first_art_ = 0;
  int total_ = 0;
  std::vector<int> slack_of_row_;
  std::vector<double> lo_, up_, value_, cost_, d_, xb_;
  std::vector<State> state_;
  std::vector<int> basis_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd tab_;
};

} // namespace detail

inline Solution solve_simplex(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  lp.validate();
  return detail::DenseSimplex(lp, opt).run();
}

} // namespace drbem
