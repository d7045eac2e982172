#pragma once

// Homogeneous self-dual interior-point method for
//   min c'x  s.t.  A x = b,  G x + s = h,  s >= 0,  x free,
// where G collects the <= rows and the finite variable bounds.
//
// Each iteration factors the quasi-definite matrix
//   [ rho I   A'      G'        ]
//   [ A      -delta I  0        ]
//   [ G       0       -(W+delta I) ],  W = diag(s ./ z),
// once (sparse LDL', symbolic analysis done a single time) and uses it for the
// tau-elimination solve, the affine predictor and the Mehrotra corrector.
// Regularization is removed by iterative refinement against the exact matrix.
// Rows and columns are equilibrated (Ruiz) before the iteration starts.
// The fill-reducing ordering comes from CHOLMOD (AMD, or nested dissection
// when AMD fills in badly); the numeric factorization is Eigen's.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <suitesparse/cholmod.h>

#include "drbem/lp.hpp"

namespace drbem {

struct IpmOptions {
  double feasibility_tol = 1e-9;
  double gap_tol = 1e-9;
  double infeasibility_tol = 1e-9;
  int iteration_limit = 200;
  double static_reg = 1e-8;
  int refinement_steps = 3;
  // Refinement stops once the KKT residual is below this, relative to the rhs.
  double refinement_tol = 1e-11;
  int ruiz_passes = 15;
  int centrality_correctors = 2;
};

namespace detail {

// Eigen ordering functor; perm.indices()[k] is the original index placed at k.
template <typename StorageIndex>
struct CholmodOrdering {
  using PermutationType = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, StorageIndex>;

  // `mat` holds the full symmetric pattern; CHOLMOD reads its upper triangle.
  template <typename MatrixType>
  void operator()(const MatrixType& mat, PermutationType& perm) {
    const int n = static_cast<int>(mat.rows());
    Eigen::SparseMatrix<double, Eigen::ColMajor, int> a = mat;
    a.makeCompressed();
    cholmod_common cc;
    cholmod_start(&cc);
    cc.postorder = true;
    cc.print = 0;
    cholmod_sparse cs{};
    cs.nrow = cs.ncol = n;
    cs.nzmax = a.nonZeros();
    cs.p = a.outerIndexPtr();
    cs.i = a.innerIndexPtr();
    cs.x = a.valuePtr();
    cs.stype = 1;
    cs.itype = CHOLMOD_INT;
    cs.xtype = CHOLMOD_PATTERN;
    cs.dtype = CHOLMOD_DOUBLE;
    cs.sorted = 1;
    cs.packed = 1;
    auto analyze = [&](int ordering) {
      cc.nmethods = 1;
      cc.method[0].ordering = ordering;
      return cholmod_analyze(&cs, &cc);
    };
    cholmod_factor* f = analyze(CHOLMOD_AMD);
    // Same dense-fill test CHOLMOD applies by default before trying METIS.
    if (f != nullptr && cc.status == CHOLMOD_OK && cc.fl / cc.lnz >= 500.0) {
      const double amd_fl = cc.fl;
      cholmod_factor* g = analyze(CHOLMOD_NESDIS);
      if (g != nullptr && cc.status == CHOLMOD_OK && cc.fl < amd_fl) {
        std::swap(f, g);
      } else {
        cc.status = CHOLMOD_OK;
      }
      cholmod_free_factor(&g, &cc);
    }
    perm.resize(n);
    if (f != nullptr && cc.status == CHOLMOD_OK) {
      const int* p = static_cast<const int*>(f->Perm);
      for (int k = 0; k < n; ++k) perm.indices()[k] = p[k];
    } else {
      Eigen::AMDOrdering<StorageIndex>()(mat, perm);
    }
    cholmod_free_factor(&f, &cc);
    cholmod_finish(&cc);
  }
};

class HsdIpm {
public:
  using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  using Vec = Eigen::VectorXd;

  HsdIpm(const LinearProgram& lp, const IpmOptions& opt) : lp_(lp), opt_(opt) {}

  Solution run() {
    Solution sol;
    sol.method = "ipm";
    setup();
    if (!initialize()) {
      sol.status = SolveStatus::IterLimit;
      return sol;
    }
    for (int it = 0; it < opt_.iteration_limit; ++it) {
      sol.iterations = it;
      residuals();
      const Status st = check();
      if (st != Status::Running) {
        return finish(sol, st);
      }
      if (!step()) {
        // Numerical breakdown: report the best classification available.
        const Status fallback = check(/*relaxed=*/true);
        return finish(sol, fallback == Status::Running ? Status::Stalled : fallback);
      }
    }
    residuals();
    const Status last = check(/*relaxed=*/true);
    return finish(sol, last == Status::Running ? Status::Stalled : last);
  }

private:
  enum class Status { Running, Optimal, Infeasible, Unbounded, Stalled };

  void setup() {
    n_ = lp_.num_cols();
    std::vector<Eigen::Triplet<double>> ta, tg;
    std::vector<int> eq_row(lp_.num_rows(), -1), le_row(lp_.num_rows(), -1);
    p_ = 0;
    q_ = 0;
    for (int i = 0; i < lp_.num_rows(); ++i) {
      if (lp_.sense[i] == Sense::EQ) {
        eq_row[i] = p_++;
      } else {
        le_row[i] = q_++;
      }
    }
    b_.resize(p_);
    h_.resize(q_ + 2 * n_);
    for (int i = 0; i < lp_.num_rows(); ++i) {
      if (eq_row[i] >= 0) b_[eq_row[i]] = lp_.rhs[i];
      if (le_row[i] >= 0) h_[le_row[i]] = lp_.rhs[i];
    }
    for (const auto& e : lp_.entries) {
      if (e.value == 0.0) continue;
      if (eq_row[e.row] >= 0) ta.emplace_back(eq_row[e.row], e.col, e.value);
      else tg.emplace_back(le_row[e.row], e.col, e.value);
    }
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lp_.lower[j])) {
        tg.emplace_back(q_, j, -1.0);
        h_[q_++] = -lp_.lower[j];
      }
      if (std::isfinite(lp_.upper[j])) {
        tg.emplace_back(q_, j, 1.0);
        h_[q_++] = lp_.upper[j];
      }
    }
    h_.conservativeResize(q_);
    A_.resize(p_, n_);
    A_.setFromTriplets(ta.begin(), ta.end());
    G_.resize(q_, n_);
    G_.setFromTriplets(tg.begin(), tg.end());
    c_ = Eigen::Map<const Vec>(lp_.cost.data(), n_);
    equilibrate();
    build_kkt_pattern();
  }

  // Ruiz equilibration of [A; G]; x = Dc x~, rows scaled by Er, cost by cscale.
  void equilibrate() {
    dc_ = Vec::Ones(n_);
    er_a_ = Vec::Ones(p_);
    er_g_ = Vec::Ones(q_);
    for (int pass = 0; pass < opt_.ruiz_passes; ++pass) {
      Vec col_norm = Vec::Zero(n_);
      Vec row_a = Vec::Zero(p_);
      Vec row_g = Vec::Zero(q_);
      for (int k = 0; k < A_.outerSize(); ++k) {
        for (SpMat::InnerIterator it(A_, k); it; ++it) {
          const double v = std::abs(it.value());
          col_norm[it.col()] = std::max(col_norm[it.col()], v);
          row_a[it.row()] = std::max(row_a[it.row()], v);
        }
      }
      for (int k = 0; k < G_.outerSize(); ++k) {
        for (SpMat::InnerIterator it(G_, k); it; ++it) {
          const double v = std::abs(it.value());
          col_norm[it.col()] = std::max(col_norm[it.col()], v);
          row_g[it.row()] = std::max(row_g[it.row()], v);
        }
      }
      auto inv_sqrt = [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; };
      Vec sc(n_), sa(p_), sg(q_);
      for (int j = 0; j < n_; ++j) sc[j] = inv_sqrt(col_norm[j]);
      for (int i = 0; i < p_; ++i) sa[i] = inv_sqrt(row_a[i]);
      for (int i = 0; i < q_; ++i) sg[i] = inv_sqrt(row_g[i]);
      A_ = sa.asDiagonal() * A_ * sc.asDiagonal();
      G_ = sg.asDiagonal() * G_ * sc.asDiagonal();
      dc_ = dc_.cwiseProduct(sc);
      er_a_ = er_a_.cwiseProduct(sa);
      er_g_ = er_g_.cwiseProduct(sg);
    }
    b_ = er_a_.cwiseProduct(b_);
    h_ = er_g_.cwiseProduct(h_);
    c_ = dc_.cwiseProduct(c_);
    cscale_ = std::max(1.0, c_.lpNorm<Eigen::Infinity>());
    c_ /= cscale_;
    At_ = A_.transpose();
    Gt_ = G_.transpose();
  }

  void build_kkt_pattern() {
    const int N = n_ + p_ + q_;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(N + A_.nonZeros() + G_.nonZeros());
    for (int j = 0; j < n_; ++j) t.emplace_back(j, j, opt_.static_reg);
    for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -opt_.static_reg);
    for (int i = 0; i < q_; ++i) t.emplace_back(n_ + p_ + i, n_ + p_ + i, -1.0);
    for (int k = 0; k < A_.outerSize(); ++k) {
      for (SpMat::InnerIterator it(A_, k); it; ++it) {
        t.emplace_back(n_ + it.row(), it.col(), it.value());
      }
    }
    for (int k = 0; k < G_.outerSize(); ++k) {
      for (SpMat::InnerIterator it(G_, k); it; ++it) {
        t.emplace_back(n_ + p_ + it.row(), it.col(), it.value());
      }
    }
    K_.resize(N, N);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();
    wdiag_.resize(q_);
    for (int i = 0; i < q_; ++i) {
      const int col = n_ + p_ + i;
      // Diagonal is the first stored entry of its (lower-triangular) column.
      wdiag_[i] = K_.outerIndexPtr()[col];
    }
    ldlt_.analyzePattern(K_);
  }

  bool factor(const Vec& w) {
    double* vals = K_.valuePtr();
    for (int i = 0; i < q_; ++i) vals[wdiag_[i]] = -(w[i] + opt_.static_reg);
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
  }

  // Exact (unregularized) KKT product.
  Vec kkt_apply(const Vec& v, const Vec& w) const {
    Vec out(v.size());
    const auto x = v.head(n_);
    const auto y = v.segment(n_, p_);
    const auto z = v.tail(q_);
    out.head(n_) = At_ * y + Gt_ * z;
    out.segment(n_, p_) = A_ * x;
    out.tail(q_) = G_ * x - w.cwiseProduct(z);
    return out;
  }

  Vec kkt_solve(const Vec& rhs, const Vec& w) const {
    Vec sol = ldlt_.solve(rhs);
    for (int k = 0; k < opt_.refinement_steps; ++k) {
      const Vec r = rhs - kkt_apply(sol, w);
      if (r.lpNorm<Eigen::Infinity>() <= opt_.refinement_tol * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      sol += ldlt_.solve(r);
    }
    return sol;
  }

  static void shift_positive(Vec& v) {
    if (v.size() == 0) return;
    const double alpha = -v.minCoeff();
    if (alpha >= 0.0) v.array() += 1.0 + alpha;
  }

  bool initialize() {
    const Vec ones = Vec::Ones(q_);
    if (!factor(ones)) return false;
    const int N = n_ + p_ + q_;
    Vec rhs = Vec::Zero(N);
    rhs.segment(n_, p_) = b_;
    rhs.tail(q_) = h_;
    Vec sol = kkt_solve(rhs, ones);
    x_ = sol.head(n_);
    s_ = -sol.tail(q_);
    shift_positive(s_);
    rhs.setZero();
    rhs.head(n_) = -c_;
    sol = kkt_solve(rhs, ones);
    y_ = sol.segment(n_, p_);
    z_ = sol.tail(q_);
    shift_positive(z_);
    tau_ = 1.0;
    kappa_ = 1.0;
    return x_.allFinite() && s_.allFinite() && z_.allFinite() && y_.allFinite();
  }

  void residuals() {
    rx_ = At_ * y_ + Gt_ * z_ + c_ * tau_;
    ry_ = A_ * x_ - b_ * tau_;
    rz_ = s_ + G_ * x_ - h_ * tau_;
    rtau_ = kappa_ + c_.dot(x_) + b_.dot(y_) + h_.dot(z_);
    mu_ = (s_.dot(z_) + tau_ * kappa_) / (q_ + 1);
  }

  Status check(bool relaxed = false) const {
    const double f = relaxed ? 1e3 : 1.0;
    const double bnorm = std::max(1.0, b_.size() ? b_.lpNorm<Eigen::Infinity>() : 0.0);
    const double hnorm = std::max(1.0, h_.size() ? h_.lpNorm<Eigen::Infinity>() : 0.0);
    const double cnorm = std::max(1.0, c_.lpNorm<Eigen::Infinity>());
    const double pcost = c_.dot(x_) / tau_;
    const double dcost = -(b_.dot(y_) + h_.dot(z_)) / tau_;
    const double pres = std::max(p_ ? (ry_ / tau_).lpNorm<Eigen::Infinity>() / bnorm : 0.0,
                                 q_ ? (rz_ / tau_).lpNorm<Eigen::Infinity>() / hnorm : 0.0);
    const double dres = (rx_ / tau_).lpNorm<Eigen::Infinity>() / cnorm;
    const double gap = std::abs(pcost - dcost);
    const double rel_gap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
    const double compl_gap = s_.dot(z_) / (tau_ * tau_);
    if (pres < f * opt_.feasibility_tol && dres < f * opt_.feasibility_tol &&
        (rel_gap < f * opt_.gap_tol || gap < f * opt_.gap_tol) &&
        compl_gap / std::max(1.0, std::abs(pcost)) < f * 10.0 * opt_.gap_tol) {
      return Status::Optimal;
    }
    const double by = b_.dot(y_) + h_.dot(z_);
    if (by < 0.0) {
      const double cert = (At_ * y_ + Gt_ * z_).lpNorm<Eigen::Infinity>() / -by;
      if (cert < f * opt_.infeasibility_tol && tau_ < kappa_) return Status::Infeasible;
    }
    const double cx = c_.dot(x_);
    if (cx < 0.0) {
      const double r1 = p_ ? (A_ * x_).lpNorm<Eigen::Infinity>() : 0.0;
      const double r2 = q_ ? (G_ * x_ + s_).lpNorm<Eigen::Infinity>() : 0.0;
      const double cert = std::max(r1, r2) / -cx;
      if (cert < f * opt_.infeasibility_tol && tau_ < kappa_) return Status::Unbounded;
    }
    return Status::Running;
  }

  static double max_step(const Vec& v, const Vec& dv) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
  }

  struct Direction {
    Vec dx, dy, dz, ds;
    double dtau = 0.0;
    double dkappa = 0.0;
  };

  // Solves the Newton system for residual weight `eta` and complementarity
  // targets ds_rhs (for s.*z) and dk_rhs (for tau*kappa).
  Direction direction(const Vec& w, const Vec& sol1, double eta, const Vec& ds_rhs,
                      double dk_rhs) const {
    const int N = n_ + p_ + q_;
    Vec rhs(N);
    rhs.head(n_) = -eta * rx_;
    rhs.segment(n_, p_) = -eta * ry_;
    rhs.tail(q_) = -eta * rz_ + ds_rhs.cwiseQuotient(z_);
    const Vec sol2 = kkt_solve(rhs, w);
    auto inner = [&](const Vec& v) {
      return c_.dot(v.head(n_)) + b_.dot(v.segment(n_, p_)) + h_.dot(v.tail(q_));
    };
    const double num = -eta * rtau_ + dk_rhs / tau_ - inner(sol2);
    const double den = inner(sol1) - kappa_ / tau_;
    Direction d;
    d.dtau = num / den;
    const Vec full = sol2 + d.dtau * sol1;
    d.dx = full.head(n_);
    d.dy = full.segment(n_, p_);
    d.dz = full.tail(q_);
    d.ds = -(ds_rhs + s_.cwiseProduct(d.dz)).cwiseQuotient(z_);
    d.dkappa = -(dk_rhs + kappa_ * d.dtau) / tau_;
    return d;
  }

  double step_length(const Direction& d) const {
    double a = std::min(max_step(s_, d.ds), max_step(z_, d.dz));
    if (d.dtau < 0.0) a = std::min(a, -tau_ / d.dtau);
    if (d.dkappa < 0.0) a = std::min(a, -kappa_ / d.dkappa);
    return a;
  }

  bool step() {
    const Vec w = s_.cwiseQuotient(z_);
    if (!factor(w)) return false;
    const int N = n_ + p_ + q_;
    Vec rhs1(N);
    rhs1.head(n_) = -c_;
    rhs1.segment(n_, p_) = b_;
    rhs1.tail(q_) = h_;
    const Vec sol1 = kkt_solve(rhs1, w);

    const Vec sz = s_.cwiseProduct(z_);
    const Direction aff = direction(w, sol1, 1.0, sz, tau_ * kappa_);
    const double a_aff = std::min(1.0, step_length(aff));
    const double sigma = std::clamp(std::pow(1.0 - a_aff, 3.0), 0.0, 1.0);

    const Vec ds_rhs = sz + aff.ds.cwiseProduct(aff.dz) - Vec::Constant(q_, sigma * mu_);
    const double dk_rhs = tau_ * kappa_ + aff.dtau * aff.dkappa - sigma * mu_;
    Direction d = direction(w, sol1, 1.0 - sigma, ds_rhs, dk_rhs);
    double reach = step_length(d);
    // Centrality correctors: push complementarity products that would leave
    // [0.1, 10] * sigma*mu at a slightly longer trial step back into range;
    // keep a corrected direction only if it actually lengthens the step.
    const double target = sigma * mu_;
    for (int k = 0; k < opt_.centrality_correctors && reach < 1.0; ++k) {
      const double trial = std::min(1.0, reach + 0.2);
      auto correction = [&](double v) {
        const double lo = 0.1 * target;
        const double hi = 10.0 * target;
        if (v < lo) return lo - v;
        if (v > hi) return std::max(hi - v, -hi);
        return 0.0;
      };
      Vec corr(q_);
      for (int i = 0; i < q_; ++i) {
        corr[i] = correction((s_[i] + trial * d.ds[i]) * (z_[i] + trial * d.dz[i]));
      }
      const double corr_tk = correction((tau_ + trial * d.dtau) * (kappa_ + trial * d.dkappa));
      Direction c = direction(w, sol1, 1.0 - sigma, ds_rhs - corr, dk_rhs - corr_tk);
      const double r = step_length(c);
      if (!(r >= reach + 0.02)) break;
      d = std::move(c);
      reach = r;
    }
    const double alpha = std::min(1.0, 0.995 * reach);
    if (!std::isfinite(alpha) || !d.dx.allFinite() || !d.dz.allFinite()) return false;
    x_ += alpha * d.dx;
    y_ += alpha * d.dy;
    z_ += alpha * d.dz;
    s_ += alpha * d.ds;
    tau_ += alpha * d.dtau;
    kappa_ += alpha * d.dkappa;
    // Keep the cone interior strictly positive under roundoff.
    s_ = s_.cwiseMax(1e-300);
    z_ = z_.cwiseMax(1e-300);
    return tau_ > 0.0 && kappa_ >= 0.0 && alpha > 1e-14;
  }

  Solution& finish(Solution& sol, Status st) const {
    switch (st) {
    case Status::Optimal: sol.status = SolveStatus::Optimal; break;
    case Status::Infeasible: sol.status = SolveStatus::Infeasible; return sol;
    case Status::Unbounded: sol.status = SolveStatus::Unbounded; return sol;
    default: sol.status = SolveStatus::IterLimit; return sol;
    }
    const Vec x = dc_.cwiseProduct(x_) / tau_;
    sol.x.assign(x.data(), x.data() + n_);
    sol.objective = lp_.objective(sol.x);
    sol.max_residual = verify(lp_, sol.x, 0.0).max_violation;
    return sol;
  }

  const LinearProgram& lp_;
  IpmOptions opt_;
  int n_ = 0, p_ = 0, q_ = 0;
  SpMat A_, G_, At_, Gt_, K_;
  Vec b_, h_, c_;
  Vec dc_, er_a_, er_g_;
  double cscale_ = 1.0;
  std::vector<int> wdiag_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, CholmodOrdering<int>> ldlt_;
  Vec x_, y_, z_, s_;
  double tau_ = 1.0, kappa_ = 1.0;
  Vec rx_, ry_, rz_;
  double rtau_ = 0.0, mu_ = 0.0;
};

} // namespace detail

inline Solution solve_ipm(const LinearProgram& lp, const IpmOptions& opt = {}) {
  lp.validate();
  return detail::HsdIpm(lp, opt).run();
}

} // namespace drbem
