#pragma once

// Horizon problem assembly: state elimination over the stacked disturbance map,
// affine policies in past residuals, the exact box counterpart and the
// worst-case-expectation epigraph, emitted as one LinearProgram.
//
// Residuals are recentered on the box center m (w = m + w~) so that the box in
// w~ is symmetric about 0 and the disturbance offset absorbs H m.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drbem/dist_model.hpp"
#include "drbem/error.hpp"
#include "drbem/lp.hpp"
#include "drbem/plant.hpp"

namespace drbem {

enum class Policy { CEP, OLP, ADR };

inline std::string to_string(Policy p) {
  switch (p) {
  case Policy::CEP: return "cep";
  case Policy::OLP: return "olp";
  case Policy::ADR: return "adr";
  }
  return "?";
}

inline Policy policy_from_string(const std::string& s) {
  if (s == "cep" || s == "CEP") return Policy::CEP;
  if (s == "olp" || s == "OLP") return Policy::OLP;
  if (s == "adr" || s == "ADR") return Policy::ADR;
  throw SpecError("unknown policy '" + s + "' (expected cep|olp|adr)");
}

struct PolicySpec {
  Policy mode = Policy::ADR;
  int horizon = 8;
  double comfort_tightening = 0.0; // c_b, degC; CEP only
  double gamma = 1e3;
  double epsilon = 0.01;

  void validate() const {
    if (horizon < 1) throw SpecError("policy horizon must be positive");
    if (!(comfort_tightening >= 0.0)) throw SpecError("comfort tightening must be >= 0");
    if (comfort_tightening != 0.0 && mode != Policy::CEP) {
      throw SpecError("comfort tightening applies to CEP only");
    }
    if (!(gamma >= 0.0)) throw SpecError("slack penalty must be >= 0");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw SpecError("epsilon must lie in (0,1)");
  }
};

// Affine expressions over LP columns ----------------------------------------

struct LinExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  void add(int col, double v) {
    if (v != 0.0) terms.emplace_back(col, v);
  }
  void add(const LinExpr& e, double scale) {
    constant += scale * e.constant;
    for (const auto& [c, v] : e.terms) add(c, scale * v);
  }
  /// Sorts by column, merges duplicates and drops zeros.
  void normalize() {
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t out = 0;
    for (std::size_t k = 0; k < terms.size();) {
      const int c = terms[k].first;
      double v = 0.0;
      for (; k < terms.size() && terms[k].first == c; ++k) v += terms[k].second;
      if (v != 0.0) terms[out++] = {c, v};
    }
    terms.resize(out);
  }
  bool is_constant() const { return terms.empty(); }
  double eval(const std::vector<double>& x) const {
    double v = constant;
    for (const auto& [c, a] : terms) v += a * x[c];
    return v;
  }
};

/// a0(z) + sum_j a_j(z) w_j with a0, a_j affine in LP columns z.
struct AffineRow {
  LinExpr a0;
  std::vector<std::pair<int, LinExpr>> grad; // (coordinate j, a_j)
};

/// Shares |a| auxiliaries between rows: y >= a/k, y >= -a/k with k the leading
/// coefficient, so |a| = |k| y at the optimum. Keys are exact.
class AuxPool {
public:
  int get(LinearProgram& lp, const LinExpr& normalized) {
    std::string key(sizeof(double) * (1 + 2 * normalized.terms.size()), '\0');
    char* p = key.data();
    const double constant = normalized.constant + 0.0; // -0.0 and 0.0 share a key
    std::memcpy(p, &constant, sizeof(double));
    p += sizeof(double);
    for (const auto& [c, v] : normalized.terms) {
      const double cd = c;
      std::memcpy(p, &cd, sizeof(double));
      std::memcpy(p + sizeof(double), &v, sizeof(double));
      p += 2 * sizeof(double);
    }
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    const int y = lp.add_col("y" + std::to_string(index_.size()));
    std::vector<std::pair<int, double>> plus, minus;
    plus.reserve(normalized.terms.size() + 1);
    minus.reserve(normalized.terms.size() + 1);
    for (const auto& [c, v] : normalized.terms) {
      plus.emplace_back(c, v);
      minus.emplace_back(c, -v);
    }
    plus.emplace_back(y, -1.0);
    minus.emplace_back(y, -1.0);
    lp.add_row("robust_aux", Sense::LE, -normalized.constant, plus);
    lp.add_row("robust_aux", Sense::LE, normalized.constant, minus);
    index_.emplace(std::move(key), y);
    return y;
  }
  std::size_t size() const { return index_.size(); }

private:
  std::unordered_map<std::string, int> index_;
};

/// Emits the exact counterpart of  a0(z) + a(z)'w  (sense)  rhs  for all w in
/// the box center +- radius:
///   LE: a0 + a'center + sum_j radius_j |a_j| <= rhs, |a_j| via auxiliaries
///       unless a_j is constant;
///   EQ: a0 + a'center = rhs and a_j = 0 for every j with radius_j > 0.
/// A constant nonzero a_j in an equality is unsatisfiable; it is emitted
/// against a column fixed at zero so the solver reports infeasibility.
inline void robustify(LinearProgram& lp, AuxPool& pool, AffineRow row, Sense sense, double rhs,
                      const Vec& center, const Vec& radius, const std::string& tag) {
  LinExpr nominal = std::move(row.a0);
  double robust_const = 0.0;
  std::vector<int> aux;
  std::vector<double> aux_weight;
  for (auto& [j, a] : row.grad) {
    a.normalize();
    if (a.is_constant() && a.constant == 0.0) continue;
    if (center[j] != 0.0) nominal.add(a, center[j]);
    const double r = radius[j];
    if (r == 0.0) continue;
    if (sense == Sense::EQ) {
      std::vector<std::pair<int, double>> terms = a.terms;
      if (terms.empty()) {
        terms.emplace_back(lp.add_col("infeasible_" + std::to_string(lp.num_cols()), 0.0, 0.0), 1.0);
      }
      lp.add_row(tag + "_w", Sense::EQ, -a.constant, terms);
      continue;
    }
    if (a.is_constant()) {
      robust_const += r * std::abs(a.constant);
      continue;
    }
    const double k = a.terms.front().second;
    LinExpr scaled;
    scaled.constant = a.constant / k;
    scaled.terms.reserve(a.terms.size());
    for (const auto& [c, v] : a.terms) scaled.terms.emplace_back(c, v / k);
    aux.push_back(pool.get(lp, scaled));
    aux_weight.push_back(r * std::abs(k));
  }
  nominal.normalize();
  auto terms = nominal.terms;
  for (std::size_t k = 0; k < aux.size(); ++k) terms.emplace_back(aux[k], aux_weight[k]);
  const double b = rhs - nominal.constant - robust_const;
  if (terms.empty()) {
    // Decision-free row: keep it checkable by the solver.
    terms.emplace_back(lp.add_col("const_" + std::to_string(lp.num_cols()), 0.0, 0.0), 1.0);
  }
  lp.add_row(tag, sense, b, terms);
}

// Stacked horizon system in decision slots ----------------------------------

/// One horizon decision. Adaptive slots become affine policies in the residuals
/// of steps strictly before `step`; the others are single columns.
struct Slot {
  std::string name;
  int step = 0;
  bool adaptive = true;
  double lower = -kInf;
  double upper = kInf;
};

/// c0 + sum slot*coef + sum_j (wconst_j + sum wslot_(j,s) slot_s) w~_j  (sense)  rhs.
/// Slots in `wslot` must be non-adaptive (a product with an adaptive slot
/// would be quadratic in the policy).
struct SystemRow {
  std::string tag;
  Sense sense = Sense::LE;
  double rhs = 0.0;
  double c0 = 0.0;
  std::vector<std::pair<int, double>> slots;
  std::vector<std::pair<int, double>> wconst;
  std::vector<std::tuple<int, int, double>> wslot;
};

struct SlotIndex {
  std::vector<int> p;                                  // [t]
  std::vector<std::vector<int>> hub;                   // [t][hub input]
  std::vector<std::vector<std::vector<int>>> bu;       // [b][t][input]
  std::vector<std::vector<std::vector<int>>> bv;       // [b][t][blind]
  std::vector<std::vector<std::vector<int>>> bs;       // [b][t][room], slack on x_{t+1}
};

struct StackedSystem {
  int horizon = 0;
  int disturbances = 0;
  int start_hour = 0;
  std::vector<Slot> slots;
  SlotIndex index;
  std::vector<SystemRow> rows;
  SystemRow objective; // stage cost, sense/rhs unused

  int coordinates() const { return horizon * disturbances; }
};

/// Measured plant state at the start of the horizon.
struct PlantState {
  Vec hub;
  std::vector<Vec> buildings;
};

inline PlantState initial_plant_state(const DistrictModel& d) {
  PlantState s;
  s.hub = hub_initial_state(d.hub);
  for (const auto& b : d.buildings) s.buildings.push_back(b.x0);
  return s;
}

/// Map with the offset moved to the box center: xi = (offset + H m) + H w~.
inline StackedDisturbanceMap recenter(const StackedDisturbanceMap& map, const Vec& m) {
  if (m.size() != map.H.cols()) throw DimensionError("recenter: center size mismatch");
  StackedDisturbanceMap out = map;
  out.offset = map.offset + map.H * m;
  return out;
}

namespace detail {

/// States as affine functions of the slots and residuals, propagated by
/// forward substitution: value = c + s*slots + (g + sum_v slot_v gv[v]) w~.
struct StateStack {
  Vec c;
  Mat s;                                // n x slots
  Mat g;                                // n x coordinates
  std::vector<std::pair<int, Mat>> gv;  // (non-adaptive slot, n x coordinates)

  StateStack(const Vec& x0, int slots, int coords)
      : c(x0), s(Mat::Zero(x0.size(), slots)), g(Mat::Zero(x0.size(), coords)) {}

  void advance(const Mat& A) {
    c = A * c;
    s = A * s;
    g = A * g;
    for (auto& [slot, m] : gv) m = A * m;
  }
  Mat& gv_for(int slot, int n, int coords) {
    for (auto& [k, m] : gv) {
      if (k == slot) return m;
    }
    gv.emplace_back(slot, Mat::Zero(n, coords));
    return gv.back().second;
  }
};

/// Appends f' * state to the row.
inline void add_state(SystemRow& row, const Eigen::RowVectorXd& f, const StateStack& x) {
  if (f.isZero(0.0)) return;
  row.c0 += f.dot(x.c);
  const Eigen::RowVectorXd fs = f * x.s;
  for (Eigen::Index k = 0; k < fs.size(); ++k) {
    if (fs[k] != 0.0) row.slots.emplace_back(static_cast<int>(k), fs[k]);
  }
  const Eigen::RowVectorXd fg = f * x.g;
  for (Eigen::Index j = 0; j < fg.size(); ++j) {
    if (fg[j] != 0.0) row.wconst.emplace_back(static_cast<int>(j), fg[j]);
  }
  for (const auto& [slot, m] : x.gv) {
    const Eigen::RowVectorXd fm = f * m;
    for (Eigen::Index j = 0; j < fm.size(); ++j) {
      if (fm[j] != 0.0) row.wslot.emplace_back(static_cast<int>(j), slot, fm[j]);
    }
  }
}

/// Appends f' * xi_t, with xi_t = offset_t + H_t w~.
inline void add_disturbance(SystemRow& row, const Eigen::RowVectorXd& f,
                            const StackedDisturbanceMap& map, int t) {
  const int T = map.horizon;
  for (int i = 0; i < map.disturbances; ++i) {
    const double a = f[i];
    if (a == 0.0) continue;
    const int r = i * T + t;
    row.c0 += a * map.offset[r];
    for (int j = i * T; j <= r; ++j) {
      const double h = map.H(r, j);
      if (h != 0.0) row.wconst.emplace_back(j, a * h);
    }
  }
}

} // namespace detail

/// Builds every horizon row in slot space: hub device limits and conversions,
/// battery state limits, building input limits, soft comfort bands, balance
/// nodes, grid and slack nonnegativity, and the stage cost.
/// `map` must already be recentered; its residual coordinates are w~.
inline StackedSystem stack_system(const DistrictModel& district, const StackedDisturbanceMap& map,
                                  const PlantState& state, int start_hour,
                                  const PolicySpec& spec) {
  spec.validate();
  const int T = spec.horizon;
  const int d = district.disturbance_dim();
  if (map.horizon != T || map.disturbances != d) {
    throw DimensionError("stack_system: disturbance map does not match horizon or disturbances");
  }
  if (state.hub.size() != district.hub.state_dim() ||
      state.buildings.size() != district.buildings.size()) {
    throw DimensionError("stack_system: plant state does not match district");
  }
  for (std::size_t b = 0; b < district.buildings.size(); ++b) {
    if (state.buildings[b].size() != district.buildings[b].state_dim()) {
      throw DimensionError("stack_system: building state size mismatch");
    }
  }
  const int J = T * d;
  const Hub& hub = district.hub;
  const int nbld = static_cast<int>(district.buildings.size());
  const int h0 = ((start_hour % kHoursPerDay) + kHoursPerDay) % kHoursPerDay;

  StackedSystem sys;
  sys.horizon = T;
  sys.disturbances = d;
  sys.start_hour = h0;
  auto& ix = sys.index;
  auto new_slot = [&](std::string name, int step, bool adaptive, double lo = -kInf,
                      double up = kInf) {
    sys.slots.push_back({std::move(name), step, adaptive, lo, up});
    return static_cast<int>(sys.slots.size()) - 1;
  };
  std::vector<std::string> hub_names;
  for (const auto& dev : hub.devices) {
    for (const auto& n : dev.input_names) hub_names.push_back(n);
  }
  ix.bu.resize(nbld);
  ix.bv.resize(nbld);
  ix.bs.resize(nbld);
  for (int t = 0; t < T; ++t) {
    const std::string ts = "_t" + std::to_string(t);
    ix.p.push_back(new_slot("p" + ts, t, true));
    ix.hub.emplace_back();
    for (const auto& n : hub_names) ix.hub.back().push_back(new_slot(n + ts, t, true));
    for (int b = 0; b < nbld; ++b) {
      const Building& bl = district.buildings[b];
      const std::string bp = "b" + std::to_string(b) + "_";
      ix.bu[b].emplace_back();
      for (const auto& n : bl.input_names) ix.bu[b].back().push_back(new_slot(bp + n + ts, t, true));
      ix.bv[b].emplace_back();
      for (const auto& n : bl.blind_names) {
        ix.bv[b].back().push_back(new_slot(bp + n + ts, t, false, 0.0, 1.0));
      }
      ix.bs[b].emplace_back();
      for (int r = 0; r < bl.rooms; ++r) {
        ix.bs[b].back().push_back(
            new_slot(bp + "s_r" + std::to_string(r) + ts, t + 1, true));
      }
    }
  }
  const int S = static_cast<int>(sys.slots.size());

  // Hub devices.
  {
    detail::StateStack x(state.hub, S, J);
    for (int t = 0; t <= T; ++t) {
      for (std::size_t k = 0; k < hub.devices.size(); ++k) {
        const Device& dev = hub.devices[k];
        const int io = hub.input_offset(k);
        const int so = hub.state_offset(k);
        for (int r = 0; r < dev.rows(); ++r) {
          const bool has_u = !dev.Fu.row(r).isZero(0.0);
          const bool has_xi = dev.Fxi.cols() > 0 && !dev.Fxi.row(r).isZero(0.0);
          const bool pure_state = !has_u && !has_xi;
          // Input rows live on steps 0..T-1, pure state rows on 1..T (x_0 is measured).
          if (pure_state ? t == 0 : t == T) continue;
          SystemRow row;
          row.tag = dev.id;
          row.sense = Sense::LE;
          row.rhs = dev.h[r];
          if (dev.state_dim > 0) {
            Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(hub.state_dim());
            f.segment(so, dev.state_dim) = dev.Fx.row(r);
            detail::add_state(row, f, x);
          }
          if (has_u) {
            for (int l = 0; l < dev.input_dim; ++l) {
              if (dev.Fu(r, l) != 0.0) row.slots.emplace_back(ix.hub[t][io + l], dev.Fu(r, l));
            }
          }
          if (has_xi) detail::add_disturbance(row, dev.Fxi.row(r), map, t);
          sys.rows.push_back(std::move(row));
        }
        if (t < T) {
          for (int r = 0; r < dev.Gu.rows(); ++r) {
            SystemRow row;
            row.tag = "device_eq";
            row.sense = Sense::EQ;
            row.rhs = dev.g[r];
            for (int l = 0; l < dev.input_dim; ++l) {
              if (dev.Gu(r, l) != 0.0) row.slots.emplace_back(ix.hub[t][io + l], dev.Gu(r, l));
            }
            sys.rows.push_back(std::move(row));
          }
        }
      }
      if (t == T) break;
      // x_{t+1} = A x_t + B u_t + C xi_t, device by device.
      Mat A = Mat::Zero(hub.state_dim(), hub.state_dim());
      for (std::size_t k = 0; k < hub.devices.size(); ++k) {
        const Device& dev = hub.devices[k];
        if (dev.state_dim == 0) continue;
        const int so = hub.state_offset(k);
        A.block(so, so, dev.state_dim, dev.state_dim) = dev.A;
      }
      if (hub.state_dim() > 0) {
        x.advance(A);
        for (std::size_t k = 0; k < hub.devices.size(); ++k) {
          const Device& dev = hub.devices[k];
          if (dev.state_dim == 0) continue;
          const int so = hub.state_offset(k);
          const int io = hub.input_offset(k);
          for (int l = 0; l < dev.input_dim; ++l) {
            x.s.block(so, ix.hub[t][io + l], dev.state_dim, 1) += dev.B.col(l);
          }
          for (int i = 0; i < d; ++i) {
            const Vec ci = dev.C.col(i);
            if (ci.isZero(0.0)) continue;
            const int r = i * T + t;
            x.c.segment(so, dev.state_dim) += ci * map.offset[r];
            for (int j = i * T; j <= r; ++j) x.g.block(so, j, dev.state_dim, 1) += ci * map.H(r, j);
          }
        }
      }
    }
  }

  // Buildings.
  for (int b = 0; b < nbld; ++b) {
    const Building& bl = district.buildings[b];
    const int n = bl.state_dim();
    const Mat Bx = linearize_building(bl, state.buildings[b]);
    detail::StateStack x(state.buildings[b], S, J);
    for (int t = 0; t <= T; ++t) {
      for (int r = 0; r < bl.h.size(); ++r) {
        const bool has_u = !bl.Fu.row(r).isZero(0.0);
        const bool has_v = bl.Fv.cols() > 0 && !bl.Fv.row(r).isZero(0.0);
        const bool has_xi = bl.Fxi.cols() > 0 && !bl.Fxi.row(r).isZero(0.0);
        const bool pure_state = !has_u && !has_v && !has_xi;
        if (pure_state ? t == 0 : t == T) continue;
        SystemRow row;
        row.tag = "building_op";
        row.sense = Sense::LE;
        row.rhs = bl.h[r];
        detail::add_state(row, bl.Fx.row(r), x);
        for (int k = 0; k < bl.input_dim(); ++k) {
          if (bl.Fu(r, k) != 0.0) row.slots.emplace_back(ix.bu[b][t][k], bl.Fu(r, k));
        }
        for (int l = 0; l < bl.blind_dim(); ++l) {
          if (bl.Fv(r, l) != 0.0) row.slots.emplace_back(ix.bv[b][t][l], bl.Fv(r, l));
        }
        if (has_xi) detail::add_disturbance(row, bl.Fxi.row(r), map, t);
        sys.rows.push_back(std::move(row));
      }
      if (t > 0) {
        // Soft comfort band on x_t at its hour of day, slack of step t-1.
        const int hour = (h0 + t) % kHoursPerDay;
        const double lb = bl.comfort.lb[hour];
        const double ub = bl.comfort.ub[hour];
        for (int r = 0; r < bl.rooms; ++r) {
          Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(n);
          f[bl.room_states[r]] = 1.0;
          const int s = ix.bs[b][t - 1][r];
          if (std::isfinite(lb)) {
            SystemRow row;
            row.tag = "comfort_lb";
            row.rhs = -(lb + spec.comfort_tightening);
            detail::add_state(row, -f, x);
            row.slots.emplace_back(s, -1.0);
            sys.rows.push_back(std::move(row));
          }
          if (std::isfinite(ub)) {
            SystemRow row;
            row.tag = "comfort_ub";
            row.rhs = ub - spec.comfort_tightening;
            detail::add_state(row, f, x);
            row.slots.emplace_back(s, -1.0);
            sys.rows.push_back(std::move(row));
          }
        }
      }
      if (t == T) break;
      // x_{t+1} = A x_t + B(x_hat) u_t + (D + sum_l v_l C_l) xi_t.
      x.advance(bl.A);
      for (int k = 0; k < bl.input_dim(); ++k) x.s.col(ix.bu[b][t][k]) += Bx.col(k);
      for (int i = 0; i < d; ++i) {
        const int r = i * T + t;
        const Vec di = bl.D.col(i);
        if (!di.isZero(0.0)) {
          x.c += di * map.offset[r];
          for (int j = i * T; j <= r; ++j) {
            if (map.H(r, j) != 0.0) x.g.col(j) += di * map.H(r, j);
          }
        }
        for (int l = 0; l < bl.blind_dim(); ++l) {
          const Vec cl = bl.C[l].col(i);
          if (cl.isZero(0.0)) continue;
          const int v = ix.bv[b][t][l];
          x.s.col(v) += cl * map.offset[r];
          Mat& gv = x.gv_for(v, n, J);
          for (int j = i * T; j <= r; ++j) {
            if (map.H(r, j) != 0.0) gv.col(j) += cl * map.H(r, j);
          }
        }
      }
    }
  }

  // Balance nodes with building demands routed through the coupling map.
  for (int t = 0; t < T; ++t) {
    for (const auto& node : hub.nodes) {
      SystemRow row;
      row.tag = "balance";
      row.sense = Sense::EQ;
      row.rhs = 0.0;
      if (node.Hp.size() > 0 && node.Hp[0] != 0.0) row.slots.emplace_back(ix.p[t], node.Hp[0]);
      for (int k = 0; k < node.Hu.size(); ++k) {
        if (node.Hu[k] != 0.0) row.slots.emplace_back(ix.hub[t][k], node.Hu[k]);
      }
      for (int b = 0; b < nbld; ++b) {
        const Building& bl = district.buildings[b];
        for (int k = 0; k < bl.input_dim(); ++k) {
          const double hd = node.Hd[static_cast<int>(bl.input_stream[k])];
          if (hd != 0.0) row.slots.emplace_back(ix.bu[b][t][k], hd);
        }
      }
      sys.rows.push_back(std::move(row));
    }
    SystemRow grid;
    grid.tag = "grid_nonneg";
    grid.slots.emplace_back(ix.p[t], -1.0);
    sys.rows.push_back(std::move(grid));
    for (int b = 0; b < nbld; ++b) {
      for (int s : ix.bs[b][t]) {
        SystemRow row;
        row.tag = "slack_nonneg";
        row.slots.emplace_back(s, -1.0);
        sys.rows.push_back(std::move(row));
      }
    }
  }

  sys.objective.tag = "objective";
  for (int t = 0; t < T; ++t) {
    sys.objective.slots.emplace_back(ix.p[t], district.tariff[(h0 + t) % kHoursPerDay]);
    for (int b = 0; b < nbld; ++b) {
      for (int s : ix.bs[b][t]) sys.objective.slots.emplace_back(s, spec.gamma);
    }
  }
  return sys;
}

// Policies ------------------------------------------------------------------

/// Column layout of the affine policies: u0 per slot and, for ADR, one gain
/// column per adaptive slot and strictly earlier residual coordinate.
struct PolicyColumns {
  std::vector<int> u0;                                  // per slot
  std::vector<std::vector<std::pair<int, int>>> gain;   // per slot: (coordinate j, column)
  int horizon = 0;

  /// Gain column of `slot` on coordinate j, or -1 if that gain is held at zero.
  /// Throws CausalityError if j is not strictly earlier than the slot's step.
  int gain_column(const StackedSystem& sys, int slot, int j) const {
    const int step_j = j % sys.horizon;
    if (!sys.slots[slot].adaptive || step_j >= sys.slots[slot].step) {
      throw CausalityError("policy for '" + sys.slots[slot].name +
                           "' cannot depend on residual coordinate " + std::to_string(j));
    }
    for (const auto& [jj, c] : gain[slot]) {
      if (jj == j) return c;
    }
    return -1;
  }
};

/// Creates u0 columns (and gains for ADR on coordinates in `active`) and
/// rewrites each slot-space row as an AffineRow over LP columns.
inline PolicyColumns make_policy_columns(LinearProgram& lp, const StackedSystem& sys,
                                         Policy mode, const std::vector<bool>& active) {
  PolicyColumns pc;
  pc.horizon = sys.horizon;
  const int S = static_cast<int>(sys.slots.size());
  pc.u0.resize(S);
  pc.gain.resize(S);
  for (int s = 0; s < S; ++s) {
    const Slot& sl = sys.slots[s];
    pc.u0[s] = lp.add_col("u0_" + sl.name, sl.lower, sl.upper);
  }
  if (mode != Policy::ADR) return pc;
  for (int s = 0; s < S; ++s) {
    const Slot& sl = sys.slots[s];
    if (!sl.adaptive) continue;
    for (int i = 0; i < sys.disturbances; ++i) {
      for (int t = 0; t < sl.step && t < sys.horizon; ++t) {
        const int j = i * sys.horizon + t;
        if (!active[j]) continue;
        pc.gain[s].emplace_back(j, lp.add_col("U_" + sl.name + "_w" + std::to_string(j)));
      }
    }
  }
  return pc;
}

/// Substitutes the policies into a slot-space row.
inline AffineRow parametrize(const SystemRow& row, const StackedSystem& sys,
                             const PolicyColumns& pc) {
  AffineRow out;
  out.a0.constant = row.c0;
  std::vector<LinExpr> grad(sys.coordinates());
  std::vector<char> used(sys.coordinates(), 0);
  for (const auto& [s, coef] : row.slots) {
    out.a0.add(pc.u0[s], coef);
    for (const auto& [j, col] : pc.gain[s]) {
      grad[j].add(col, coef);
      used[j] = 1;
    }
  }
  for (const auto& [j, coef] : row.wconst) {
    grad[j].constant += coef;
    used[j] = 1;
  }
  for (const auto& [j, s, coef] : row.wslot) {
    if (sys.slots[s].adaptive) {
      throw CausalityError("residual coefficient depends on adaptive decision '" +
                           sys.slots[s].name + "'");
    }
    grad[j].add(pc.u0[s], coef);
    used[j] = 1;
  }
  for (int j = 0; j < sys.coordinates(); ++j) {
    if (used[j]) out.grad.emplace_back(j, std::move(grad[j]));
  }
  return out;
}

// Compiled problem ------------------------------------------------------------

/// First-step decisions of a solved horizon problem.
struct ControlAction {
  double grid = 0.0;
  Vec hub;
  std::vector<Vec> building_inputs;
  std::vector<Vec> blinds;
};

struct CompiledRobustLP {
  LinearProgram lp;
  PolicySpec spec;
  StackedSystem system;
  PolicyColumns policy;
  Vec center;      // residual box center m; LP coordinates are w~ = w - m
  Vec radius;      // residual box half-widths (zero for CEP)
  Vec mu_center;   // mean box center, in w~ coordinates
  Vec mu_radius;
  int tau = -1;
  std::size_t auxiliaries = 0;

  /// Value of a slot under the solved policy for residuals w (not recentered).
  double slot_value(const std::vector<double>& x, int slot, const Vec& w) const {
    double v = x[policy.u0[slot]];
    for (const auto& [j, col] : policy.gain[slot]) v += x[col] * (w[j] - center[j]);
    return v;
  }

  /// Largest violation of the slot-space rows at residuals w (not recentered).
  double max_row_violation(const std::vector<double>& x, const Vec& w) const {
    std::vector<double> val(system.slots.size());
    for (std::size_t s = 0; s < system.slots.size(); ++s) {
      val[s] = slot_value(x, static_cast<int>(s), w);
    }
    double worst = 0.0;
    for (const auto& row : system.rows) {
      double lhs = row.c0;
      for (const auto& [s, c] : row.slots) lhs += c * val[s];
      for (const auto& [j, c] : row.wconst) lhs += c * (w[j] - center[j]);
      for (const auto& [j, s, c] : row.wslot) lhs += c * val[s] * (w[j] - center[j]);
      const double viol = row.sense == Sense::EQ ? std::abs(lhs - row.rhs) : lhs - row.rhs;
      worst = std::max(worst, viol);
    }
    return worst;
  }

  /// Stage cost of the plan at residuals w (not recentered).
  double plan_cost(const std::vector<double>& x, const Vec& w) const {
    double v = 0.0;
    for (const auto& [s, c] : system.objective.slots) v += c * slot_value(x, s, w);
    return v;
  }

  ControlAction first_step(const std::vector<double>& x) const {
    const auto& ix = system.index;
    ControlAction a;
    a.grid = x[policy.u0[ix.p[0]]];
    a.hub.resize(static_cast<Eigen::Index>(ix.hub[0].size()));
    for (std::size_t k = 0; k < ix.hub[0].size(); ++k) a.hub[k] = x[policy.u0[ix.hub[0][k]]];
    for (std::size_t b = 0; b < ix.bu.size(); ++b) {
      Vec u(static_cast<Eigen::Index>(ix.bu[b][0].size()));
      for (std::size_t k = 0; k < ix.bu[b][0].size(); ++k) u[k] = x[policy.u0[ix.bu[b][0][k]]];
      Vec v(static_cast<Eigen::Index>(ix.bv[b][0].size()));
      for (std::size_t k = 0; k < ix.bv[b][0].size(); ++k) v[k] = x[policy.u0[ix.bv[b][0][k]]];
      a.building_inputs.push_back(std::move(u));
      a.blinds.push_back(std::move(v));
    }
    return a;
  }
};

/// Adds the epigraph row  worst-case expected stage cost <= tau  over the mean
/// box (center, radius in w~ coordinates) and returns the tau column, which is
/// the only column with an objective coefficient.
inline int epigraph_objective(LinearProgram& lp, AuxPool& pool, const StackedSystem& sys,
                              const PolicyColumns& pc, const Vec& mu_center,
                              const Vec& mu_radius) {
  const int tau = lp.add_col("tau", -kInf, kInf, 1.0);
  AffineRow row = parametrize(sys.objective, sys, pc);
  row.a0.add(tau, -1.0);
  robustify(lp, pool, std::move(row), Sense::LE, 0.0, mu_center, mu_radius, "epigraph");
  return tau;
}

/// Full pipeline: recenter, stack, parametrize, robustify, epigraph.
/// `box` and `mu_box` are over the residual coordinates of `map`; CEP uses the
/// center of `box` as a point for both.
inline CompiledRobustLP compile(const DistrictModel& district, const PolicySpec& spec,
                                const UncertaintyBox& box, const UncertaintyBox& mu_box,
                                const StackedDisturbanceMap& map, const PlantState& state,
                                int start_hour) {
  spec.validate();
  const int J = spec.horizon * district.disturbance_dim();
  if (box.size() != J || mu_box.size() != J || map.H.rows() != J) {
    throw DimensionError("compile: box, mean box and map must cover T*|D| coordinates");
  }
  CompiledRobustLP out;
  out.spec = spec;
  out.center = box.center();
  if (spec.mode == Policy::CEP) {
    out.radius = Vec::Zero(J);
    out.mu_center = Vec::Zero(J);
    out.mu_radius = Vec::Zero(J);
  } else {
    out.radius = box.halfwidth();
    out.mu_center = mu_box.center() - out.center;
    out.mu_radius = mu_box.halfwidth();
  }
  const StackedDisturbanceMap centered = recenter(map, out.center);
  out.system = stack_system(district, centered, state, start_hour, spec);

  std::vector<bool> active(J);
  for (int j = 0; j < J; ++j) {
    active[j] = out.radius[j] > 0.0 || out.mu_radius[j] > 0.0 || out.mu_center[j] != 0.0;
  }
  out.policy = make_policy_columns(out.lp, out.system, spec.mode, active);
  AuxPool pool;
  const Vec zero = Vec::Zero(J);
  for (const auto& row : out.system.rows) {
    robustify(out.lp, pool, parametrize(row, out.system, out.policy), row.sense, row.rhs, zero,
              out.radius, row.tag);
  }
  out.tau = epigraph_objective(out.lp, pool, out.system, out.policy, out.mu_center,
                               out.mu_radius);
  out.auxiliaries = pool.size();
  return out;
}

} // namespace drbem
