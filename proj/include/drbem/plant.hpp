#pragma once

// Energy hub devices, balance nodes, synthetic RC buildings and schedules.
//
// Units: temperatures in degC, powers in kW, one step = one hour, so a power
// held for a step is also an energy in kWh.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include "json.hpp"

#include "drbem/dist_model.hpp"
#include "drbem/error.hpp"

namespace drbem {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Hub streams a building actuator draws from.
enum class Stream { Electricity = 0, Heat = 1, Cool = 2 };
inline constexpr int kStreams = 3;

// Schedules -----------------------------------------------------------------

/// Hourly schedule indexed by hour of day 0..23 (entry h covers [h:00, h+1:00)).
using Schedule = HourArray;

struct ComfortSchedule {
  Schedule lb{};
  Schedule ub{};
};

inline Schedule tariff_schedule(double day = 0.145, double night = 0.097) {
  Schedule c{};
  for (int h = 0; h < kHoursPerDay; ++h) c[h] = (h >= 5 && h < 23) ? day : night;
  return c;
}

namespace detail {
inline ComfortSchedule banded(const std::vector<std::pair<int, int>>& tight, double lo,
                              double hi) {
  ComfortSchedule s;
  s.lb.fill(15.0);
  s.ub.fill(30.0);
  for (auto [from, to] : tight) {
    for (int h = from; h < to; ++h) {
      s.lb[h] = lo;
      s.ub[h] = hi;
    }
  }
  return s;
}
} // namespace detail

inline ComfortSchedule winter_comfort() { return detail::banded({{5, 23}}, 21.0, 25.0); }
inline ComfortSchedule summer_comfort() { return detail::banded({{5, 23}}, 20.0, 23.0); }
/// Office use: tight band 09-19.
inline ComfortSchedule commercial_comfort() { return detail::banded({{9, 19}}, 21.0, 25.0); }
/// Residential use: tight bands 06-09 and 19-23.
inline ComfortSchedule residential_comfort() {
  return detail::banded({{6, 9}, {19, 23}}, 21.0, 25.0);
}

inline ComfortSchedule comfort_by_name(const std::string& name) {
  if (name == "winter") return winter_comfort();
  if (name == "summer") return summer_comfort();
  if (name == "commercial" || name == "com") return commercial_comfort();
  if (name == "residential" || name == "res") return residential_comfort();
  throw SpecError("unknown comfort schedule '" + name + "'");
}

// Devices -------------------------------------------------------------------

/// Hub device: x+ = A x + B u + C xi, rows Fx x + Fu u + Fxi xi <= h, and
/// equality rows Gu u = g. Pure converters have state_dim = 0.
struct Device {
  std::string id;
  int state_dim = 0;
  int input_dim = 0;
  Mat A, B, C;
  Mat Fx, Fu, Fxi;
  Vec h;
  Mat Gu;
  Vec g;
  Vec x0;
  double scale = 1.0;
  std::vector<std::string> input_names;

  int rows() const { return static_cast<int>(h.size()); }
};

struct BalanceNode {
  std::string id;
  Vec Hp; // over grid streams
  Vec Hu; // over concatenated hub device inputs
  Vec Hd; // over demand streams (electricity, heat, cool)
};

struct Hub {
  std::vector<Device> devices;
  std::vector<BalanceNode> nodes;
  int grid_streams = 1;

  int input_dim() const {
    int n = 0;
    for (const auto& d : devices) n += d.input_dim;
    return n;
  }
  int state_dim() const {
    int n = 0;
    for (const auto& d : devices) n += d.state_dim;
    return n;
  }
  /// Offset of device k's inputs in the concatenated hub input vector.
  int input_offset(std::size_t k) const {
    int n = 0;
    for (std::size_t j = 0; j < k; ++j) n += devices[j].input_dim;
    return n;
  }
  int state_offset(std::size_t k) const {
    int n = 0;
    for (std::size_t j = 0; j < k; ++j) n += devices[j].state_dim;
    return n;
  }
  const Device& device(const std::string& id) const {
    for (const auto& d : devices) {
      if (d.id == id) return d;
    }
    throw SpecError("hub has no device '" + id + "'");
  }
  int input_index(const std::string& device_id, int local) const {
    for (std::size_t k = 0; k < devices.size(); ++k) {
      if (devices[k].id == device_id) return input_offset(k) + local;
    }
    throw SpecError("hub has no device '" + device_id + "'");
  }
};

namespace detail {

inline int find_disturbance(const std::vector<std::string>& ids, const std::string& id) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return static_cast<int>(i);
  }
  return -1;
}

/// Converter with input/output flows [in, out], out = cop * in, 0 <= out <= cap.
inline Device converter(const std::string& id, double cop, double cap, int nd) {
  Device d;
  d.id = id;
  d.input_dim = 2;
  d.input_names = {id + "_in", id + "_out"};
  d.A = Mat::Zero(0, 0);
  d.B = Mat::Zero(0, 2);
  d.C = Mat::Zero(0, nd);
  d.x0 = Vec::Zero(0);
  d.Fx = Mat::Zero(3, 0);
  d.Fu = Mat::Zero(3, 2);
  d.Fxi = Mat::Zero(3, nd);
  d.h = Vec::Zero(3);
  d.Fu(0, 0) = -1.0; // in >= 0
  d.Fu(1, 1) = -1.0; // out >= 0
  d.Fu(2, 1) = 1.0;  // out <= cap
  d.h(2) = cap;
  d.Gu = Mat::Zero(1, 2);
  d.Gu(0, 0) = -cop;
  d.Gu(0, 1) = 1.0;
  d.g = Vec::Zero(1);
  return d;
}

} // namespace detail

/// Chiller, boiler, heat pump, PV array and battery sized for n_buildings, with
/// electricity / heat / cool balance nodes and a single purchased grid stream.
/// PV needs the AT and SRS disturbances.
inline Hub make_hub(int n_buildings, const std::vector<std::string>& disturbances) {
  if (n_buildings < 1) throw SpecError("make_hub: at least one building is required");
  const int nd = static_cast<int>(disturbances.size());
  const double n = n_buildings;
  Hub hub;

  hub.devices.push_back(detail::converter("chiller", 0.7, 20.0 * n, nd));
  hub.devices.push_back(detail::converter("boiler", 0.9, 25.0 * n, nd));
  hub.devices.push_back(detail::converter("heat_pump", 3.0, 5.0 * n, nd));

  {
    Device pv;
    pv.id = "pv";
    pv.input_dim = 1;
    pv.input_names = {"pv_out"};
    pv.A = Mat::Zero(0, 0);
    pv.B = Mat::Zero(0, 1);
    pv.C = Mat::Zero(0, nd);
    pv.x0 = Vec::Zero(0);
    // Only the availability cap: with Gaussian solar tails the worst-case
    // availability can be negative, and out >= 0 would then make every robust
    // plan infeasible. The plant clips PV output to [0, availability].
    pv.Fx = Mat::Zero(1, 0);
    pv.Fu = Mat::Ones(1, 1);
    pv.Fxi = Mat::Zero(1, nd);
    pv.h = Vec::Zero(1);
    const int at = detail::find_disturbance(disturbances, "AT");
    const int srs = detail::find_disturbance(disturbances, "SRS");
    if (at < 0 || srs < 0) throw SpecError("make_hub: PV needs AT and SRS disturbances");
    pv.h(0) = 0.1280 * n;
    pv.Fxi(0, at) = 0.0019 * n;
    pv.Fxi(0, srs) = -3.7 * n;
    pv.Gu = Mat::Zero(0, 1);
    pv.g = Vec::Zero(0);
    pv.scale = n;
    hub.devices.push_back(std::move(pv));
  }

  {
    Device b;
    b.id = "battery";
    b.state_dim = 2;
    b.input_dim = 2;
    b.input_names = {"battery_in", "battery_out"};
    b.A.resize(2, 2);
    b.A << 0.51, 0.22, 0.47, 0.78;
    b.B.resize(2, 2);
    b.B << 0.61, -0.83, 0.25, -0.39;
    b.C = Mat::Zero(2, nd);
    b.x0 = Vec::Constant(2, 1.0 * n);
    // Rows over [x1 x2 | in out] <= h.
    const int rows = 11;
    b.Fx = Mat::Zero(rows, 2);
    b.Fu = Mat::Zero(rows, 2);
    b.Fxi = Mat::Zero(rows, nd);
    b.h = Vec::Zero(rows);
    int r = 0;
    b.Fu(r, 0) = -1.0; ++r;                                    // in >= 0
    b.Fu(r, 0) = 1.0; b.h(r) = 8.0 * n; ++r;                   // in <= 8
    b.Fu(r, 1) = -1.0; ++r;                                    // out >= 0
    b.Fu(r, 1) = 1.0; b.h(r) = 8.0 * n; ++r;                   // out <= 8
    b.Fx(r, 0) = -1.0; b.Fx(r, 1) = -1.0; b.h(r) = -1.0 * n; ++r; // x1 + x2 >= 1
    b.Fx(r, 0) = 1.0; b.Fx(r, 1) = 1.0; b.h(r) = 5.0 * n; ++r;    // x1 + x2 <= 5
    b.Fx(r, 0) = -1.0; ++r;                                    // x1 >= 0
    b.Fx(r, 1) = -1.0; ++r;                                    // x2 >= 0
    b.Fx(r, 0) = -0.62; b.Fx(r, 1) = -0.27; b.Fu(r, 1) = 1.0; ++r; // out <= 0.62 x1 + 0.27 x2
    b.Fx(r, 0) = 0.84; b.Fx(r, 1) = 0.37; b.Fu(r, 0) = 1.0; b.h(r) = 2.58 * n; ++r;
    b.Fx(r, 0) = 0.73; b.Fx(r, 1) = 0.73; b.Fu(r, 0) = 1.0; b.h(r) = 3.66 * n; ++r;
    b.Gu = Mat::Zero(0, 2);
    b.g = Vec::Zero(0);
    b.scale = n;
    hub.devices.push_back(std::move(b));
  }
  for (auto& d : hub.devices) d.scale = n;

  const int nu = hub.input_dim();
  auto idx = [&](const std::string& dev, int local) { return hub.input_index(dev, local); };
  BalanceNode elec{"electricity", Vec::Ones(1), Vec::Zero(nu), Vec::Zero(kStreams)};
  elec.Hu[idx("pv", 0)] = 1.0;
  elec.Hu[idx("battery", 1)] = 1.0;
  elec.Hu[idx("heat_pump", 0)] = -1.0;
  elec.Hu[idx("chiller", 0)] = -1.0;
  elec.Hu[idx("boiler", 0)] = -1.0;
  elec.Hu[idx("battery", 0)] = -1.0;
  elec.Hd[static_cast<int>(Stream::Electricity)] = -1.0;
  BalanceNode heat{"heat", Vec::Zero(1), Vec::Zero(nu), Vec::Zero(kStreams)};
  heat.Hu[idx("heat_pump", 1)] = 1.0;
  heat.Hu[idx("boiler", 1)] = 1.0;
  heat.Hd[static_cast<int>(Stream::Heat)] = -1.0;
  BalanceNode cool{"cool", Vec::Zero(1), Vec::Zero(nu), Vec::Zero(kStreams)};
  cool.Hu[idx("chiller", 1)] = 1.0;
  cool.Hd[static_cast<int>(Stream::Cool)] = -1.0;
  hub.nodes = {elec, heat, cool};
  return hub;
}

/// Upper PV bound for a disturbance vector (same linear form for prediction and truth).
inline double pv_bound(const Hub& hub, const Vec& xi) {
  const Device& pv = hub.device("pv");
  return pv.h(0) - pv.Fxi.row(0).dot(xi);
}

/// One step of the hub device dynamics for concatenated inputs.
inline Vec hub_step(const Hub& hub, const Vec& x, const Vec& u, const Vec& xi) {
  Vec next(hub.state_dim());
  for (std::size_t k = 0; k < hub.devices.size(); ++k) {
    const Device& d = hub.devices[k];
    if (d.state_dim == 0) continue;
    const int so = hub.state_offset(k);
    const int io = hub.input_offset(k);
    next.segment(so, d.state_dim) = d.A * x.segment(so, d.state_dim) +
                                    d.B * u.segment(io, d.input_dim) + d.C * xi;
  }
  return next;
}

inline Vec hub_initial_state(const Hub& hub) {
  Vec x(hub.state_dim());
  for (std::size_t k = 0; k < hub.devices.size(); ++k) {
    const Device& d = hub.devices[k];
    if (d.state_dim > 0) x.segment(hub.state_offset(k), d.state_dim) = d.x0;
  }
  return x;
}

// Buildings -----------------------------------------------------------------

enum class Actuator { Radiator, AHU, TABS, Blinds };

inline std::string to_string(Actuator a) {
  switch (a) {
  case Actuator::Radiator: return "radiator";
  case Actuator::AHU: return "ahu";
  case Actuator::TABS: return "tabs";
  case Actuator::Blinds: return "blinds";
  }
  return "?";
}

inline Actuator actuator_from_string(const std::string& s) {
  if (s == "radiator") return Actuator::Radiator;
  if (s == "ahu" || s == "AHU") return Actuator::AHU;
  if (s == "tabs" || s == "TABS") return Actuator::TABS;
  if (s == "blinds") return Actuator::Blinds;
  throw SpecError("unknown actuator '" + s + "'");
}

/// Bilinear building x+ = A x + (B + sum_k x_k E_k) u + (D + sum_l v_l C_l) xi
/// with operational rows Fx x + Fu u + Fv v + Fxi xi <= h and blinds v in [0,1].
struct Building {
  std::string id;
  int rooms = 0;
  Mat A, B, D;
  std::vector<Mat> E; // one n x m matrix per state
  std::vector<Mat> C; // one n x nd matrix per blinds input
  Mat Fx, Fu, Fv, Fxi;
  Vec h;
  ComfortSchedule comfort;
  Vec x0;
  std::vector<int> room_states;
  std::vector<std::string> input_names;
  std::vector<Stream> input_stream;
  std::vector<std::string> blind_names;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  int blind_dim() const { return static_cast<int>(C.size()); }
  int disturbance_dim() const { return static_cast<int>(D.cols()); }

  /// 0/1 map from inputs to hub demand streams.
  Mat coupling() const {
    Mat eta = Mat::Zero(kStreams, input_dim());
    for (int j = 0; j < input_dim(); ++j) eta(static_cast<int>(input_stream[j]), j) = 1.0;
    return eta;
  }
};

struct BuildingSpec {
  std::string id = "building";
  int rooms = 1;
  std::string mass = "heavy";
  double window_fraction = 0.3;
  double floor_area = 420.0;
  std::vector<Actuator> actuators{Actuator::AHU, Actuator::Blinds, Actuator::Radiator};
  ComfortSchedule comfort = winter_comfort();
  double initial_room = 21.0;
  double initial_wall = 20.0;
};

/// RC parameters of an 84 m2 reference zone; everything scales with zone area.
/// Heavy mass gives a slow mode near 11.7 days and a fast mode near 4.5 hours.
struct ZoneParameters {
  double c_room = 1.35;      // kWh/K
  double c_wall_heavy = 11.8; // kWh/K
  double c_wall_light = 3.0;  // kWh/K
  double u_room_ambient = 0.046; // kW/K
  double u_room_wall = 0.25;     // kW/K
  double u_wall_ambient = 0.003; // kW/K
  double facade_per_floor = 0.3;
  double solar_transmittance = 0.5;
  double radiator_cap = 0.025; // kW per m2 floor
  double ahu_cap = 0.01;       // kW electric per m2 floor
  double tabs_cap = 0.02;      // kW per m2 floor
  double ahu_supply = 35.0;    // degC
  double ahu_gain = 1.0 / 15.0; // kW heat per kW electric per K
  double reference_area = 84.0;
};

/// Zero-order-hold discretization of dx/dt = Ac x + Mc (inputs held for `dt`):
/// returns Ad and the input integral Gamma = int_0^dt exp(Ac s) ds.
inline std::pair<Mat, Mat> zoh(const Mat& Ac, double dt = 1.0) {
  const int n = static_cast<int>(Ac.rows());
  Mat aug = Mat::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = Ac * dt;
  aug.topRightCorner(n, n) = Mat::Identity(n, n) * dt;
  const Mat ex = aug.exp();
  return {ex.topLeftCorner(n, n), ex.topRightCorner(n, n)};
}

/// Synthetic RC building: one air node and one wall/slab node per room.
/// Inputs per room, in order: radiator, AHU, TABS heating, TABS cooling (those
/// present). Radiator and AHU heat the air node; TABS acts on the slab node.
inline Building make_building(const BuildingSpec& spec,
                              const std::vector<std::string>& disturbances,
                              const ZoneParameters& zp = {}) {
  if (spec.rooms < 1 || spec.rooms > 5) throw SpecError("make_building: 1-5 rooms supported");
  if (spec.mass != "heavy" && spec.mass != "light") {
    throw SpecError("make_building: mass class must be heavy or light");
  }
  if (spec.actuators.empty()) throw SpecError("make_building: empty actuator set");
  for (int h = 0; h < kHoursPerDay; ++h) {
    if (spec.comfort.lb[h] > spec.comfort.ub[h]) {
      throw SpecError("make_building: comfort lower bound exceeds upper bound");
    }
  }
  auto has = [&](Actuator a) {
    return std::find(spec.actuators.begin(), spec.actuators.end(), a) != spec.actuators.end();
  };
  const bool radiator = has(Actuator::Radiator);
  const bool ahu = has(Actuator::AHU);
  const bool tabs = has(Actuator::TABS);
  const bool blinds = has(Actuator::Blinds);

  const int nd = static_cast<int>(disturbances.size());
  const int at = detail::find_disturbance(disturbances, "AT");
  if (at < 0) throw SpecError("make_building: AT disturbance is required");
  const int gt = detail::find_disturbance(disturbances, "GT");
  const int ig = detail::find_disturbance(disturbances, "IG");
  const int srs = detail::find_disturbance(disturbances, "SRS");
  static const std::array<const char*, 5> orientation{"SRS", "SRE", "SRW", "SRN", "SRS"};

  const int rooms = spec.rooms;
  const int n = 2 * rooms;
  const int per_room = (radiator ? 1 : 0) + (ahu ? 1 : 0) + (tabs ? 2 : 0);
  const int m = per_room * rooms;
  const double zone_area = spec.floor_area / rooms;
  const double s = zone_area / zp.reference_area;
  const double c_room = zp.c_room * s;
  const double c_wall = (spec.mass == "heavy" ? zp.c_wall_heavy : zp.c_wall_light) * s;
  const double u_ra = zp.u_room_ambient * s;
  const double u_rw = zp.u_room_wall * s;
  const double u_wa = zp.u_wall_ambient * s;
  const double window = spec.window_fraction * zp.facade_per_floor * zone_area *
                        zp.solar_transmittance;

  Mat Ac = Mat::Zero(n, n);
  Mat Bc = Mat::Zero(n, m);
  Mat Dc = Mat::Zero(n, nd);
  std::vector<Mat> Ec(n, Mat::Zero(n, m));
  std::vector<Mat> Cc;

  Building b;
  b.id = spec.id;
  b.rooms = rooms;
  b.comfort = spec.comfort;
  b.x0 = Vec::Zero(n);
  std::vector<double> caps;
  for (int r = 0; r < rooms; ++r) {
    const int air = r;
    const int wall = rooms + r;
    b.room_states.push_back(air);
    b.x0[air] = spec.initial_room;
    b.x0[wall] = spec.initial_wall;
    Ac(air, air) = -(u_ra + u_rw) / c_room;
    Ac(air, wall) = u_rw / c_room;
    Ac(wall, wall) = -(u_rw + u_wa) / c_wall;
    Ac(wall, air) = u_rw / c_wall;
    Dc(air, at) += u_ra / c_room;
    if (gt >= 0) {
      Dc(wall, gt) += u_wa / c_wall;
    } else {
      Dc(wall, at) += u_wa / c_wall;
    }
    if (ig >= 0) Dc(air, ig) += (1.0 / rooms) / c_room;
    int sol = detail::find_disturbance(disturbances, orientation[r % orientation.size()]);
    if (sol < 0) sol = srs;
    if (sol >= 0) {
      Dc(air, sol) += window / c_room;
      if (blinds) {
        Mat Cl = Mat::Zero(n, nd);
        Cl(air, sol) = -window / c_room;
        Cc.push_back(std::move(Cl));
        b.blind_names.push_back("blinds_r" + std::to_string(r));
      }
    }
    int col = r * per_room;
    const std::string tag = "_r" + std::to_string(r);
    if (radiator) {
      Bc(air, col) = 1.0 / c_room;
      b.input_names.push_back("radiator" + tag);
      b.input_stream.push_back(Stream::Heat);
      caps.push_back(zp.radiator_cap * zone_area);
      ++col;
    }
    if (ahu) {
      Bc(air, col) = zp.ahu_gain * zp.ahu_supply / c_room;
      Ec[air](air, col) = -zp.ahu_gain / c_room;
      b.input_names.push_back("ahu" + tag);
      b.input_stream.push_back(Stream::Electricity);
      caps.push_back(zp.ahu_cap * zone_area);
      ++col;
    }
    if (tabs) {
      Bc(wall, col) = 1.0 / c_wall;
      b.input_names.push_back("tabs_heat" + tag);
      b.input_stream.push_back(Stream::Heat);
      caps.push_back(zp.tabs_cap * zone_area);
      ++col;
      Bc(wall, col) = -1.0 / c_wall;
      b.input_names.push_back("tabs_cool" + tag);
      b.input_stream.push_back(Stream::Cool);
      caps.push_back(zp.tabs_cap * zone_area);
      ++col;
    }
  }

  const auto [Ad, gamma] = zoh(Ac);
  b.A = Ad;
  b.B = gamma * Bc;
  b.D = gamma * Dc;
  b.E.resize(n);
  for (int k = 0; k < n; ++k) b.E[k] = gamma * Ec[k];
  for (const auto& Cl : Cc) b.C.push_back(gamma * Cl);

  const int nv = static_cast<int>(b.C.size());
  b.Fx = Mat::Zero(2 * m, n);
  b.Fu = Mat::Zero(2 * m, m);
  b.Fv = Mat::Zero(2 * m, nv);
  b.Fxi = Mat::Zero(2 * m, nd);
  b.h = Vec::Zero(2 * m);
  for (int j = 0; j < m; ++j) {
    b.Fu(2 * j, j) = -1.0;
    b.Fu(2 * j + 1, j) = 1.0;
    b.h(2 * j + 1) = caps[j];
  }
  return b;
}

/// Prediction input matrix B(x_hat) = B + sum_k x_hat_k E_k.
inline Mat linearize_building(const Building& b, const Vec& x_hat) {
  if (x_hat.size() != b.state_dim()) throw ShapeError("linearize_building: state size mismatch");
  if (!x_hat.allFinite()) throw DomainError("linearize_building: non-finite expansion point");
  Mat Bx = b.B;
  for (int k = 0; k < b.state_dim(); ++k) {
    if (x_hat[k] != 0.0) Bx += x_hat[k] * b.E[k];
  }
  return Bx;
}

/// Disturbance gain D + sum_l v_l C_l.
inline Mat disturbance_gain(const Building& b, const Vec& v) {
  if (v.size() != b.blind_dim()) throw ShapeError("disturbance_gain: blinds size mismatch");
  Mat G = b.D;
  for (int l = 0; l < b.blind_dim(); ++l) {
    if (v[l] != 0.0) G += v[l] * b.C[l];
  }
  return G;
}

/// Exact bilinear step.
inline Vec simulate_true_step(const Building& b, const Vec& x, const Vec& u, const Vec& v,
                              const Vec& xi) {
  if (x.size() != b.state_dim() || u.size() != b.input_dim() || v.size() != b.blind_dim() ||
      xi.size() != b.disturbance_dim()) {
    throw ShapeError("simulate_true_step: dimension mismatch");
  }
  return b.A * x + linearize_building(b, x) * u + disturbance_gain(b, v) * xi;
}

// District ------------------------------------------------------------------

struct DistrictModel {
  std::vector<std::string> disturbances;
  Hub hub;
  std::vector<Building> buildings;
  Schedule tariff = tariff_schedule();

  int disturbance_dim() const { return static_cast<int>(disturbances.size()); }

  void validate() const {
    for (double c : tariff) {
      if (!(c > 0.0)) throw SpecError("tariffs must be positive");
    }
    for (const auto& b : buildings) {
      if (b.disturbance_dim() != disturbance_dim()) {
        throw DimensionError("building '" + b.id + "' disturbance columns disagree");
      }
      if (static_cast<int>(b.input_stream.size()) != b.input_dim()) {
        throw SpecError("building '" + b.id + "' has unmapped inputs");
      }
    }
    for (const auto& node : hub.nodes) {
      if (node.Hp.isZero() && node.Hu.isZero() && node.Hd.isZero()) {
        throw SpecError("balance node '" + node.id + "' has no coefficients");
      }
    }
  }
};

inline DistrictModel make_district(const std::vector<BuildingSpec>& specs,
                                   const std::vector<std::string>& disturbances,
                                   const Schedule& tariff = tariff_schedule(),
                                   const ZoneParameters& zp = {}) {
  if (specs.empty()) throw SpecError("make_district: no buildings");
  DistrictModel d;
  d.disturbances = disturbances;
  d.hub = make_hub(static_cast<int>(specs.size()), disturbances);
  for (const auto& s : specs) d.buildings.push_back(make_building(s, disturbances, zp));
  d.tariff = tariff;
  d.validate();
  return d;
}

// JSON ----------------------------------------------------------------------

namespace detail {
inline Schedule schedule_from_json(const nlohmann::json& j, double null_value) {
  if (!j.is_array() || j.size() != kHoursPerDay) {
    throw SpecError("schedule must be an array of 24 entries");
  }
  Schedule s{};
  for (int h = 0; h < kHoursPerDay; ++h) {
    s[h] = j[h].is_null() ? null_value : j[h].get<double>();
  }
  return s;
}

inline nlohmann::json schedule_to_json(const Schedule& s) {
  nlohmann::json out = nlohmann::json::array();
  for (double v : s) {
    if (std::isfinite(v)) {
      out.push_back(v);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}
} // namespace detail

/// Comfort as a schedule name or {"lb": [24], "ub": [24]} with nulls for +-infinity.
inline ComfortSchedule comfort_from_json(const nlohmann::json& j) {
  if (j.is_string()) return comfort_by_name(j.get<std::string>());
  ComfortSchedule c;
  c.lb = detail::schedule_from_json(j.at("lb"), -kInf);
  c.ub = detail::schedule_from_json(j.at("ub"), kInf);
  return c;
}

inline nlohmann::json comfort_to_json(const ComfortSchedule& c) {
  return {{"lb", detail::schedule_to_json(c.lb)}, {"ub", detail::schedule_to_json(c.ub)}};
}

inline BuildingSpec building_spec_from_json(const nlohmann::json& j) {
  BuildingSpec s;
  s.id = j.value("id", s.id);
  s.rooms = j.value("rooms", s.rooms);
  s.mass = j.value("mass", s.mass);
  s.window_fraction = j.value("window_fraction", s.window_fraction);
  s.floor_area = j.value("floor_area", s.floor_area);
  if (j.contains("actuators")) {
    s.actuators.clear();
    for (const auto& a : j.at("actuators")) s.actuators.push_back(actuator_from_string(a));
  }
  if (j.contains("comfort")) s.comfort = comfort_from_json(j.at("comfort"));
  s.initial_room = j.value("initial_room", s.initial_room);
  s.initial_wall = j.value("initial_wall", s.initial_wall);
  return s;
}

inline nlohmann::json building_spec_to_json(const BuildingSpec& s) {
  nlohmann::json acts = nlohmann::json::array();
  for (auto a : s.actuators) acts.push_back(to_string(a));
  return {{"id", s.id},
          {"rooms", s.rooms},
          {"mass", s.mass},
          {"window_fraction", s.window_fraction},
          {"floor_area", s.floor_area},
          {"actuators", acts},
          {"comfort", comfort_to_json(s.comfort)},
          {"initial_room", s.initial_room},
          {"initial_wall", s.initial_wall}};
}

inline std::vector<std::string> default_disturbances() { return {"AT", "SRS", "IG"}; }

inline std::vector<std::string> full_disturbances() {
  return {"AT", "GT", "SRN", "SRE", "SRS", "SRW", "IG"};
}

struct DistrictConfig {
  std::vector<std::string> disturbances = default_disturbances();
  std::vector<BuildingSpec> buildings{BuildingSpec{}};
  Schedule tariff = tariff_schedule();

  DistrictModel build() const { return make_district(buildings, disturbances, tariff); }
};

inline DistrictConfig district_config_from_json(const nlohmann::json& j) {
  DistrictConfig c;
  if (j.contains("disturbances")) c.disturbances = j.at("disturbances").get<std::vector<std::string>>();
  if (j.contains("buildings")) {
    c.buildings.clear();
    for (const auto& b : j.at("buildings")) c.buildings.push_back(building_spec_from_json(b));
  }
  if (j.contains("tariff")) c.tariff = detail::schedule_from_json(j.at("tariff"), kInf);
  return c;
}

inline nlohmann::json district_config_to_json(const DistrictConfig& c) {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& s : c.buildings) b.push_back(building_spec_to_json(s));
  return {{"disturbances", c.disturbances},
          {"buildings", b},
          {"tariff", detail::schedule_to_json(c.tariff)}};
}

} // namespace drbem
