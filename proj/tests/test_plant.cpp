#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "drbem/plant.hpp"
#include "oracles.hpp"

using namespace drbem;

namespace {

const std::vector<std::string> kDist = default_disturbances(); // AT, SRS, IG

Vec hub_inputs(const Hub& hub, std::initializer_list<std::pair<const char*, double>> values) {
  Vec u = Vec::Zero(hub.input_dim());
  for (const auto& [name, v] : values) {
    bool found = false;
    for (std::size_t k = 0; k < hub.devices.size(); ++k) {
      const auto& names = hub.devices[k].input_names;
      for (std::size_t l = 0; l < names.size(); ++l) {
        if (names[l] == name) {
          u[hub.input_offset(k) + static_cast<int>(l)] = v;
          found = true;
        }
      }
    }
    EXPECT_TRUE(found) << name;
  }
  return u;
}

// x_i' = sum_j A_ij x_j + sum_j (B_ij + sum_k x_k E_k(i,j)) u_j
//        + sum_j (D_ij + sum_l v_l C_l(i,j)) xi_j, term by term.
Vec naive_step(const Building& b, const Vec& x, const Vec& u, const Vec& v, const Vec& xi) {
  const int n = b.state_dim();
  Vec out = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += b.A(i, j) * x[j];
    for (int j = 0; j < b.input_dim(); ++j) {
      double coef = b.B(i, j);
      for (int k = 0; k < n; ++k) coef += x[k] * b.E[k](i, j);
      acc += coef * u[j];
    }
    for (int j = 0; j < b.disturbance_dim(); ++j) {
      double coef = b.D(i, j);
      for (int l = 0; l < b.blind_dim(); ++l) coef += v[l] * b.C[l](i, j);
      acc += coef * xi[j];
    }
    out[i] = acc;
  }
  return out;
}

double peak_rise(const std::string& mass) {
  BuildingSpec spec;
  spec.mass = mass;
  spec.actuators = {Actuator::Radiator};
  const Building b = make_building(spec, kDist);
  Vec x = Vec::Constant(b.state_dim(), 20.0);
  Vec xi = Vec::Zero(3);
  xi[0] = 20.0;
  const Vec none(0);
  double peak = 0.0;
  for (int t = 0; t < 48; ++t) {
    Vec u = Vec::Zero(b.input_dim());
    if (t < 3) u[0] = 5.0;
    x = simulate_true_step(b, x, u, none, xi);
    peak = std::max(peak, x[0] - 20.0);
  }
  return peak;
}

} // namespace

TEST(Tariff, DayAndNightRates) {
  const Schedule c = tariff_schedule();
  for (int h = 0; h < 24; ++h) {
    EXPECT_EQ(c[h], (h >= 5 && h < 23) ? 0.145 : 0.097) << h;
  }
}

TEST(Hub, ConvertersApplyTheirCop) {
  const Hub hub = make_hub(1, kDist);
  const Vec u = hub_inputs(hub, {{"heat_pump_in", 1.0}, {"heat_pump_out", 3.0},
                                 {"chiller_in", 2.0}, {"chiller_out", 1.4},
                                 {"boiler_in", 10.0}, {"boiler_out", 9.0}});
  for (std::size_t k = 0; k < hub.devices.size(); ++k) {
    const Device& d = hub.devices[k];
    if (d.Gu.rows() == 0) continue;
    const Vec r = d.Gu * u.segment(hub.input_offset(k), d.input_dim) - d.g;
    EXPECT_LE(r.lpNorm<Eigen::Infinity>(), 1e-12) << d.id;
  }
}

TEST(Hub, CapacitiesScaleWithBuildings) {
  for (int n : {1, 3}) {
    const Hub hub = make_hub(n, kDist);
    EXPECT_EQ(hub.device("chiller").h(2), 20.0 * n);
    EXPECT_EQ(hub.device("boiler").h(2), 25.0 * n);
    EXPECT_EQ(hub.device("heat_pump").h(2), 5.0 * n);
    EXPECT_NEAR(pv_bound(hub, Vec::Zero(3)), 0.128 * n, 1e-15);
  }
  EXPECT_THROW(make_hub(0, kDist), SpecError);
  EXPECT_THROW(make_hub(1, {"AT", "IG"}), SpecError);
}

TEST(Hub, PvBoundIsAffineInWeather) {
  const Hub hub = make_hub(1, kDist);
  Vec xi = Vec::Zero(3);
  xi[0] = 10.0;
  xi[1] = 0.2;
  EXPECT_NEAR(pv_bound(hub, xi), 0.128 - 0.0019 * 10.0 + 3.7 * 0.2, 1e-14);
}

TEST(Hub, BatteryStep) {
  const Hub hub = make_hub(1, kDist);
  const Vec u = hub_inputs(hub, {{"battery_in", 1.0}});
  const Vec x = hub_step(hub, Vec::Zero(hub.state_dim()), u, Vec::Zero(3));
  EXPECT_NEAR(x[0], 0.61, 1e-15);
  EXPECT_NEAR(x[1], 0.25, 1e-15);
}

TEST(Hub, BatteryChargeRangeByVertexEnumeration) {
  const Hub hub = make_hub(1, kDist);
  const Device& b = hub.device("battery");
  oracle::DenseLp lp;
  lp.A.resize(b.rows(), 4);
  lp.A << b.Fx, b.Fu;
  lp.b = b.h;
  lp.Aeq.resize(0, 4);
  lp.beq.resize(0);
  lp.c = Vec::Zero(4);
  lp.c[0] = lp.c[1] = 1.0;
  const auto lo = oracle::enumerate_vertices(lp);
  lp.c = -lp.c;
  const auto hi = oracle::enumerate_vertices(lp);
  ASSERT_TRUE(lo.feasible);
  ASSERT_TRUE(hi.feasible);
  EXPECT_NEAR(lo.objective, 1.0, 1e-9);
  EXPECT_NEAR(-hi.objective, 5.0, 1e-9);
}

TEST(Hub, BalanceNodesAreNonEmpty) {
  const Hub hub = make_hub(2, kDist);
  ASSERT_EQ(hub.nodes.size(), 3u);
  for (const auto& node : hub.nodes) {
    EXPECT_FALSE(node.Hp.isZero() && node.Hu.isZero() && node.Hd.isZero()) << node.id;
  }
  // Only electricity can be bought.
  EXPECT_EQ(hub.nodes[0].Hp[0], 1.0);
  EXPECT_EQ(hub.nodes[1].Hp[0], 0.0);
  EXPECT_EQ(hub.nodes[2].Hp[0], 0.0);
}

TEST(Building, EquilibriumAtAmbient) {
  BuildingSpec spec;
  spec.actuators = {Actuator::Radiator, Actuator::Blinds};
  const Building b = make_building(spec, kDist);
  const Vec x = Vec::Constant(b.state_dim(), 12.5);
  Vec xi = Vec::Zero(3);
  xi[0] = 12.5;
  const Vec next = simulate_true_step(b, x, Vec::Zero(b.input_dim()), Vec::Zero(b.blind_dim()), xi);
  EXPECT_LE((next - x).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Building, FreeDynamics) {
  const Building b = make_building(BuildingSpec{}, kDist);
  const Vec x = b.x0;
  const Vec next = simulate_true_step(b, x, Vec::Zero(b.input_dim()), Vec::Zero(b.blind_dim()),
                                      Vec::Zero(3));
  EXPECT_LE((next - b.A * x).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Building, HeavyMassDampsHeatPulse) {
  EXPECT_LT(peak_rise("heavy"), peak_rise("light"));
  EXPECT_GT(peak_rise("heavy"), 0.0);
}

TEST(Building, HeavyDominantTimeConstantBetweenNineAndFourteenDays) {
  const Building b = make_building(BuildingSpec{}, kDist);
  const Eigen::VectorXcd ev = b.A.eigenvalues();
  double dominant = 0.0;
  for (int i = 0; i < ev.size(); ++i) dominant = std::max(dominant, std::abs(ev[i]));
  // A longer time constant means an eigenvalue closer to 1.
  EXPECT_GE(dominant, std::exp(-1.0 / (9.0 * 24.0)));
  EXPECT_LE(dominant, std::exp(-1.0 / (14.0 * 24.0)));
}

TEST(Building, LinearizationWithoutBilinearityIsB) {
  BuildingSpec spec;
  spec.actuators = {Actuator::Radiator, Actuator::TABS};
  const Building b = make_building(spec, kDist);
  for (const auto& E : b.E) EXPECT_TRUE(E.isZero());
  EXPECT_EQ(linearize_building(b, Vec::Constant(b.state_dim(), 30.0)), b.B);
  const Building full = make_building(BuildingSpec{}, kDist);
  EXPECT_EQ(linearize_building(full, Vec::Zero(full.state_dim())), full.B);
}

TEST(Building, LinearizationErrorIsFirstOrderInInput) {
  BuildingSpec spec;
  spec.rooms = 3;
  spec.actuators = {Actuator::Radiator, Actuator::AHU, Actuator::TABS, Actuator::Blinds};
  const Building b = make_building(spec, kDist);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec x(b.state_dim()), u(b.input_dim()), v(b.blind_dim()), xi(3);
  for (int i = 0; i < x.size(); ++i) x[i] = 18.0 + 6.0 * unif(rng);
  for (int i = 0; i < u.size(); ++i) u[i] = 2.0 * unif(rng);
  for (int i = 0; i < v.size(); ++i) v[i] = unif(rng);
  xi << 5.0, 0.2, 1.0;
  auto predict = [&](const Vec& x_hat, const Vec& uu) {
    return Vec(b.A * x + linearize_building(b, x_hat) * uu + disturbance_gain(b, v) * xi);
  };
  // Exact at the expansion point.
  EXPECT_LE((predict(x, u) - simulate_true_step(b, x, u, v, xi)).lpNorm<Eigen::Infinity>(),
            1e-12);
  // Elsewhere the mismatch is (x - x_hat)'E u, so it shrinks with u.
  const Vec x_hat = x + Vec::Constant(x.size(), 0.5);
  const double big = (predict(x_hat, u) - simulate_true_step(b, x, u, v, xi)).norm();
  const Vec small_u = 1e-3 * u;
  const double small =
      (predict(x_hat, small_u) - simulate_true_step(b, x, small_u, v, xi)).norm();
  EXPECT_GT(big, 0.0);
  EXPECT_NEAR(small / big, 1e-3, 1e-9);
  EXPECT_LE(small / simulate_true_step(b, x, small_u, v, xi).norm(), 1e-5);
}

TEST(Building, TrueStepMatchesNaiveEvaluation) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rooms = 1; rooms <= 5; ++rooms) {
    BuildingSpec spec;
    spec.rooms = rooms;
    spec.mass = rooms % 2 ? "heavy" : "light";
    spec.actuators = {Actuator::Radiator, Actuator::AHU, Actuator::TABS, Actuator::Blinds};
    const Building b = make_building(spec, full_disturbances());
    Vec x(b.state_dim()), u(b.input_dim()), v(b.blind_dim()), xi(b.disturbance_dim());
    for (auto* vec : {&x, &u, &v, &xi}) {
      for (int i = 0; i < vec->size(); ++i) (*vec)[i] = g(rng);
    }
    const Vec fast = simulate_true_step(b, x, u, v, xi);
    EXPECT_LE((fast - naive_step(b, x, u, v, xi)).lpNorm<Eigen::Infinity>(),
              1e-12 * std::max(1.0, fast.lpNorm<Eigen::Infinity>()));
  }
}

TEST(Building, WithoutBilinearTermsTruthIsLinear) {
  BuildingSpec spec;
  spec.actuators = {Actuator::Radiator};
  const Building b = make_building(spec, kDist);
  const Vec x = Vec::Constant(b.state_dim(), 19.0);
  const Vec u = Vec::Constant(b.input_dim(), 1.5);
  const Vec xi = (Vec(3) << 3.0, 0.4, 2.0).finished();
  EXPECT_LE((simulate_true_step(b, x, u, Vec(0), xi) - (b.A * x + b.B * u + b.D * xi))
                .lpNorm<Eigen::Infinity>(),
            1e-12);
}

TEST(Building, ActuatorsMapToExactlyOneStream) {
  BuildingSpec spec;
  spec.rooms = 2;
  spec.actuators = {Actuator::Radiator, Actuator::AHU, Actuator::TABS};
  const Building b = make_building(spec, kDist);
  const Mat eta = b.coupling();
  for (int j = 0; j < b.input_dim(); ++j) EXPECT_EQ(eta.col(j).sum(), 1.0);
  EXPECT_EQ(b.input_dim(), 8);
  EXPECT_EQ(b.blind_dim(), 0);
}

TEST(Building, RejectsBadSpecsAndShapes) {
  BuildingSpec spec;
  spec.actuators.clear();
  EXPECT_THROW(make_building(spec, kDist), SpecError);
  spec = BuildingSpec{};
  spec.rooms = 6;
  EXPECT_THROW(make_building(spec, kDist), SpecError);
  spec = BuildingSpec{};
  spec.mass = "medium";
  EXPECT_THROW(make_building(spec, kDist), SpecError);
  spec = BuildingSpec{};
  spec.comfort.lb[3] = 40.0;
  EXPECT_THROW(make_building(spec, kDist), SpecError);
  const Building b = make_building(BuildingSpec{}, kDist);
  EXPECT_THROW(simulate_true_step(b, Vec::Zero(1), Vec::Zero(b.input_dim()),
                                  Vec::Zero(b.blind_dim()), Vec::Zero(3)),
               ShapeError);
  EXPECT_THROW(linearize_building(b, Vec::Zero(5)), ShapeError);
}

TEST(District, ConfigJsonRoundTrip) {
  DistrictConfig c;
  c.buildings[0].comfort = residential_comfort();
  c.buildings.push_back(BuildingSpec{});
  c.buildings[1].id = "office";
  c.buildings[1].rooms = 2;
  c.buildings[1].actuators = {Actuator::TABS, Actuator::Blinds};
  const auto j = district_config_to_json(c);
  const DistrictConfig back = district_config_from_json(j);
  EXPECT_EQ(district_config_to_json(back), j);
  const DistrictModel d = back.build();
  EXPECT_EQ(d.buildings.size(), 2u);
  EXPECT_EQ(d.hub.device("chiller").h(2), 40.0);
}

TEST(District, ComfortNullsMeanUnbounded) {
  nlohmann::json j = {{"lb", nlohmann::json::array()}, {"ub", nlohmann::json::array()}};
  for (int h = 0; h < 24; ++h) {
    j["lb"].push_back(h < 12 ? nlohmann::json(nullptr) : nlohmann::json(20.0));
    j["ub"].push_back(nullptr);
  }
  const ComfortSchedule c = comfort_from_json(j);
  EXPECT_EQ(c.lb[0], -kInf);
  EXPECT_EQ(c.lb[12], 20.0);
  EXPECT_EQ(c.ub[5], kInf);
  EXPECT_THROW(comfort_from_json("arctic"), SpecError);
}
