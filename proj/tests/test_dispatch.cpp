#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace raccredit;

namespace {

SystemSpec storage_system(double eta_c, double eta_d, double soc0) {
  SystemSpec s;
  s.horizon_hours = 4;
  s.hours_per_day = 4;
  s.load.values = {5, 5, 12, 8};
  s.generators = {{"base", 8.0, GeneratorKind::perfect, {}, {}}};
  s.storages = {{"bat", 3.0, 6.0, eta_c, eta_d, soc0, {}}};
  return s;
}

}  // namespace

TEST(Dispatch, PlainShortfall) {
  SystemSpec s;
  s.horizon_hours = 3;
  s.hours_per_day = 3;
  s.load.values = {10, 20, 30};
  s.generators = {{"a", 25.0, GeneratorKind::perfect, {}, {}}};
  const auto d = dispatch_scenario(s, AvailabilityMatrix(1, 3));
  EXPECT_EQ(d.shortfall, (std::vector<double>{0, 0, 5}));
  EXPECT_TRUE(d.soc_trace.empty());
}

TEST(Dispatch, GreedyStorageByHand) {
  // hours: surplus 3 (charge 3), surplus 3 (charge 3, full at 6), deficit 4 (discharge 3), surplus 0
  const auto d = dispatch_scenario(storage_system(1.0, 1.0, 0.0), AvailabilityMatrix(1, 4));
  EXPECT_EQ(d.shortfall, (std::vector<double>{0, 0, 1, 0}));
  EXPECT_EQ(d.soc_trace, (std::vector<double>{3, 6, 3, 3}));
}

TEST(Dispatch, EfficienciesApplied) {
  // charge 3 in -> 2.4 stored twice = 4.8; discharge limited by power 3 -> soc 4.8 - 3/0.9
  const auto d = dispatch_scenario(storage_system(0.8, 0.9, 0.0), AvailabilityMatrix(1, 4));
  EXPECT_DOUBLE_EQ(d.soc_trace[1], 4.8);
  EXPECT_DOUBLE_EQ(d.shortfall[2], 1.0);
  EXPECT_DOUBLE_EQ(d.soc_trace[2], 4.8 - 3.0 / 0.9);
}

TEST(Dispatch, EmptyInitialChargeCannotServeFirstDeficit) {
  auto s = storage_system(1.0, 1.0, 0.0);
  s.load.values = {12, 5, 5, 5};
  const auto d = dispatch_scenario(s, AvailabilityMatrix(1, 4));
  EXPECT_EQ(d.shortfall[0], 4.0);
}

TEST(Dispatch, SynergyFixtureByHand) {
  const auto s = fixtures::synergy();
  const AvailabilityMatrix a = AvailabilityMatrix::from_batch(sample_batch(s, 2, RngPolicy{1}), 0);
  auto run = [&](double pv, double bat) {
    Adjustment adj;
    adj.generator_mw = {pv};
    adj.storage_power_mw = {bat};
    adj.storage_energy_mwh = {bat};
    return dispatch_scenario(s, a, {}, adj).shortfall;
  };
  EXPECT_EQ(run(0, 0), (std::vector<double>{5, 5}));
  EXPECT_EQ(run(10, 0), (std::vector<double>{0, 5}));
  EXPECT_EQ(run(0, 5), (std::vector<double>{5, 5}));
  EXPECT_EQ(run(10, 5), (std::vector<double>{0, 0}));
}

TEST(Dispatch, DimensionMismatchThrows) {
  EXPECT_THROW(dispatch_scenario(fixtures::toy3(), AvailabilityMatrix(2, 24)), Error);
}

TEST(Dispatch, SurfaceMatchesPerScenarioDispatch) {
  const auto s = fixtures::toy3();
  const auto b = sample_batch(s, 300, RngPolicy{4});
  Adjustment adj;
  adj.firm_mw = 2.5;
  const auto surface = shortfall_surface(s, b, {}, adj);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto d = dispatch_scenario(s, AvailabilityMatrix::from_batch(b, i), {}, adj);
    for (std::size_t t = 0; t < 24; ++t) {
      ASSERT_EQ(surface.row(i)[t], d.shortfall[t]);
      ASSERT_EQ(surface.indicators(i)[t], d.shortfall[t] > 0.0 ? 1 : 0);
    }
  }
}

TEST(Dispatch, ShiftInvarianceIsExactPerScenario) {
  const auto s = fixtures::toy3();
  const auto b = sample_batch(s, 200, RngPolicy{12});
  for (double c : {0.5, 7.0, 33.25}) {
    Adjustment up;
    up.firm_mw = c;
    up.load_mw = c;
    const auto base = shortfall_surface(s, b);
    const auto shifted = shortfall_surface(s, b, {}, up);
    for (std::size_t k = 0; k < base.shortfall.size(); ++k) ASSERT_DOUBLE_EQ(base.shortfall[k], shifted.shortfall[k]);
  }
}

TEST(Dispatch, NegativeCapacityDetection) {
  const auto s = fixtures::toy3();
  EXPECT_TRUE(has_negative_capacity(s, direction_adjustment(s, PerturbationDirection::resource("cand"), -1.0)));
  EXPECT_FALSE(has_negative_capacity(s, direction_adjustment(s, PerturbationDirection::resource("g100"), -1.0)));
}
