#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "fixtures.hpp"

using namespace raccredit;

TEST(Rng, KeyedStreamsAreCounterBased) {
  const RngPolicy p{99};
  const auto a = derive_stream(p, 5, "g100");
  const auto b = derive_stream(p, 5, "g100");
  EXPECT_EQ(a.bits_at(17), b.bits_at(17));
  EXPECT_NE(a.bits_at(17), derive_stream(p, 6, "g100").bits_at(17));
  EXPECT_NE(a.bits_at(17), derive_stream(p, 5, "g50a").bits_at(17));
  for (std::uint64_t c = 0; c < 1000; ++c) {
    const double u = a.uniform_at(c);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Batch, RejectsZeroSamples) { EXPECT_THROW(sample_batch(fixtures::toy3(), 0, RngPolicy{1}), SpecError); }

TEST(Batch, SameSeedSameFlagsAnyThreadCount) {
  const auto s = fixtures::toy3();
  set_thread_limit(1);
  const auto a = sample_batch(s, 9000, RngPolicy{3});
  set_thread_limit(4);
  const auto b = sample_batch(s, 9000, RngPolicy{3});
  set_thread_limit(0);
  for (std::size_t i = 0; i < a.size(); i += 37)
    for (std::size_t k = 0; k < a.thermal_count(); ++k)
      for (std::size_t t = 0; t < a.horizon(); ++t) ASSERT_EQ(a.thermal_flag(i, k, t), b.thermal_flag(i, k, t));
}

TEST(Batch, DrawsDependOnResourceIdNotFleetPosition) {
  auto s = fixtures::toy3();
  const auto a = sample_batch(s, 200, RngPolicy{11});
  auto extra = with_generator(s, {"zz", 10.0, GeneratorKind::thermal, 0.3, {}});
  std::rotate(extra.generators.begin(), extra.generators.end() - 1, extra.generators.end());
  const auto b = sample_batch(extra, 200, RngPolicy{11});
  // g100 is thermal slot 0 in a and slot 1 in b
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t t = 0; t < 24; ++t) ASSERT_EQ(a.thermal_flag(i, 0, t), b.thermal_flag(i, 1, t));
}

TEST(Batch, LazyAndMaterializedAgree) {
  const auto s = fixtures::toy3();
  SamplingOptions lazy;
  lazy.materialize_limit = 0;
  const auto a = sample_batch(s, 500, RngPolicy{8});
  const auto b = sample_batch(s, 500, RngPolicy{8}, lazy);
  EXPECT_TRUE(a.materialized());
  EXPECT_FALSE(b.materialized());
  for (std::size_t i = 0; i < 500; ++i)
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t t = 0; t < 24; ++t) ASSERT_EQ(a.thermal_flag(i, k, t), b.thermal_flag(i, k, t));
}

TEST(Batch, OutageFrequencyMatchesRate) {
  const auto s = fixtures::toy3();
  const auto b = sample_batch(s, 20000, RngPolicy{5});
  double down = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t t = 0; t < 24; ++t) down += 1 - b.thermal_flag(i, 0, t);
  const double n = 20000.0 * 24.0;
  const double rate = down / n;
  EXPECT_NEAR(rate, 0.10, 4.0 * std::sqrt(0.09 / n));
}

TEST(Batch, AvailabilityByKind) {
  const auto s = fixtures::load("scarce_hours.json");
  const auto b = sample_batch(s, 4, RngPolicy{1});
  EXPECT_EQ(b.availability(0, 3, 0), 1.0);
  EXPECT_EQ(b.availability(0, 3, 1), 0.0);
}

TEST(Batch, CompatibilityCheck) {
  const auto s = fixtures::toy3();
  const auto b = sample_batch(s, 10, RngPolicy{1});
  EXPECT_NO_THROW(b.check_compatible(scale_load(s, 2.0)));
  auto changed = s;
  changed.generators[0].for_rate = 0.2;
  EXPECT_THROW(b.check_compatible(changed), Error);
}

TEST(Batch, DumpRoundTrip) {
  const auto s = fixtures::toy3();
  const auto b = sample_batch(s, 50, RngPolicy{77});
  const auto file = (std::filesystem::temp_directory_path() / "raccredit_dump_test.bin").string();
  write_thermal_dump(b, file);
  const auto d = read_thermal_dump(file);
  std::remove(file.c_str());
  EXPECT_EQ(d.n, 50u);
  EXPECT_EQ(d.master_seed, 77u);
  EXPECT_EQ(d.horizon, 24u);
  ASSERT_EQ(d.ids, (std::vector<std::string>{"g100", "g50a", "g50b", "cand"}));
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t t = 0; t < 24; ++t) ASSERT_EQ(d.flags[(i * 4 + k) * 24 + t], b.thermal_flag(i, k, t));
}
