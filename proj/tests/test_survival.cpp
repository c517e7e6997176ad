#include <gtest/gtest.h>

#include <random>

#include "malfeed/survival.hpp"
#include "support.hpp"

using namespace malfeed;
using malfeed::test::make_report;

namespace {

constexpr std::int64_t kW = kSecondsPerWeek;

std::vector<DurationSample> uncensored(std::initializer_list<std::uint32_t> ds) {
  std::vector<DurationSample> out;
  for (auto d : ds) out.push_back({d, false});
  return out;
}

/// Hand product-limit estimate evaluated at t.
double product_limit(const std::vector<DurationSample>& xs, double t) {
  double s = 1.0;
  std::vector<std::uint32_t> times;
  for (const auto& x : xs) times.push_back(x.duration);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  for (auto u : times) {
    if (u > t) break;
    double n = 0, d = 0;
    for (const auto& x : xs) {
      if (x.duration >= u) ++n;
      if (x.duration == u && !x.censored) ++d;
    }
    s *= 1.0 - d / n;
  }
  return s;
}

}  // namespace

TEST(Durations, SingleReportIsZeroWeeks) {
  ReportStore store({make_report(10 * kW, "1.1.1.1"), make_report(100 * kW, "1.1.1.2")});
  auto ds = durations_from_store(store, HostLevel::IP);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0], (DurationSample{0, false}));
  EXPECT_EQ(ds[1], (DurationSample{0, true}));  // last report in the feed's final week
}

TEST(Durations, InsideWindowIsUncensored) {
  ReportStore store({make_report(10 * kW, "1.1.1.1"), make_report(25 * kW + 5, "1.1.1.1"),
                     make_report(100 * kW, "1.1.1.2")});
  auto ds = durations_from_store(store, HostLevel::IP);
  EXPECT_EQ(ds[0], (DurationSample{15, false}));
}

TEST(Durations, FinalCoveredWeekIsCensored) {
  ReportStore store({make_report(10 * kW, "1.1.1.1"), make_report(25 * kW, "1.1.1.1")});
  auto ds = durations_from_store(store, HostLevel::IP);
  EXPECT_EQ(ds[0], (DurationSample{15, true}));
  // an explicit window end past the data lifts the censoring
  ds = durations_from_store(store, HostLevel::IP, {{"feed", 100 * kW}});
  EXPECT_EQ(ds[0], (DurationSample{15, false}));
}

TEST(Durations, CensoredOnlyIfEverySourceEnded) {
  // host seen by two feeds; "a" keeps running after the host's last report
  ReportStore store({make_report(10 * kW, "1.1.1.1", {}, "a"), make_report(25 * kW, "1.1.1.1", {}, "b"),
                     make_report(40 * kW, "2.2.2.2", {}, "a")});
  auto ds = durations_from_store(store, HostLevel::IP);
  EXPECT_EQ(ds[0], (DurationSample{15, false}));
  EXPECT_TRUE(ds[1].censored);
}

TEST(Durations, WindowsIgnoreClassFilter) {
  ReportStore store({make_report(10 * kW, "1.1.1.1", ActivityClass::Malware),
                     make_report(30 * kW, "1.1.1.2", ActivityClass::Phishing)});
  auto ds = durations_from_store(store, HostLevel::IP, {}, ActivityClass::Malware);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_FALSE(ds[0].censored);
}

TEST(KaplanMeier, Uncensored123) {
  auto c = km_estimate(uncensored({1, 2, 3}));
  ASSERT_EQ(c.steps.size(), 3u);
  EXPECT_NEAR(c.at(1), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.at(2), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(c.at(3), 0.0);
  EXPECT_EQ(c.at(0.5), 1.0);
}

TEST(KaplanMeier, MiddleCensored) {
  auto c = km_estimate(std::vector<DurationSample>{{1, false}, {2, true}, {3, false}});
  EXPECT_NEAR(c.at(1), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.at(2), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(c.at(3), 0.0);
  EXPECT_EQ(c.steps[2].at_risk, 1u);
  EXPECT_EQ(c.steps[1].deaths, 0u);
}

TEST(KaplanMeier, AllCensoredStaysAtOne) {
  auto c = km_estimate(std::vector<DurationSample>{{1, true}, {4, true}, {4, true}});
  for (const auto& s : c.steps) {
    EXPECT_EQ(s.survival, 1.0);
    EXPECT_EQ(s.ci_low, 1.0);
  }
}

TEST(KaplanMeier, SingleDeathStepsToZero) {
  auto c = km_estimate(uncensored({7}));
  ASSERT_EQ(c.steps.size(), 1u);
  EXPECT_EQ(c.steps[0].t, 7.0);
  EXPECT_EQ(c.steps[0].survival, 0.0);
  EXPECT_EQ(c.at(6.9), 1.0);
}

TEST(KaplanMeier, GreenwoodBand) {
  // hand Greenwood for [1,2,3]: at t=1, var = (2/3)^2 * 1/(3*2)
  auto c = km_estimate(uncensored({1, 2, 3}), 0.95);
  const double var = (4.0 / 9.0) * (1.0 / 6.0);
  const double z = 1.959963984540054;
  EXPECT_NEAR(c.steps[0].ci_low, 2.0 / 3.0 - z * std::sqrt(var), 1e-12);
  EXPECT_NEAR(c.steps[0].ci_high, std::min(1.0, 2.0 / 3.0 + z * std::sqrt(var)), 1e-12);
  EXPECT_EQ(c.steps[2].ci_low, 0.0);
  EXPECT_EQ(c.steps[2].ci_high, 0.0);
}

TEST(KaplanMeier, ErrorsOnBadInput) {
  EXPECT_THROW(km_estimate(std::vector<DurationSample>{}), DomainError);
  EXPECT_THROW(km_estimate(uncensored({1}), 1.0), DomainError);
  EXPECT_NEAR(normal_critical_value(0.95), 1.959963984540054, 1e-12);
}

TEST(KaplanMeierProperty, NoCensoringEqualsOneMinusEcdf) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<std::uint32_t> dur(0, 30);
  std::uniform_int_distribution<std::size_t> n(1, 80);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<DurationSample> xs(n(rng));
    for (auto& x : xs) x.duration = dur(rng);
    const auto c = km_estimate(xs);
    for (const auto& s : c.steps) {
      const double le = static_cast<double>(
          std::count_if(xs.begin(), xs.end(), [&](const auto& x) { return x.duration <= s.t; }));
      ASSERT_NEAR(s.survival, 1.0 - le / static_cast<double>(xs.size()), 1e-12);
    }
  }
}

TEST(KaplanMeierProperty, MatchesHandProductLimitAndMonotone) {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<std::uint32_t> dur(0, 20);
  std::bernoulli_distribution cens(0.3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<DurationSample> xs(1 + trial % 40);
    for (auto& x : xs) x = {dur(rng), cens(rng)};
    const auto c = km_estimate(xs);
    double prev = 1.0;
    for (const auto& s : c.steps) {
      ASSERT_NEAR(s.survival, product_limit(xs, s.t), 1e-12);
      ASSERT_LE(s.survival, prev);
      ASSERT_LE(s.ci_low, s.survival);
      ASSERT_GE(s.ci_high, s.survival);
      if (s.survival == 0.0 || s.survival == 1.0) ASSERT_EQ(s.ci_high - s.ci_low, 0.0);
      prev = s.survival;
    }
  }
}

TEST(KaplanMeierProperty, ExtraCensoredNeverLowersCurve) {
  std::mt19937_64 rng(57);
  std::uniform_int_distribution<std::uint32_t> dur(0, 20);
  std::bernoulli_distribution cens(0.3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<DurationSample> xs(1 + trial % 30);
    for (auto& x : xs) x = {dur(rng), cens(rng)};
    auto more = xs;
    more.push_back({dur(rng), true});
    const auto a = km_estimate(xs), b = km_estimate(more);
    for (double t = 0; t <= 21; t += 0.5) ASSERT_GE(b.at(t) + 1e-12, a.at(t));
  }
}

TEST(KaplanMeier, ClassesIndependentAndPoolable) {
  std::vector<Report> xs;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(make_report((10 + i) * kW, "10.0.0." + std::to_string(i), ActivityClass::Malware));
    xs.push_back(make_report((12 + 2 * i) * kW, "10.0.0." + std::to_string(i), ActivityClass::Malware));
    xs.push_back(make_report((5 + i) * kW, "10.0.1." + std::to_string(i), ActivityClass::Phishing));
    xs.push_back(make_report((5 + 3 * i) * kW, "10.0.1." + std::to_string(i), ActivityClass::Phishing));
  }
  ReportStore store(xs);
  auto mal = durations_from_store(store, HostLevel::IP, {}, ActivityClass::Malware);
  auto phi = durations_from_store(store, HostLevel::IP, {}, ActivityClass::Phishing);
  auto pooled = durations_from_store(store, HostLevel::IP);
  auto merged = mal;
  merged.insert(merged.end(), phi.begin(), phi.end());
  const auto a = km_estimate(merged), b = km_estimate(pooled);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].survival, b.steps[i].survival);
  EXPECT_NE(km_by_class(store, ActivityClass::Malware).steps.size(), 0u);
}
