#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tdp/core/errors.hpp"
#include "tdp/core/schedule.hpp"

namespace tdp {
namespace {

TEST(Schedule, TwoStepHandExample) {
  const auto s = Schedule::from_betas({0.1, 0.2});
  EXPECT_EQ(s.steps(), 2);
  EXPECT_DOUBLE_EQ(s.alpha_bar(0), 1.0);
  EXPECT_NEAR(s.alpha_bar(1), 0.9, 1e-15);
  EXPECT_NEAR(s.alpha_bar(2), 0.72, 1e-15);
  EXPECT_NEAR(s.posterior_variance(2), (1.0 - 0.9) / (1.0 - 0.72) * 0.2, 1e-12);
  EXPECT_NEAR(s.posterior_variance(2), 0.0714285714285714, 1e-12);
}

// Cumulative product of 64 linearly spaced betas in [1e-4, 0.02], evaluated
// with 50-digit arithmetic (mpmath) and frozen here.
TEST(Schedule, LinearK64AlphaBarMatchesExtendedPrecision) {
  const auto s = Schedule::make(64, ScheduleKind::linear, 1e-4, 0.02);
  EXPECT_NEAR(s.alpha_bar(64), 0.5233181302722669048, 1e-12);
  EXPECT_NEAR(s.beta(1), 1e-4, 1e-18);
  EXPECT_NEAR(s.beta(64), 0.02, 1e-15);
}

TEST(Schedule, CosineLadderIsWellFormed) {
  for (int K : {2, 8, 64, 200}) {
    const auto s = Schedule::make(K, ScheduleKind::cosine);
    for (int k = 1; k <= K; ++k) {
      EXPECT_GT(s.beta(k), 0.0);
      EXPECT_LE(s.beta(k), 0.999);
      EXPECT_NEAR(s.alpha(k), 1.0 - s.beta(k), 1e-15);
      EXPECT_LT(s.alpha_bar(k), s.alpha_bar(k - 1));
      EXPECT_GT(s.alpha_bar(k), 0.0);
    }
    EXPECT_LT(s.alpha_bar(K), 1e-3);
  }
}

TEST(Schedule, AlphaBarIsProductOfAlphas) {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const auto s = Schedule::make(32, kind);
    double prod = 1.0;
    for (int k = 1; k <= 32; ++k) {
      prod *= s.alpha(k);
      EXPECT_NEAR(s.alpha_bar(k), prod, 1e-14);
    }
  }
}

TEST(Schedule, PosteriorVarianceIsZeroOnlyAtFirstStep) {
  const auto s = Schedule::make(16, ScheduleKind::cosine);
  EXPECT_EQ(s.posterior_variance(1), 0.0);
  for (int k = 2; k <= 16; ++k) {
    EXPECT_GT(s.posterior_variance(k), 0.0);
    EXPECT_LE(s.posterior_variance(k), s.beta(k));
  }
}

TEST(Schedule, RejectsBadConfiguration) {
  EXPECT_THROW(Schedule::make(1, ScheduleKind::cosine), ConfigError);
  EXPECT_THROW(Schedule::make(8, ScheduleKind::linear, 0.02, 1e-4), ConfigError);
  EXPECT_THROW(Schedule::make(8, ScheduleKind::linear, 0.0, 0.02), ConfigError);
  EXPECT_THROW(Schedule::make(8, ScheduleKind::linear, 1e-4, 1.0), ConfigError);
  EXPECT_THROW(Schedule::from_betas({0.2, 0.1}), ConfigError);
  EXPECT_THROW(Schedule::from_betas({0.1}), ConfigError);
  EXPECT_NO_THROW(Schedule::make(8, ScheduleKind::cosine, 0.5, 0.1));  // bounds ignored
}

TEST(Schedule, IndexOutsideLadderThrows) {
  const auto s = Schedule::make(8, ScheduleKind::linear);
  EXPECT_THROW(s.beta(0), std::out_of_range);
  EXPECT_THROW(s.beta(9), std::out_of_range);
  EXPECT_THROW(s.alpha_bar(-1), std::out_of_range);
  EXPECT_THROW(s.posterior_variance(9), std::out_of_range);
}

TEST(Schedule, KindNamesRoundTrip) {
  EXPECT_EQ(parse_schedule_kind("linear"), ScheduleKind::linear);
  EXPECT_EQ(parse_schedule_kind(to_string(ScheduleKind::cosine)), ScheduleKind::cosine);
  EXPECT_THROW(parse_schedule_kind("sigmoid"), ConfigError);
}

}  // namespace
}  // namespace tdp
