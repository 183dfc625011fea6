#include <gtest/gtest.h>

#include <cmath>

#include "gaplab/schedule.hpp"
#include "oracles.hpp"

using namespace gaplab;

TEST(Schedule, LinearBetasT4) {
  const auto s = linear_schedule(4, 1e-4, 0.02);
  EXPECT_NEAR(s.beta(1), 0.0001, 1e-15);
  EXPECT_NEAR(s.beta(2), 0.0001 + 0.0199 / 3.0, 1e-15);
  EXPECT_NEAR(s.beta(3), 0.0001 + 2.0 * 0.0199 / 3.0, 1e-15);
  EXPECT_NEAR(s.beta(4), 0.02, 1e-15);
}

TEST(Schedule, CumulativeProductT2) {
  const auto s = linear_schedule(2, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.5);
  EXPECT_DOUBLE_EQ(s.alpha_bar(2), 0.25);
  EXPECT_DOUBLE_EQ(s.beta_bar(2), 0.75);
}

TEST(Schedule, TerminalAlphaBarRegression) {
  // Direct product evaluation, frozen.
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  EXPECT_NEAR(s.alpha_bar(1000), 4.035829765e-05, 1e-13);
  EXPECT_NEAR(s.alpha_bar(1000), 4.04e-5, 1e-7);
}

TEST(Schedule, ZeroIndexConvention) {
  const auto s = linear_schedule(10, 1e-3, 0.1);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  EXPECT_EQ(s.beta_bar(0), 0.0);
  EXPECT_THROW(s.beta(0), std::out_of_range);
  EXPECT_THROW(s.alpha_bar(11), std::out_of_range);
  EXPECT_THROW(s.beta(11), std::out_of_range);
}

TEST(Schedule, RejectsBadArguments) {
  EXPECT_THROW(linear_schedule(1, 1e-4, 0.02), std::invalid_argument);
  EXPECT_THROW(linear_schedule(10, 0.0, 0.02), std::invalid_argument);
  EXPECT_THROW(linear_schedule(10, 0.03, 0.02), std::invalid_argument);
  EXPECT_THROW(linear_schedule(10, 1e-4, 1.0), std::invalid_argument);
}

TEST(Schedule, InvariantsAndSelfConsistency) {
  for (int T : {50, 200, 1000}) {
    const auto s = default_schedule(T);
    const auto tb = oracle::linear_tables(T, s.beta_start(), s.beta_end());
    for (int t = 1; t <= T; ++t) {
      EXPECT_GT(s.beta(t), 0.0);
      EXPECT_LT(s.beta(t), 1.0);
      EXPECT_DOUBLE_EQ(s.alpha(t), 1.0 - s.beta(t));
      EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
      EXPECT_GT(s.beta_bar(t), s.beta_bar(t - 1));
      EXPECT_NEAR(s.alpha_bar(t) / tb.alpha_bar[t], 1.0, 1e-12);
      EXPECT_NEAR(s.beta_bar(t), 1.0 - s.alpha_bar(t), 1e-15);
    }
  }
}

TEST(Schedule, DefaultScheduleEndpoints) {
  const auto s = default_schedule();
  EXPECT_EQ(s.T(), 1000);
  EXPECT_DOUBLE_EQ(s.beta_start(), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta_end(), 0.02);
  const auto short_s = default_schedule(200);
  EXPECT_DOUBLE_EQ(short_s.beta_start(), 5e-4);
  EXPECT_DOUBLE_EQ(short_s.beta_end(), 0.1);
}

TEST(ForwardStep, ZeroNoiseHook) {
  const auto s = NoiseSchedule::from_betas({0.25, 0.5});
  const Vec x{2.0, -1.0};
  const Vec out = forward_step_with_noise(s, x, 1, Vec{0.0, 0.0});
  EXPECT_DOUBLE_EQ(out[0], std::sqrt(0.75) * 2.0);
  EXPECT_DOUBLE_EQ(out[1], -std::sqrt(0.75));
  EXPECT_THROW(forward_step_with_noise(s, x, 3, Vec{0.0, 0.0}), std::out_of_range);
}

TEST(ForwardStep, MomentsMatchBeta) {
  const auto s = linear_schedule(100, 1e-3, 0.2);
  const int t = 60;
  const Vec x{0.7};
  Rng rng(11);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = forward_step(s, x, t, rng)[0];
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n, var = sum2 / n - mean * mean;
  const double beta = s.beta(t);
  EXPECT_NEAR(mean, std::sqrt(1.0 - beta) * 0.7, 3.0 * std::sqrt(beta / n));
  // SE of a Gaussian sample variance: beta * sqrt(2 / n).
  EXPECT_NEAR(var, beta, 3.0 * beta * std::sqrt(2.0 / n));
}

TEST(ForwardStep, ZeroInputHasZeroMean) {
  const auto s = linear_schedule(10, 0.05, 0.2);
  Rng rng(3);
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += forward_step(s, Vec{0.0}, 5, rng)[0];
  EXPECT_NEAR(sum / n, 0.0, 4.0 * std::sqrt(s.beta(5) / n));
}

TEST(ForwardMarginal, Limits) {
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  const Vec x0{1.5, -2.0};
  const Vec eps{0.3, 0.4};
  const Vec noiseless = forward_marginal(s, x0, 400, Vec{0.0, 0.0});
  EXPECT_DOUBLE_EQ(noiseless[0], std::sqrt(s.alpha_bar(400)) * 1.5);
  const Vec terminal = forward_marginal(s, x0, 1000, eps);
  EXPECT_NEAR(terminal[0], 0.3, 2e-2);
  EXPECT_NEAR(terminal[1], 0.4, 2e-2);
  EXPECT_THROW(forward_marginal(s, x0, 10, Vec{1.0}), std::invalid_argument);
}

TEST(ForwardMarginal, StepCompositionMatchesMarginal) {
  const auto s = linear_schedule(40, 1e-3, 0.1);
  const int t = 40;
  const Vec x0{1.0};
  const int n = 40000;
  Rng rng(5);
  double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
  for (int i = 0; i < n; ++i) {
    Vec x = x0;
    for (int k = 1; k <= t; ++k) x = forward_step(s, x, k, rng);
    a1 += x[0];
    a2 += x[0] * x[0];
    const Vec m = forward_marginal(s, x0, t, standard_normal(rng, 1));
    b1 += m[0];
    b2 += m[0] * m[0];
  }
  const double va = a2 / n - (a1 / n) * (a1 / n), vb = b2 / n - (b1 / n) * (b1 / n);
  const double var = s.beta_bar(t);
  EXPECT_NEAR(a1 / n, std::sqrt(s.alpha_bar(t)), 4.0 * std::sqrt(var / n));
  EXPECT_NEAR(b1 / n, std::sqrt(s.alpha_bar(t)), 4.0 * std::sqrt(var / n));
  EXPECT_NEAR(va, var, 4.0 * var * std::sqrt(2.0 / n));
  EXPECT_NEAR(vb, var, 4.0 * var * std::sqrt(2.0 / n));
}
