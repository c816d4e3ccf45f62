#include <gtest/gtest.h>

#include <cmath>

#include "photonsync/clock_model.hpp"
#include "photonsync/errors.hpp"

using namespace photonsync;

TEST(LocalTime, IdentityClock) {
  const ClockModel c{};
  for (double t : {0.0, 0.1, 17.25, 300.0}) EXPECT_DOUBLE_EQ(local_time(c, t), t);
}

TEST(LocalTime, LinearSkew) {
  const ClockModel c{0.0, 18.5e-6, 0.0, 0.0};
  EXPECT_NEAR(local_time(c, 1.0), 1.0000185, 1e-15);
}

TEST(LocalTime, QuadraticDrift) {
  // Half of 320 ps/s^2 times (100 s)^2 is 1.6 microseconds.
  const ClockModel c{0.0, 0.0, 320e-12, 0.0};
  EXPECT_NEAR(local_time(c, 100.0) - 100.0, 0.5 * 320e-12 * 100.0 * 100.0, 1e-13);  // ulp of 100 s
  EXPECT_NEAR(clock_offset(c, 100.0, {}), 1.6e-6, 1e-18);
}

TEST(LocalTime, OffsetAndInverse) {
  const ClockModel c{3.2e-6, 18.5e-6, 320e-12, 0.0};
  for (double t : {0.0, 1.0, 123.4, 299.9}) EXPECT_NEAR(true_time(c, local_time(c, t)), t, 1e-13);
}

TEST(ClockModel, MonotonicityGuard) {
  EXPECT_THROW((ClockModel{0.0, 1.0, 0.0, 0.0}.validate(1.0)), ClockModelError);
  EXPECT_THROW((ClockModel{0.0, 0.5, 0.01, 0.0}.validate(100.0)), ClockModelError);
  EXPECT_THROW((ClockModel{0.0, 0.0, 0.0, -1.0}.validate(1.0)), ClockModelError);
  EXPECT_THROW((ClockModel{std::nan(""), 0.0, 0.0, 0.0}.validate(1.0)), ClockModelError);
  EXPECT_NO_THROW((ClockModel{3.2e-6, 18.5e-6, 320e-12, 320e-12}.validate(300.0)));
}

TEST(GroundTruth, SkewIsLinearWithoutNoise) {
  const GroundTruth g(ClockModel{1e-6, 5e-6, 2e-9, 0.0}, nullptr);
  for (double t : {0.0, 10.0, 250.0}) EXPECT_DOUBLE_EQ(g.true_skew(t), 5e-6 + 2e-9 * t);
}

TEST(GroundTruth, NumericDerivativeMatchesSkew) {
  const ClockModel c{3.2e-6, 18.5e-6, 320e-12, 0.0};
  const GroundTruth g(c, nullptr);
  const double h = 1e-3;
  for (double t : {1.0, 50.0, 200.0}) {
    // Differentiate the offset so the derivative is not swamped by t itself.
    const double d = (g.true_offset(t + h) - g.true_offset(t - h)) / (2 * h);
    EXPECT_NEAR(d, g.true_skew(t), 1e-6 * std::abs(g.true_skew(t)));
  }
}

TEST(NoisePath, DeterministicAndConsistent) {
  const NoisePath a(320e-12, 0.0, 10.0, 99), b(320e-12, 0.0, 10.0, 99), c(320e-12, 0.0, 10.0, 100);
  EXPECT_DOUBLE_EQ(a.skew_noise(3.3), b.skew_noise(3.3));
  EXPECT_NE(a.skew_noise(3.3), c.skew_noise(3.3));
  EXPECT_DOUBLE_EQ(a.skew_noise(0.0), 0.0);
  EXPECT_DOUBLE_EQ(a.offset_noise(0.0), 0.0);
  // W is the running integral of B.
  double integral = 0.0;
  const double dt = 1e-4;
  for (double t = 0.0; t < 5.0 - dt / 2; t += dt) integral += a.skew_noise(t + dt / 2) * dt;
  EXPECT_NEAR(a.offset_noise(5.0), integral, 1e-3 * 320e-12 * 5.0 + 1e-16);
}

TEST(NoisePath, IncrementVarianceMatchesIntensity) {
  // Increments over 1 s have RMS rw_sigma; average over many paths.
  double sum_sq = 0.0;
  const int paths = 400;
  for (int s = 0; s < paths; ++s) {
    const NoisePath p(1.0, 0.0, 2.0, static_cast<std::uint64_t>(s) + 1);
    const double d = p.skew_noise(2.0) - p.skew_noise(1.0);
    sum_sq += d * d;
  }
  EXPECT_NEAR(std::sqrt(sum_sq / paths), 1.0, 0.1);
}
