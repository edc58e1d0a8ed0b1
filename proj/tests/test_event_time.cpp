#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pdmp/event_time.hpp"
#include "pdmp/samplers.hpp"
#include "pdmp/stats.hpp"

using namespace pdmp;

namespace {

double numeric_affine(double a, double b, double e) {
  return numeric_first_passage([a, b](double s) { return std::max(0.0, a + b * s); }, e);
}

void expect_agree(double a, double b, double e) {
  const double analytic = affine_first_passage(a, b, e);
  const double numeric = numeric_affine(a, b, e);
  if (std::isinf(analytic)) {
    EXPECT_TRUE(std::isinf(numeric)) << a << ' ' << b << ' ' << e;
  } else {
    EXPECT_NEAR(numeric, analytic, 1e-8 * analytic) << a << ' ' << b << ' ' << e;
    EXPECT_NEAR(affine_hazard(a, b, analytic), e, 1e-10 * (1.0 + e));
  }
}

}  // namespace

TEST(AffineInversion, Examples) {
  EXPECT_DOUBLE_EQ(affine_first_passage(1.0, 0.0, 2.0), 2.0);
  EXPECT_NEAR(affine_first_passage(-1.0, 1.0, 2.0), 3.0, 1e-14);
  EXPECT_NEAR(numeric_affine(-1.0, 1.0, 2.0), 3.0, 1e-8 * 3.0);
  EXPECT_TRUE(std::isinf(affine_first_passage(-1.0, 0.0, 1.0)));
  EXPECT_TRUE(std::isinf(numeric_affine(-1.0, 0.0, 1.0)));
}

TEST(AffineInversion, FiveSignCasesAgainstNumeric) {
  // a > 0, b > 0
  expect_agree(1.5, 0.7, 2.3);
  // a <= 0, b > 0
  expect_agree(-2.0, 0.5, 0.4);
  expect_agree(0.0, 3.0, 1.0);
  // a > 0, b < 0, level reached before the rate dies
  expect_agree(2.0, -1.0, 1.5);
  // a > 0, b < 0, total hazard a^2/(2|b|) = 2 below the level
  expect_agree(2.0, -1.0, 2.5);
  // a <= 0, b < 0
  expect_agree(-0.5, -1.0, 0.3);
  // b = 0
  expect_agree(0.8, 0.0, 1.2);
}

TEST(AffineInversion, RandomTriplesAgree) {
  Rng rng(1);
  for (int k = 0; k < 300; ++k) {
    const double a = 4.0 * rng.uniform() - 2.0;
    const double b = k % 7 == 0 ? 0.0 : 4.0 * rng.uniform() - 2.0;
    const double e = rng.exponential();
    expect_agree(a, b, e);
  }
}

TEST(AffineHazard, MatchesQuadrature) {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const double a = 4.0 * rng.uniform() - 2.0;
    const double b = 4.0 * rng.uniform() - 2.0;
    const double h = 3.0 * rng.uniform();
    const double q = integrate([a, b](double s) { return std::max(0.0, a + b * s); }, 0.0, h, 1e-13);
    EXPECT_NEAR(affine_hazard(a, b, h), q, 1e-10);
  }
}

TEST(Integrate, SmoothIntegrand) {
  EXPECT_NEAR(integrate([](double s) { return std::sin(s); }, 0.0, M_PI, 1e-13), 2.0, 1e-12);
  EXPECT_NEAR(integrate([](double s) { return std::exp(-s * s); }, -6.0, 6.0, 1e-13),
              std::sqrt(M_PI), 1e-11);
}

TEST(NumericInversion, HorizonAndFailure) {
  // Hazard reaches 1 at t = 10, beyond the horizon.
  EXPECT_TRUE(std::isinf(numeric_first_passage([](double) { return 0.1; }, 1.0, 5.0)));
  EXPECT_NEAR(numeric_first_passage([](double) { return 0.1; }, 1.0, 20.0), 10.0, 1e-9);
  // A tiny but non-vanishing rate cannot be bracketed within 2^40 steps.
  EXPECT_THROW(numeric_first_passage([](double) { return 1e-24; }, 1.0), NumericInversionFailed);
  // A rate that vanishes for good yields +inf.
  EXPECT_TRUE(std::isinf(
      numeric_first_passage([](double s) { return s < 1.0 ? 0.5 : 0.0; }, 1.0)));
}

TEST(SampleEventTime, StrategiesAgreeOnBpsBounce) {
  const Potential u = gaussian_iso(2);
  const auto space = VelocitySpace::unit_sphere(2);
  JumpMechanism analytic = bps_bounce(u, space);
  JumpMechanism numeric = analytic;
  numeric.capability = Numeric{};
  const Flow flow = free_transport();
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const PhaseState s{make_vec({2.0 * rng.normal(), 2.0 * rng.normal()}), space.sample(rng)};
    const double e = rng.exponential();
    const double ta = sample_event_time(analytic, s, flow, e, rng);
    const double tn = sample_event_time(numeric, s, flow, e, rng);
    EXPECT_NEAR(tn, ta, 1e-8 * ta);
  }
}

TEST(SampleEventTime, AffineCoefficientsMatchRateAlongFlow) {
  Eigen::MatrixXd a(2, 2);
  a << 1.5, 0.4, 0.4, 0.8;
  const Potential u = gaussian_aniso(a);
  const auto space = VelocitySpace::std_gaussian(2);
  const JumpMechanism m = bps_bounce(u, space);
  const auto& coef = std::get<AnalyticAffine>(m.capability).coefficients;
  const Flow flow = free_transport();
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const PhaseState s{make_vec({rng.normal(), rng.normal()}), space.sample(rng)};
    const double t = 3.0 * rng.uniform();
    const auto [ca, cb] = coef(s);
    EXPECT_NEAR(std::max(0.0, ca + cb * t), m.rate(flow(s, t)), 1e-10);
  }
}

TEST(SampleEventTime, ThinningHasTheExactLaw) {
  // Rate (x y)_+ from x = 0.5, y = 1: thinned event times vs inversion.
  const Potential u = gaussian_iso(1);
  JumpMechanism exact = bps_bounce(u, VelocitySpace::unit_sphere(1));
  JumpMechanism bounded = exact;
  bounded.capability = BoundedBy{10.0};
  const Flow flow = free_transport();
  const PhaseState s{make_vec({0.5}), make_vec({1.0})};
  Rng r1(5);
  Rng r2(6);
  std::vector<double> a(20000);
  std::vector<double> b(20000);
  for (auto& t : a) t = sample_event_time(exact, s, flow, r1.exponential(), r1, 9.0);
  for (auto& t : b) t = sample_event_time(bounded, s, flow, r2.exponential(), r2, 9.0);
  EXPECT_GT(ks_two_sample(a, b).p_value, 0.001);
}

TEST(SampleEventTime, ThinningDetectsBadBound) {
  const JumpMechanism exact = bps_bounce(gaussian_iso(1), VelocitySpace::unit_sphere(1));
  JumpMechanism bounded = exact;
  bounded.capability = BoundedBy{0.1};
  Rng rng(7);
  const PhaseState s{make_vec({3.0}), make_vec({1.0})};
  EXPECT_THROW(sample_event_time(bounded, s, free_transport(), 1.0, rng), RateBoundViolated);
}
