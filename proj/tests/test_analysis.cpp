#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pdmp/analysis.hpp"

using namespace pdmp;

namespace {

PhaseState ps(std::initializer_list<double> x, std::initializer_list<double> y) {
  return {make_vec(x), make_vec(y)};
}

std::vector<TestFunction> standard_functions(int d) {
  namespace tf = test_functions;
  return {tf::position(0), tf::position_squared(0), tf::velocity(0), tf::position_velocity(0, 0),
          tf::bump(Vec::Zero(d), 1.5)};
}

// E[x^2] under the density proportional to exp(-Phi_M(|x|)), Phi_M(r) = r^2/2
// for r <= M and M^2/2 + M (r - M) beyond: the invariant law of the 1-d BPS
// with bounce rate min((x y)_+, M).
double truncated_second_moment(double cap) {
  auto phi = [cap](double r) { return r <= cap ? 0.5 * r * r : 0.5 * cap * cap + cap * (r - cap); };
  const double hi = cap + 60.0 / cap;
  const double z = integrate([&](double r) { return std::exp(-phi(r)); }, 0.0, hi, 1e-13);
  const double m2 = integrate([&](double r) { return r * r * std::exp(-phi(r)); }, 0.0, hi, 1e-13);
  return m2 / z;
}

}  // namespace

TEST(TestFunctions, GradientsMatchFiniteDifferences) {
  namespace tf = test_functions;
  const Potential u2 = gaussian_iso(2);
  Eigen::MatrixXd a(2, 2);
  a << 1.5, 0.3, 0.3, 0.7;
  const std::vector<TestFunction> fs = {
      tf::position(1),          tf::position_squared(0),    tf::velocity(1),
      tf::velocity_squared(0),  tf::position_velocity(0, 1), tf::bump(make_vec({0.2, -0.1}), 1.3),
      tf::bump(make_vec({0.2, -0.1}), 1.3, true),           tf::lyapunov(u2),
      tf::lyapunov(gaussian_aniso(a)),
      tf::combine(0.5, tf::position(0), -2.0, tf::bump(Vec::Zero(2), 2.0))};
  Rng rng(1);
  const double h = 1e-5;
  for (const auto& f : fs) {
    for (int k = 0; k < 200; ++k) {
      const PhaseState s{make_vec({rng.normal(), rng.normal()}), make_vec({rng.normal(), rng.normal()})};
      const Vec gx = f.gradient_x(s);
      const Vec gy = f.gradient_y(s);
      for (int i = 0; i < 2; ++i) {
        PhaseState p = s;
        PhaseState m = s;
        p.x[i] += h;
        m.x[i] -= h;
        const double scale = 1.0 + std::abs(f.value(s));
        EXPECT_NEAR(gx[i], (f.value(p) - f.value(m)) / (2 * h), 1e-5 * scale) << f.name;
        p = s;
        m = s;
        p.y[i] += h;
        m.y[i] -= h;
        EXPECT_NEAR(gy[i], (f.value(p) - f.value(m)) / (2 * h), 1e-5 * scale) << f.name;
      }
    }
  }
}

TEST(TestFunctions, LyapunovStepConstraints) {
  for (double r : {-10.0, -3.0, -2.0}) EXPECT_EQ(test_functions::lyapunov_step(r), 1.0);
  for (double r : {1.0, 2.0, 50.0}) EXPECT_LE(test_functions::lyapunov_step(r), 3.0);
  double prev = 0.0;
  for (double r = -3.0; r <= 2.0; r += 0.01) {
    const double v = test_functions::lyapunov_step(r);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Generator, Examples) {
  BpsSpec spec;
  spec.lambda_c = 1.7;
  const Characteristics bps = build_bps(spec);
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    const PhaseState s{make_vec({2.0 * rng.normal()}), make_vec({rng.uniform() < 0.5 ? -1.0 : 1.0})};
    EXPECT_EQ(apply_generator(bps, test_functions::constant(3.0), s), 0.0);
    EXPECT_DOUBLE_EQ(apply_generator(bps, test_functions::position(0), s), s.y[0]);
  }
  BpsSpec gauss = spec;
  gauss.velocity_space = VelocitySpace::std_gaussian(1);
  const Characteristics g = build_bps(gauss);
  const PhaseState s = ps({1.0}, {-0.8});  // <y, grad U> < 0
  EXPECT_NEAR(apply_generator(g, test_functions::velocity(0), s), -1.7 * -0.8, 1e-15);
}

TEST(Generator, BpsClosedForm) {
  // A f = y f_x + (x y)_+ (f(x, -y) - f) + lc (E f(x, w) - f) for f = x y.
  BpsSpec spec;
  spec.lambda_c = 0.6;
  const Characteristics bps = build_bps(spec);
  for (double x : {-1.5, 0.3, 2.0}) {
    for (double y : {-1.0, 1.0}) {
      const double expected = y * y + std::max(0.0, x * y) * (-2.0 * x * y) + 0.6 * (0.0 - x * y);
      EXPECT_NEAR(apply_generator(bps, test_functions::position_velocity(0, 0), ps({x}, {y})),
                  expected, 1e-14);
    }
  }
}

TEST(Generator, Linearity) {
  BpsSpec spec;
  spec.potential = gaussian_iso(2);
  spec.velocity_space = VelocitySpace::unit_sphere(2);
  const Characteristics ch = build_bps(spec);
  const auto f = test_functions::bump(make_vec({0.1, 0.2}), 1.5);
  const auto g = test_functions::position_velocity(0, 1);
  const auto combo = test_functions::combine(2.5, f, -0.7, g);
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const PhaseState s{make_vec({rng.normal(), rng.normal()}), spec.velocity_space.sample(rng)};
    const double lhs = apply_generator(ch, combo, s);
    const double rhs = 2.5 * apply_generator(ch, f, s) - 0.7 * apply_generator(ch, g, s);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Generator, InnerRuleSelection) {
  BpsSpec spec;
  spec.potential = gaussian_iso(2);
  spec.velocity_space = VelocitySpace::std_gaussian(2);
  const Characteristics ch = build_bps(spec);
  const auto v = test_functions::lyapunov(spec.potential);
  const PhaseState s = ps({0.5, 0.1}, {0.3, -0.2});
  EXPECT_THROW(apply_generator(ch, v, s), KernelExpectationUnavailable);
  const auto r = apply_generator_detailed(ch, v, s, InnerRule::AllowMonteCarlo);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_GT(r.inner_error, 0.0);
  // Finite-support refreshment is enumerated exactly.
  ZigZagSpec zz;
  zz.potential = gaussian_iso(2);
  zz.refresh_rate = 1.0;
  const auto z = apply_generator_detailed(build_zigzag(zz), test_functions::lyapunov(zz.potential),
                                          ps({0.5, 0.1}, {1.0, -1.0}));
  EXPECT_EQ(z.inner_error, 0.0);
}

TEST(Invariance, GaussianBpsPasses) {
  for (int d : {1, 2}) {
    BpsSpec spec;
    spec.potential = gaussian_iso(d);
    spec.velocity_space = VelocitySpace::unit_sphere(d);
    const Characteristics ch = build_bps(spec);
    const auto report = invariance_test(
        ch, gaussian_candidate(*spec.potential.precision, 1.0, spec.velocity_space),
        standard_functions(d), 100000, 4);
    EXPECT_TRUE(report.pass) << d;
    EXPECT_EQ(report.z_scores.size(), 5U);
  }
}

TEST(Invariance, WrongVarianceFails) {
  const BpsSpec spec;
  const Characteristics ch = build_bps(spec);
  const auto report = invariance_test(
      ch, gaussian_candidate(*spec.potential.precision, 4.0, spec.velocity_space),
      {test_functions::position_velocity(0, 0)}, 100000, 5);
  EXPECT_FALSE(report.pass);
  // E[A(x y)] = 1 - sigma^2 under N(0, sigma^2) x uniform{-1, 1}.
  EXPECT_NEAR(report.estimates[0].mean, -3.0, 4.0 * report.estimates[0].std_error);
  EXPECT_GT(std::abs(report.z_scores[0]), 4.0);
}

TEST(Invariance, FlowOnlyWithSymmetricCandidate) {
  const Characteristics ch{free_transport(), {}};
  const auto space = VelocitySpace::std_gaussian(2);
  const auto report = invariance_test(ch, gaussian_candidate(Eigen::MatrixXd::Identity(2, 2), 2.0, space),
                                      {test_functions::bump(Vec::Zero(2), 1.0)}, 20000, 6);
  EXPECT_TRUE(report.pass);
}

TEST(Invariance, ReproducibleUnderSeed) {
  const BpsSpec spec;
  const Characteristics ch = build_bps(spec);
  const auto cand = gaussian_candidate(*spec.potential.precision, 1.0, spec.velocity_space);
  const auto a = invariance_test(ch, cand, standard_functions(1), 5000, 7);
  const auto b = invariance_test(ch, cand, standard_functions(1), 5000, 7);
  for (std::size_t j = 0; j < a.z_scores.size(); ++j) EXPECT_EQ(a.z_scores[j], b.z_scores[j]);
  EXPECT_EQ(a.pass, b.pass);
}

TEST(Ergodic, ConstantFunction) {
  const Characteristics ch = build_bps(BpsSpec{});
  EngineConfig cfg;
  cfg.t_end = 200.0;
  const Trajectory t = simulate_c1(ch, ps({0.0}, {1.0}), cfg);
  const auto e = ergodic_average(t, ch.flow, test_functions::constant(1.0));
  EXPECT_NEAR(e.mean, 1.0, 1e-13);
  EXPECT_LT(e.std_error, 1e-12);
  EXPECT_EQ(e.n_batches, 20U);
  EXPECT_EQ(e.method, EstimateWithError::Method::BatchMeans);
}

TEST(Ergodic, TooShortTrajectory) {
  const Characteristics ch = build_bps(BpsSpec{});
  EngineConfig cfg;
  cfg.t_end = 5.0;
  const Trajectory t = simulate_c1(ch, ps({0.0}, {1.0}), cfg);
  EXPECT_THROW(ergodic_average(t, ch.flow, test_functions::position(0)), TrajectoryTooShort);
}

TEST(Ergodic, GaussianBpsMoments) {
  const Characteristics ch = build_bps(BpsSpec{});
  EngineConfig cfg;
  cfg.t_end = 2000.0;
  cfg.seed = 8;
  const Trajectory t = simulate_c1(ch, ps({0.0}, {1.0}), cfg);
  const auto m2 = ergodic_average(t, ch.flow, test_functions::position_squared(0));
  const auto m1 = ergodic_average(t, ch.flow, test_functions::position(0));
  EXPECT_NEAR(m2.mean, 1.0, 4.0 * m2.std_error);
  EXPECT_NEAR(m1.mean, 0.0, 4.0 * m1.std_error);
}

TEST(Ergodic, AccumulatorMatchesTrajectoryAverage) {
  const Characteristics ch = build_bps(BpsSpec{});
  EngineConfig cfg;
  cfg.t_end = 300.0;
  cfg.seed = 9;
  const auto f = test_functions::bump(Vec::Zero(1), 1.2);
  const Trajectory t = simulate_c1(ch, ps({0.0}, {1.0}), cfg);
  ErgodicAccumulator acc(ch.flow, {f}, cfg.t_end, 0.1);
  simulate(ch, ps({0.0}, {1.0}), cfg, acc);
  EXPECT_NEAR(acc.estimate(0).mean, ergodic_average(t, ch.flow, f).mean, 1e-12);
}

TEST(Ergodic, TruncatedBpsMatchesExactDensity) {
  for (double cap : {0.5, 1.0}) {
    BpsSpec spec;
    spec.variant = BpsSpec::Variant::Truncated;
    spec.cap = cap;
    const Characteristics ch = build_bps(spec);
    const InitialState init{Vec::Zero(1), spec.velocity_space, {}};
    const auto means = replica_ergodic_means(ch, init, {test_functions::position_squared(0)}, 2000.0,
                                             20, 10, 0.1);
    std::vector<double> col;
    for (const auto& m : means) col.push_back(m[0]);
    const auto e = iid_estimate(col);
    EXPECT_NEAR(e.mean, truncated_second_moment(cap), 4.0 * e.std_error) << cap;
  }
}

TEST(BiasSweep, UncappedIsExactlyUnbiasedAndProxyDecreases) {
  BpsSpec spec;
  const auto result = bias_sweep(spec, {1.0, 2.0, kInfinity}, {test_functions::position_squared(0)},
                                 400.0, 6, 11);
  ASSERT_EQ(result.rows.size(), 3U);
  EXPECT_EQ(result.rows[2].bias, 0.0);
  EXPECT_EQ(result.rows[2].bound_proxy, 0.0);
  EXPECT_TRUE(result.proxy_decreasing);
  EXPECT_GT(result.rows[0].bound_proxy, result.rows[1].bound_proxy);
  EXPECT_THROW(bias_sweep(spec, {2.0, 1.0}, {test_functions::position_squared(0)}, 100.0, 4, 1),
               ConfigError);
  EXPECT_THROW(bias_sweep(spec, {}, {test_functions::position_squared(0)}, 100.0, 4, 1), ConfigError);
}

TEST(BiasSweep, ProxyQuadrature) {
  // For U = x^2/2 in 1-d: B(M) = 2 int_M^inf (x - M) exp(sqrt(1 + x^2/2) - x^2/2) dx.
  const Potential u = gaussian_iso(1);
  for (double cap : {0.5, 2.0, 4.0}) {
    const double direct =
        2.0 * integrate([cap](double x) {
          return (x - cap) * std::exp(std::sqrt(1.0 + 0.5 * x * x) - 0.5 * x * x);
        }, cap, 40.0, 1e-14);
    // The integrand has a kink at |x| = M, so Simpson converges at second order.
    EXPECT_NEAR(truncation_bound_proxy(u, cap, 4001, 40.0), direct, 1e-3 * direct);
  }
  // Tensor rule in 2-d against the radial integral 2 pi int r (r - M)_+ e^{W-U} dr.
  const double cap = 1.5;
  const double radial = 2.0 * M_PI * integrate([cap](double r) {
    return r * (r - cap) * std::exp(std::sqrt(1.0 + 0.5 * r * r) - 0.5 * r * r);
  }, cap, 14.0, 1e-14);
  EXPECT_NEAR(truncation_bound_proxy(gaussian_iso(2), cap, 1201, 12.0), radial, 1e-3 * radial);
}

TEST(Semigroup, RichardsonSlopeMatchesGenerator) {
  BpsSpec spec;
  spec.lambda_c = 0.8;
  const Characteristics ch = build_bps(spec);
  const auto f = test_functions::bump(Vec::Zero(1), 2.0, true);
  const PhaseState s = ps({0.5}, {1.0});
  const double exact = apply_generator(ch, f, s);
  const auto r = richardson_slope(ch, s, f, 0.2, 200000, 12);
  EXPECT_NEAR(r.mean, exact, 4.0 * r.std_error);
  EXPECT_LT(r.std_error, 0.1);
}

TEST(Equivalence, SmallBatteryPasses) {
  const auto rows = equivalence_battery(BpsSpec{}, 2000, 3.0, 13);
  ASSERT_EQ(rows.size(), 8U);
  for (const auto& row : rows) EXPECT_GT(row.ks.p_value, 0.001) << row.name;
}
