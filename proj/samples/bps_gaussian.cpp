// Bouncy particle sampler on a 2-d Gaussian: one long run, ergodic averages
// of x_1 and x_1^2, and the event throughput.

#include <chrono>
#include <cstdio>

#include "pdmp/pdmp.hpp"

int main() {
  using namespace pdmp;
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.5, 0.5, 2.0;
  BpsSpec spec;
  spec.potential = gaussian_aniso(a);
  spec.velocity_space = VelocitySpace::unit_sphere(2);
  const Characteristics ch = build_bps(spec);

  EngineConfig cfg;
  cfg.t_end = 20000.0;
  cfg.max_events = 100'000'000;
  cfg.seed = 7;
  const InitialState init{Vec::Zero(2), spec.velocity_space, {}};

  ErgodicAccumulator acc(ch.flow, {test_functions::position(0), test_functions::position_squared(0)},
                         cfg.t_end, 0.1);
  const auto t0 = std::chrono::steady_clock::now();
  const RunSummary s = simulate(ch, init.draw(cfg.seed, ch.mechanisms.size()), cfg, acc);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double var_x1 = a.inverse()(0, 0);
  const auto m1 = acc.estimate(0);
  const auto m2 = acc.estimate(1);
  std::printf("status %s, %llu events in %.3f s (%.3g events/s)\n", to_string(s.status),
              static_cast<unsigned long long>(s.events), wall, s.events / wall);
  std::printf("E[x1]   = %.5f +- %.5f (target 0)\n", m1.mean, m1.std_error);
  std::printf("E[x1^2] = %.5f +- %.5f (target %.5f)\n", m2.mean, m2.std_error, var_x1);
  return 0;
}
