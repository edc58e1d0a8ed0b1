// Generator-based invariance check for the Zig-Zag process: the product of
// N(0, 1) and the uniform law on {-1, 1} passes, a stretched Gaussian fails.

#include <cstdio>

#include "pdmp/pdmp.hpp"

int main() {
  using namespace pdmp;
  ZigZagSpec spec;
  spec.potential = gaussian_iso(1);
  const Characteristics ch = build_zigzag(spec);
  const std::vector<TestFunction> fs = {test_functions::position(0),
                                        test_functions::position_squared(0),
                                        test_functions::position_velocity(0, 0),
                                        test_functions::bump(Vec::Zero(1), 1.5)};
  const auto space = VelocitySpace::signed_hypercube(1);
  for (double variance : {1.0, 4.0}) {
    const auto report =
        invariance_test(ch, gaussian_candidate(*spec.potential.precision, variance, space), fs,
                        100000, 11);
    std::printf("candidate variance %.1f: %s\n", variance, report.pass ? "PASS" : "FAIL");
    for (std::size_t j = 0; j < fs.size(); ++j) {
      std::printf("  %-8s mean %+.5f  z %+.2f\n", report.names[j].c_str(),
                  report.estimates[j].mean, report.z_scores[j]);
    }
  }
  return 0;
}
