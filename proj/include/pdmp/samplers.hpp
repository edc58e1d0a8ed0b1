#pragma once

// Concrete samplers assembled from the mechanism algebra: the Bouncy Particle
// Sampler (exact, truncated, smoothed, thinned) and the Zig-Zag process.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/engine.hpp"
#include "pdmp/mechanisms.hpp"
#include "pdmp/state_space.hpp"

namespace pdmp {

// How a non-Gaussian bounce rate is turned into event times.
enum class EventTimeStrategy { Analytic, Bounded, Numeric };

struct BpsSpec {
  enum class Variant { Exact, Truncated, Smoothed, Thinned };

  Potential potential = gaussian_iso(1);
  VelocitySpace velocity_space = VelocitySpace::unit_sphere(1);
  double lambda_c = 1.0;
  Variant variant = Variant::Exact;
  double cap = kInfinity;       // Truncated
  double eps = 0.1;             // Smoothed
  double lambda_star = 10.0;    // Thinned, or the BoundedBy bound
  EventTimeStrategy strategy = EventTimeStrategy::Analytic;

  void validate() const {
    if (!(lambda_c > 0.0)) throw ConfigError("lambda_c must be positive");
    if (potential.dim != velocity_space.dim())
      throw ConfigError("potential and velocity space dimensions differ");
    if (variant == Variant::Smoothed && !(eps > 0.0)) throw ConfigError("eps must be positive");
    if (variant == Variant::Thinned && !(lambda_star > 0.0))
      throw ConfigError("lambda_star must be positive");
    if (variant == Variant::Truncated && std::isnan(cap)) throw ConfigError("M must be a number");
  }
};

struct ZigZagSpec {
  Potential potential = gaussian_iso(1);
  std::optional<double> refresh_rate;
  bool full_reversal = false;
  EventTimeStrategy strategy = EventTimeStrategy::Analytic;
  double bound = 10.0;

  int dim() const { return potential.dim; }
};

inline JumpMechanism bps_bounce(const Potential& u, const VelocitySpace& space) {
  auto grad = u.gradient;
  RateFn rate = [grad](const PhaseState& s) { return std::max(0.0, s.y.dot(grad(s.x))); };
  KernelSpec kernel = KernelSpec::deterministic("bps_reflect", [grad, space](const PhaseState& s) {
    PhaseState r = reflect(s, grad(s.x));
    r.y = space.project(std::move(r.y));
    return r;
  });
  EventTimeCapability cap = Numeric{};
  if (u.precision) {
    const Eigen::MatrixXd a = *u.precision;
    cap = AnalyticAffine{[a](const PhaseState& s) {
      const Vec ay = a * s.y;
      return std::pair{ay.dot(s.x), ay.dot(s.y)};
    }};
  }
  return {"bps_bounce", rate, std::move(kernel), std::move(cap)};
}

inline JumpMechanism bps_refresh(const VelocitySpace& space, double lambda_c) {
  return constant_rate_mechanism("refresh", lambda_c, KernelSpec::refreshment(space));
}

inline Characteristics build_bps(const BpsSpec& spec) {
  spec.validate();
  JumpMechanism bounce = bps_bounce(spec.potential, spec.velocity_space);
  if (spec.strategy == EventTimeStrategy::Bounded) {
    bounce.capability = BoundedBy{spec.lambda_star};
  } else if (spec.strategy == EventTimeStrategy::Numeric) {
    bounce.capability = Numeric{};
  }  // Analytic keeps the closed form when the potential is quadratic
  switch (spec.variant) {
    case BpsSpec::Variant::Exact:
      break;
    case BpsSpec::Variant::Truncated:
      bounce = truncate_rate(bounce, spec.cap);
      break;
    case BpsSpec::Variant::Smoothed:
      bounce.name = "smoothed_bounce";
      bounce.rate = smoothed_bps_rate(spec.potential, spec.eps);
      bounce.capability = Numeric{};
      break;
    case BpsSpec::Variant::Thinned:
      bounce = thin_to_constant(bounce, spec.lambda_star);
      break;
  }
  return {free_transport(), {std::move(bounce), bps_refresh(spec.velocity_space, spec.lambda_c)}};
}

inline JumpMechanism zigzag_flip(const Potential& u, int i, bool full_reversal) {
  auto grad = u.gradient;
  RateFn rate = [grad, i](const PhaseState& s) { return std::max(0.0, s.y[i] * grad(s.x)[i]); };
  KernelSpec kernel =
      full_reversal
          ? KernelSpec::deterministic("zigzag_reverse",
                                      [](const PhaseState& s) { return PhaseState{s.x, -s.y}; })
          : KernelSpec::deterministic("zigzag_flip_" + std::to_string(i + 1),
                                      [i](const PhaseState& s) {
                                        PhaseState r = s;
                                        r.y[i] = -r.y[i];
                                        return r;
                                      });
  EventTimeCapability cap = Numeric{};
  if (u.precision) {
    const Eigen::MatrixXd a = *u.precision;
    cap = AnalyticAffine{[a, i](const PhaseState& s) {
      return std::pair{s.y[i] * a.row(i).dot(s.x), s.y[i] * a.row(i).dot(s.y)};
    }};
  }
  return {"zigzag_flip_" + std::to_string(i + 1), rate, std::move(kernel), std::move(cap)};
}

inline Characteristics build_zigzag(const ZigZagSpec& spec) {
  Characteristics ch{free_transport(), {}};
  for (int i = 0; i < spec.dim(); ++i) {
    JumpMechanism m = zigzag_flip(spec.potential, i, spec.full_reversal);
    if (spec.strategy == EventTimeStrategy::Bounded) {
      m.capability = BoundedBy{spec.bound};
    } else if (spec.strategy == EventTimeStrategy::Numeric) {
      m.capability = Numeric{};
    }
    ch.mechanisms.push_back(std::move(m));
  }
  if (spec.refresh_rate && *spec.refresh_rate > 0.0) {
    ch.mechanisms.push_back(
        bps_refresh(VelocitySpace::signed_hypercube(spec.dim()), *spec.refresh_rate));
  }
  return ch;
}

}  // namespace pdmp
