#pragma once

// First-passage times of the integrated hazard along the flow:
//   h* = inf{h >= 0 : int_0^h lambda(phi_s(start)) ds >= E}.
// Three strategies, chosen by the mechanism's capability tag.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "pdmp/errors.hpp"
#include "pdmp/mechanisms.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/state_space.hpp"

namespace pdmp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Numeric inversion settings: horizon doubling up to 2^40 initial steps,
// bisection/Newton to relative time tolerance 1e-10.
inline constexpr int kMaxDoublings = 40;
inline constexpr double kTimeTolerance = 1e-10;
inline constexpr double kHazardTolerance = 1e-9;

// int_0^h (a + b s)_+ ds.
inline double affine_hazard(double a, double b, double h) {
  if (!(h > 0.0)) return 0.0;
  auto primitive = [a, b](double u) { return a * u + 0.5 * b * u * u; };
  if (b == 0.0) return a > 0.0 ? a * h : 0.0;
  const double root = -a / b;
  if (b > 0.0) {
    const double lo = std::max(0.0, root);
    return h > lo ? primitive(h) - primitive(lo) : 0.0;
  }
  if (root <= 0.0) return 0.0;
  const double hi = std::min(h, root);
  return primitive(hi);
}

// Closed-form inverse of affine_hazard; +inf when the hazard never reaches E.
inline double affine_first_passage(double a, double b, double e) {
  if (b == 0.0) return a > 0.0 ? e / a : kInfinity;
  if (b > 0.0) {
    if (a >= 0.0) return 2.0 * e / (a + std::sqrt(a * a + 2.0 * b * e));
    return -a / b + std::sqrt(2.0 * e / b);
  }
  if (a <= 0.0) return kInfinity;
  const double disc = a * a + 2.0 * b * e;  // b < 0
  if (disc < 0.0) return kInfinity;         // total hazard a^2 / 2|b| < E
  return 2.0 * e / (a + std::sqrt(disc));
}

namespace detail {

template <class F>
double simpson_recurse(F& f, double a, double b, double fa, double fm, double fb, double whole,
                       double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol || (b - a) < 1e-300) {
    return left + right + delta / 15.0;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
template <class F>
double integrate(F&& f, double a, double b, double tol, int max_depth = 48) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  // Split once so a kink at the midpoint cannot fool the first comparison.
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  return detail::simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, max_depth) +
         detail::simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, max_depth);
}

// First passage of the integrated hazard of `rate_at(h)` over level e, by
// step-doubling bracketing then safeguarded Newton. Returns +inf when the
// hazard stays below e up to `horizon` or flattens out for good.
template <class RateAt>
double numeric_first_passage(RateAt&& rate_at, double e, double horizon = kInfinity,
                             double initial_step = 1.0) {
  if (!(e > 0.0)) return 0.0;
  const double quad_tol = 1e-13 * (1.0 + e);
  double step = std::isfinite(horizon) ? std::min(initial_step, horizon) : initial_step;
  if (!(step > 0.0)) return kInfinity;

  double lo = 0.0;
  double hazard_lo = 0.0;
  double hi = 0.0;
  double hazard_hi = 0.0;
  bool bracketed = false;
  double last_increment = 0.0;
  for (int k = 0; k <= kMaxDoublings; ++k) {
    hi = lo + step;
    last_increment = integrate(rate_at, lo, hi, quad_tol);
    hazard_hi = hazard_lo + last_increment;
    if (hazard_hi >= e) {
      bracketed = true;
      break;
    }
    if (hi >= horizon) return kInfinity;
    lo = hi;
    hazard_lo = hazard_hi;
    step *= 2.0;
  }
  if (!bracketed) {
    if (last_increment <= quad_tol) return kInfinity;
    throw NumericInversionFailed("hazard did not reach the exponential level within 2^40 steps");
  }

  double x = lo;
  double hazard_x = hazard_lo;
  for (int iter = 0; iter < 300; ++iter) {
    const double rate = rate_at(x);
    double next = rate > 0.0 ? x + (e - hazard_x) / rate : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double hazard_next =
        next >= x ? hazard_x + integrate(rate_at, x, next, quad_tol)
                  : hazard_lo + integrate(rate_at, lo, next, quad_tol);
    if (hazard_next < e) {
      lo = next;
      hazard_lo = hazard_next;
    } else {
      hi = next;
      hazard_hi = hazard_next;
    }
    const bool converged_hazard = std::abs(hazard_next - e) <= 1e-14 * (1.0 + e);
    const bool converged_time = std::abs(next - x) <= kTimeTolerance * 1e-2 * next ||
                                (hi - lo) <= kTimeTolerance * hi;
    x = next;
    hazard_x = hazard_next;
    if (converged_hazard || converged_time) return x;
  }
  return x;
}

// Rate of mechanism m at flow time h from `start`.
inline auto rate_along(const JumpMechanism& m, const PhaseState& start, const Flow& flow) {
  return [&m, &start, &flow](double h) { return m.rate(flow(start, h)); };
}

// Initial bracketing step scaled to the local rate so the doubling stays short.
inline double initial_step_for(double rate0, double e) {
  if (rate0 > 0.0) return std::clamp(e / rate0, 1e-6, 1.0);
  return 1.0;
}

// Integrated hazard of m over [0, h] along the flow from start.
inline double integrated_hazard(const JumpMechanism& m, const PhaseState& start, const Flow& flow,
                                double h) {
  if (!(h > 0.0)) return 0.0;
  if (const auto* affine = std::get_if<AnalyticAffine>(&m.capability)) {
    const auto [a, b] = affine->coefficients(start);
    return affine_hazard(a, b, h);
  }
  return integrate(rate_along(m, start, flow), 0.0, h, 1e-13);
}

// Deterministic inverse of the hazard at level e (no thinning).
inline double hazard_first_passage(const JumpMechanism& m, const PhaseState& start,
                                   const Flow& flow, double e, double horizon = kInfinity) {
  if (const auto* affine = std::get_if<AnalyticAffine>(&m.capability)) {
    const auto [a, b] = affine->coefficients(start);
    return affine_first_passage(a, b, e);
  }
  return numeric_first_passage(rate_along(m, start, flow), e, horizon,
                               initial_step_for(m.rate(start), e));
}

// Thinning against a constant bound; the first proposal uses level e.
inline double thinned_first_passage(const JumpMechanism& m, double bound, const PhaseState& start,
                                    const Flow& flow, double e, Rng& rng,
                                    double horizon = kInfinity) {
  double t = 0.0;
  double level = e;
  const std::size_t max_proposals = std::size_t{1} << 40;
  for (std::size_t k = 0; k < max_proposals; ++k) {
    t += level / bound;
    if (t > horizon) return kInfinity;
    const double r = m.rate(flow(start, t));
    if (r > bound * (1.0 + 1e-12)) throw RateBoundViolated(r, bound);
    if (rng.uniform() * bound < r) return t;
    level = rng.exponential();
  }
  return kInfinity;
}

// Event time of mechanism m from start given an exponential level e.
// Times beyond `horizon` may be reported as +inf.
inline double sample_event_time(const JumpMechanism& m, const PhaseState& start, const Flow& flow,
                                double e, Rng& rng, double horizon = kInfinity) {
  return std::visit(
      [&](const auto& cap) -> double {
        using T = std::decay_t<decltype(cap)>;
        if constexpr (std::is_same_v<T, AnalyticAffine>) {
          const auto [a, b] = cap.coefficients(start);
          return affine_first_passage(a, b, e);
        } else if constexpr (std::is_same_v<T, BoundedBy>) {
          return thinned_first_passage(m, cap.bound, start, flow, e, rng, horizon);
        } else {
          return numeric_first_passage(rate_along(m, start, flow), e, horizon,
                                       initial_step_for(m.rate(start), e));
        }
      },
      m.capability);
}

}  // namespace pdmp
