#pragma once

// Generator evaluation, Monte Carlo invariance tests, ergodic averages and the
// invariant-measure bias sweep for rate-truncated samplers.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/engine.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/event_time.hpp"
#include "pdmp/mechanisms.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/samplers.hpp"
#include "pdmp/state_space.hpp"
#include "pdmp/stats.hpp"

namespace pdmp {

// A test function f(x, y) with its partial gradients. `refresh_mean`, when
// set, returns E_{w ~ mu}[f(x, w)] in closed form.
struct TestFunction {
  std::string name;
  std::function<double(const PhaseState&)> value;
  std::function<Vec(const PhaseState&)> gradient_x;
  std::function<Vec(const PhaseState&)> gradient_y;
  double support_radius = kInfinity;
  std::function<std::optional<double>(const PhaseState&, const VelocitySpace&)> refresh_mean;

  double operator()(const PhaseState& s) const { return value(s); }
};

namespace test_functions {

inline Vec unit(int d, int i) {
  Vec e = Vec::Zero(d);
  e[i] = 1.0;
  return e;
}

inline TestFunction constant(double c) {
  return {"const",
          [c](const PhaseState&) { return c; },
          [](const PhaseState& s) -> Vec { return Vec::Zero(s.dim()); },
          [](const PhaseState& s) -> Vec { return Vec::Zero(s.dim()); },
          kInfinity,
          [c](const PhaseState&, const VelocitySpace&) -> std::optional<double> { return c; }};
}

inline TestFunction position(int i = 0) {
  return {"x" + std::to_string(i + 1),
          [i](const PhaseState& s) { return s.x[i]; },
          [i](const PhaseState& s) -> Vec { return unit(s.dim(), i); },
          [](const PhaseState& s) -> Vec { return Vec::Zero(s.dim()); },
          kInfinity,
          [i](const PhaseState& s, const VelocitySpace&) -> std::optional<double> {
            return s.x[i];
          }};
}

inline TestFunction position_squared(int i = 0) {
  return {"x" + std::to_string(i + 1) + "^2",
          [i](const PhaseState& s) { return s.x[i] * s.x[i]; },
          [i](const PhaseState& s) -> Vec { return 2.0 * s.x[i] * unit(s.dim(), i); },
          [](const PhaseState& s) -> Vec { return Vec::Zero(s.dim()); },
          kInfinity,
          [i](const PhaseState& s, const VelocitySpace&) -> std::optional<double> {
            return s.x[i] * s.x[i];
          }};
}

inline TestFunction velocity(int i = 0) {
  return {"y" + std::to_string(i + 1),
          [i](const PhaseState& s) { return s.y[i]; },
          [](const PhaseState& s) -> Vec { return Vec::Zero(s.dim()); },
          [i](const PhaseState& s) -> Vec { return unit(s.dim(), i); },
          kInfinity,
          [](const PhaseState&, const VelocitySpace&) -> std::optional<double> { return 0.0; }};
}

inline TestFunction velocity_squared(int i = 0) {
  return {"y" + std::to_string(i + 1) + "^2",
          [i](const PhaseState& s) { return s.y[i] * s.y[i]; },
          [](const PhaseState& s) -> Vec { return Vec::Zero(s.dim()); },
          [i](const PhaseState& s) -> Vec { return 2.0 * s.y[i] * unit(s.dim(), i); },
          kInfinity,
          [](const PhaseState&, const VelocitySpace& v) -> std::optional<double> {
            return v.second_moment();
          }};
}

inline TestFunction position_velocity(int i = 0, int j = 0) {
  return {"x" + std::to_string(i + 1) + "y" + std::to_string(j + 1),
          [i, j](const PhaseState& s) { return s.x[i] * s.y[j]; },
          [i, j](const PhaseState& s) -> Vec { return s.y[j] * unit(s.dim(), i); },
          [i, j](const PhaseState& s) -> Vec { return s.x[i] * unit(s.dim(), j); },
          kInfinity,
          [](const PhaseState&, const VelocitySpace&) -> std::optional<double> { return 0.0; }};
}

// exp(1 - 1/(1 - u)) for u = |x - c|^2 / r^2 < 1, zero outside; equals 1 at c.
inline double bump_profile(double u) { return u < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u)) : 0.0; }

inline double bump_profile_derivative(double u) {
  if (u >= 1.0) return 0.0;
  const double q = 1.0 - u;
  return -bump_profile(u) / (q * q);
}

// Smooth compactly supported bump in x, optionally tilted by (1 + y_1).
inline TestFunction bump(Vec center, double radius, bool velocity_tilt = false) {
  const double r2 = radius * radius;
  auto u_of = [center, r2](const PhaseState& s) { return (s.x - center).squaredNorm() / r2; };
  auto tilt = [velocity_tilt](const PhaseState& s) { return velocity_tilt ? 1.0 + s.y[0] : 1.0; };
  return {velocity_tilt ? "bump_tilted" : "bump",
          [u_of, tilt](const PhaseState& s) { return bump_profile(u_of(s)) * tilt(s); },
          [u_of, tilt, center, r2](const PhaseState& s) -> Vec {
            return (bump_profile_derivative(u_of(s)) * tilt(s) * 2.0 / r2) * (s.x - center);
          },
          [u_of, velocity_tilt](const PhaseState& s) -> Vec {
            Vec g = Vec::Zero(s.dim());
            if (velocity_tilt) g[0] = bump_profile(u_of(s));
            return g;
          },
          radius,
          [u_of](const PhaseState& s, const VelocitySpace&) -> std::optional<double> {
            return bump_profile(u_of(s));  // E[1 + w_1] = 1
          }};
}

inline TestFunction combine(double alpha, const TestFunction& f, double beta,
                            const TestFunction& g) {
  TestFunction out;
  out.name = "combo(" + f.name + "," + g.name + ")";
  out.value = [=](const PhaseState& s) { return alpha * f.value(s) + beta * g.value(s); };
  out.gradient_x = [=](const PhaseState& s) -> Vec {
    return alpha * f.gradient_x(s) + beta * g.gradient_x(s);
  };
  out.gradient_y = [=](const PhaseState& s) -> Vec {
    return alpha * f.gradient_y(s) + beta * g.gradient_y(s);
  };
  out.support_radius = std::max(f.support_radius, g.support_radius);
  if (f.refresh_mean && g.refresh_mean) {
    out.refresh_mean = [=](const PhaseState& s,
                           const VelocitySpace& v) -> std::optional<double> {
      const auto a = f.refresh_mean(s, v);
      const auto b = g.refresh_mean(s, v);
      if (!a || !b) return std::nullopt;
      return alpha * *a + beta * *b;
    };
  }
  return out;
}

// C^2 increasing step: 1 for r <= -2, 3 for r >= 1 (quintic smootherstep).
inline double lyapunov_step(double r) {
  const double t = std::clamp((r + 2.0) / 3.0, 0.0, 1.0);
  return 1.0 + 2.0 * t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

inline double lyapunov_step_derivative(double r) {
  if (r <= -2.0 || r >= 1.0) return 0.0;
  const double t = (r + 2.0) / 3.0;
  return 2.0 * 30.0 * t * t * (t - 1.0) * (t - 1.0) / 3.0;
}

// V(x, y) = exp(W(x)) step(<y, grad W(x)>) with W = sqrt(1 + U).
inline TestFunction lyapunov(const Potential& u) {
  if (!u.hessian_action) throw Error("lyapunov function needs the potential's Hessian action");
  auto value = u.value;
  auto grad = u.gradient;
  auto hess = u.hessian_action;
  auto parts = [value, grad](const PhaseState& s) {
    const double w = std::sqrt(1.0 + value(s.x));
    const Vec gu = grad(s.x);
    const Vec gw = gu / (2.0 * w);
    return std::tuple{w, gu, gw};
  };
  TestFunction f;
  f.name = "lyapunov";
  f.value = [parts](const PhaseState& s) {
    const auto [w, gu, gw] = parts(s);
    return std::exp(w) * lyapunov_step(s.y.dot(gw));
  };
  f.gradient_x = [parts, hess](const PhaseState& s) -> Vec {
    const auto [w, gu, gw] = parts(s);
    const double r = s.y.dot(gw);
    // Hessian of W applied to y: H_U y / (2W) - grad U <grad U, y> / (4 W^3).
    const Vec hw_y = hess(s.x, s.y) / (2.0 * w) - gu * (gu.dot(s.y) / (4.0 * w * w * w));
    return std::exp(w) * (lyapunov_step(r) * gw + lyapunov_step_derivative(r) * hw_y);
  };
  f.gradient_y = [parts](const PhaseState& s) -> Vec {
    const auto [w, gu, gw] = parts(s);
    return std::exp(w) * lyapunov_step_derivative(s.y.dot(gw)) * gw;
  };
  return f;
}

}  // namespace test_functions

// How E_{w ~ mu}[f(x, w)] is obtained when f has no closed form.
enum class InnerRule { ClosedFormOrEnumeration, AllowMonteCarlo };

inline constexpr int kInnerNodes = 64;

struct GeneratorValue {
  double value = 0.0;
  double inner_error = 0.0;  // Monte Carlo error of refreshment expectations
};

namespace detail {

struct InnerExpectation {
  double value;
  double error;
};

inline InnerExpectation refresh_expectation(const Refreshment& r, const TestFunction& f,
                                            const PhaseState& s, InnerRule rule) {
  const double atom = r.space.contains(s.y) ? r.space.atom_mass() : 0.0;
  auto exclude = [&](double mean) {
    if (!r.exclude_current || atom <= 0.0) return mean;
    return (mean - atom * f.value(s)) / (1.0 - atom);
  };
  if (f.refresh_mean) {
    if (const auto v = f.refresh_mean(s, r.space)) return {exclude(*v), 0.0};
  }
  if (r.space.is_finite_support()) {
    const auto points = r.space.support();
    double sum = 0.0;
    for (const auto& w : points) sum += f.value({s.x, w});
    return {exclude(sum / static_cast<double>(points.size())), 0.0};
  }
  if (rule == InnerRule::ClosedFormOrEnumeration) {
    throw KernelExpectationUnavailable("no closed-form refreshment expectation for " + f.name +
                                       " under " + r.space.key());
  }
  // Fixed 64-node Monte Carlo rule: the same nodes at every call.
  Rng rng(0x5eedf00dULL);
  std::array<double, kInnerNodes> vals{};
  for (auto& v : vals) v = f.value({s.x, r.space.sample(rng)});
  const auto est = iid_estimate(vals);
  return {est.mean, est.std_error};
}

inline InnerExpectation kernel_expectation(const KernelSpec& k, const TestFunction& f,
                                           const PhaseState& s, InnerRule rule) {
  const auto w = k.weights(s);
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) return {f.value(s), 0.0};
  double mean = 0.0;
  double var = 0.0;
  for (std::size_t c = 0; c < k.size(); ++c) {
    if (w[c] <= 0.0) continue;
    const double p = w[c] / total;
    const auto& action = k.components()[c].action;
    if (const auto* m = std::get_if<DeterministicMap>(&action)) {
      mean += p * f.value(m->map(s));
    } else if (const auto* r = std::get_if<Refreshment>(&action)) {
      const auto e = refresh_expectation(*r, f, s, rule);
      mean += p * e.value;
      var += p * p * e.error * e.error;
    } else {
      mean += p * f.value(s);
    }
  }
  return {mean, std::sqrt(var)};
}

}  // namespace detail

// Af = D_phi f + sum_i lambda_i (Q_i f - f).
inline GeneratorValue apply_generator_detailed(const Characteristics& ch, const TestFunction& f,
                                               const PhaseState& s,
                                               InnerRule rule = InnerRule::ClosedFormOrEnumeration) {
  GeneratorValue out;
  if (ch.flow.free_transport) {
    out.value = s.y.dot(f.gradient_x(s));
  } else {
    const double h = 1e-6;
    out.value = (f.value(ch.flow(s, h)) - f.value(s)) / h;
  }
  const double fs = f.value(s);
  double var = 0.0;
  for (const auto& m : ch.mechanisms) {
    const double rate = m.rate(s);
    if (!(rate > 0.0)) continue;
    const auto q = detail::kernel_expectation(m.kernel, f, s, rule);
    out.value += rate * (q.value - fs);
    var += rate * rate * q.error * q.error;
  }
  out.inner_error = std::sqrt(var);
  return out;
}

inline double apply_generator(const Characteristics& ch, const TestFunction& f, const PhaseState& s,
                              InnerRule rule = InnerRule::ClosedFormOrEnumeration) {
  return apply_generator_detailed(ch, f, s, rule).value;
}

using CandidateSampler = std::function<PhaseState(Rng&)>;

// x ~ N(0, variance_scale * precision^{-1}), y ~ mu independently.
inline CandidateSampler gaussian_candidate(const Eigen::MatrixXd& precision, double variance_scale,
                                           const VelocitySpace& space) {
  const Eigen::MatrixXd cov = variance_scale * precision.inverse();
  const Eigen::MatrixXd chol = cov.llt().matrixL();
  const int d = static_cast<int>(precision.rows());
  return [chol, d, space](Rng& rng) {
    Vec z(d);
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    return PhaseState{chol * z, space.sample(rng)};
  };
}

inline constexpr double kInvarianceZThreshold = 4.0;

struct InvarianceReport {
  std::vector<std::string> names;
  std::vector<EstimateWithError> estimates;
  std::vector<double> z_scores;
  bool pass = true;
};

// Estimates E_mu[Af] for each f from n i.i.d. candidate draws; PASS iff every
// |z| <= 4.
inline InvarianceReport invariance_test(const Characteristics& ch, const CandidateSampler& candidate,
                                        const std::vector<TestFunction>& fs, std::size_t n,
                                        std::uint64_t seed,
                                        InnerRule rule = InnerRule::ClosedFormOrEnumeration) {
  Rng rng(derive_seed(seed, 0));
  std::vector<std::vector<double>> values(fs.size(), std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const PhaseState s = candidate(rng);
    for (std::size_t j = 0; j < fs.size(); ++j) values[j][k] = apply_generator(ch, fs[j], s, rule);
  }
  InvarianceReport report;
  for (std::size_t j = 0; j < fs.size(); ++j) {
    const auto est = iid_estimate(values[j]);
    report.names.push_back(fs[j].name);
    report.estimates.push_back(est);
    report.z_scores.push_back(est.z_score());
    if (!(std::abs(report.z_scores.back()) <= kInvarianceZThreshold)) report.pass = false;
  }
  return report;
}

// Gauss-Legendre, 8 nodes: exact for polynomials up to degree 15, hence for
// polynomial f along the linear flow.
inline constexpr std::array<double, 4> kGl8Nodes = {0.1834346424956498, 0.5255324099163290,
                                                    0.7966664774136267, 0.9602898564975363};
inline constexpr std::array<double, 4> kGl8Weights = {0.3626837833783620, 0.3137066458778873,
                                                      0.2223810344533745, 0.1012285362903763};

inline double segment_integral(const Flow& flow, const TestFunction& f, const PhaseState& start,
                               double from, double to) {
  if (!(to > from)) return 0.0;
  const double half = 0.5 * (to - from);
  const double mid = 0.5 * (to + from);
  double sum = 0.0;
  for (std::size_t i = 0; i < kGl8Nodes.size(); ++i) {
    sum += kGl8Weights[i] * (f.value(flow(start, mid - half * kGl8Nodes[i])) +
                             f.value(flow(start, mid + half * kGl8Nodes[i])));
  }
  return half * sum;
}

inline constexpr std::size_t kBatchCount = 20;

// Time averages over [burn_in, t_end] split into equal-length batches.
// Works as an engine observer.
class ErgodicAccumulator {
 public:
  ErgodicAccumulator(const Flow& flow, std::vector<TestFunction> fs, double t_end,
                     double burn_in_fraction, std::size_t n_batches = kBatchCount)
      : flow_(&flow),
        fs_(std::move(fs)),
        start_(burn_in_fraction * t_end),
        end_(t_end),
        width_((t_end - burn_in_fraction * t_end) / static_cast<double>(n_batches)),
        batches_(fs_.size(), std::vector<double>(n_batches, 0.0)) {
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
      throw Error("burn-in fraction must lie in [0, 1)");
  }

  void on_event(const Event& e) {
    if (e.time >= start_ && e.type != 0) ++events_after_burn_in_;
  }

  void on_segment(double t0, const PhaseState& s, double t1) {
    double a = std::max(t0, start_);
    const double b = std::min(t1, end_);
    const std::size_t nb = batches_.empty() ? 0 : batches_[0].size();
    while (a < b) {
      auto k = static_cast<std::size_t>((a - start_) / width_);
      k = std::min(k, nb - 1);
      const double batch_end = k + 1 == nb ? end_ : start_ + static_cast<double>(k + 1) * width_;
      const double c = std::min(b, batch_end);
      for (std::size_t j = 0; j < fs_.size(); ++j) {
        batches_[j][k] += segment_integral(*flow_, fs_[j], s, a - t0, c - t0);
      }
      if (c <= a) break;
      a = c;
    }
  }

  std::size_t events_after_burn_in() const { return events_after_burn_in_; }

  EstimateWithError estimate(std::size_t j = 0) const {
    std::vector<double> means(batches_[j].size());
    for (std::size_t k = 0; k < means.size(); ++k) means[k] = batches_[j][k] / width_;
    return batch_means_estimate(means, events_after_burn_in_);
  }

  std::size_t size() const { return fs_.size(); }

 private:
  const Flow* flow_;
  std::vector<TestFunction> fs_;
  double start_;
  double end_;
  double width_;
  std::vector<std::vector<double>> batches_;
  std::size_t events_after_burn_in_ = 0;
};

inline constexpr std::size_t kMinEventsAfterBurnIn = 40;

// (1/(T - b)) int_b^T f(X_s) ds with a 20-batch standard error.
inline EstimateWithError ergodic_average(const Trajectory& traj, const Flow& flow,
                                         const TestFunction& f, double burn_in_fraction = 0.1) {
  if (traj.events.empty() || !(traj.t_end > 0.0)) throw TrajectoryTooShort("empty trajectory");
  ErgodicAccumulator acc(flow, {f}, traj.t_end, burn_in_fraction);
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    acc.on_event(traj.events[k]);
    const double to = k + 1 < traj.events.size() ? traj.events[k + 1].time : traj.t_end;
    acc.on_segment(traj.events[k].time, traj.events[k].state, to);
  }
  if (acc.events_after_burn_in() < kMinEventsAfterBurnIn) {
    throw TrajectoryTooShort("only " + std::to_string(acc.events_after_burn_in()) +
                             " events after burn-in; need " +
                             std::to_string(kMinEventsAfterBurnIn));
  }
  return acc.estimate(0);
}

// Per-replica ergodic estimates (one per test function) of a sampler started
// at x = 0 with y ~ mu. Replica r uses seed replica_seed(seed, l, r).
inline std::vector<std::vector<double>> replica_ergodic_means(
    const Characteristics& ch, const InitialState& init, const std::vector<TestFunction>& fs,
    double t_end, std::size_t n_replicas, std::uint64_t seed, double burn_in_fraction,
    unsigned threads = 1, std::uint64_t max_events = 100'000'000) {
  std::vector<std::vector<double>> out(n_replicas, std::vector<double>(fs.size()));
  parallel_for(n_replicas, threads, [&](std::size_t r) {
    EngineConfig cfg;
    cfg.t_end = t_end;
    cfg.max_events = max_events;
    cfg.seed = replica_seed(seed, ch.mechanisms.size(), r);
    ErgodicAccumulator acc(ch.flow, fs, t_end, burn_in_fraction);
    const RunSummary s = simulate(ch, init.draw(cfg.seed, ch.mechanisms.size()), cfg, acc);
    require_completed(s);
    for (std::size_t j = 0; j < fs.size(); ++j) out[r][j] = acc.estimate(j).mean;
  });
  return out;
}

// int (|grad U(x)| - M)_+ exp(W(x) - U(x)) dx with W = sqrt(1 + U), by
// composite Simpson on [-L, L]^d (d = 1 or 2) with `nodes` points per axis.
inline double truncation_bound_proxy(const Potential& u, double cap, int nodes = 2001,
                                     double half_width = 12.0) {
  if (nodes < 3) throw Error("quadrature needs at least 3 nodes");
  if (nodes % 2 == 0) ++nodes;
  const double h = 2.0 * half_width / (nodes - 1);
  auto integrand = [&](const Vec& x) {
    const double uval = u.value(x);
    const double excess = std::max(0.0, u.gradient(x).norm() - cap);
    if (excess <= 0.0) return 0.0;
    return excess * std::exp(std::sqrt(1.0 + uval) - uval);
  };
  auto weight = [nodes](int i) { return (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  if (u.dim == 1) {
    double sum = 0.0;
    Vec x(1);
    for (int i = 0; i < nodes; ++i) {
      x[0] = -half_width + i * h;
      sum += weight(i) * integrand(x);
    }
    return sum * h / 3.0;
  }
  if (u.dim == 2) {
    double sum = 0.0;
    Vec x(2);
    for (int i = 0; i < nodes; ++i) {
      x[0] = -half_width + i * h;
      for (int j = 0; j < nodes; ++j) {
        x[1] = -half_width + j * h;
        sum += weight(i) * weight(j) * integrand(x);
      }
    }
    return sum * h * h / 9.0;
  }
  throw Error("truncation bound proxy is evaluated by quadrature in d = 1 or 2 only");
}

struct BiasRow {
  double cap = 0.0;
  std::string function;
  EstimateWithError estimate;
  double bias = 0.0;
  double bias_std_error = 0.0;
  double bound_proxy = 0.0;
};

struct BiasSweepResult {
  std::vector<EstimateWithError> reference;  // exact sampler, one per f
  std::vector<BiasRow> rows;                 // cap-major, then f
  bool monotone = true;
  bool last_cap_unbiased = true;
  bool proxy_decreasing = true;

  bool pass() const { return monotone && last_cap_unbiased && proxy_decreasing; }
};

struct BiasSweepOptions {
  double burn_in_fraction = 0.1;
  int quad_nodes = 2001;
  double quad_half_width = 12.0;
  unsigned threads = 1;
  double z = 4.0;
};

// For each cap M: ergodic estimates of E[f] under the truncated sampler, the
// bias against the exact sampler (paired by replica seed), and the
// quadrature proxy B(M).
inline BiasSweepResult bias_sweep(const BpsSpec& base, const std::vector<double>& caps,
                                  const std::vector<TestFunction>& fs, double t_end,
                                  std::size_t n_replicas, std::uint64_t seed,
                                  const BiasSweepOptions& opt = {}) {
  if (caps.empty()) throw ConfigError("caps must not be empty");
  if (!std::is_sorted(caps.begin(), caps.end())) throw ConfigError("caps must be increasing");
  if (n_replicas < 2) throw ConfigError("bias sweep needs at least 2 replicas");
  const InitialState init{Vec::Zero(base.potential.dim), base.velocity_space, {}};

  BpsSpec exact = base;
  exact.variant = BpsSpec::Variant::Exact;
  const auto ref = replica_ergodic_means(build_bps(exact), init, fs, t_end, n_replicas, seed,
                                         opt.burn_in_fraction, opt.threads);

  BiasSweepResult result;
  for (std::size_t j = 0; j < fs.size(); ++j) {
    std::vector<double> col(n_replicas);
    for (std::size_t r = 0; r < n_replicas; ++r) col[r] = ref[r][j];
    result.reference.push_back(iid_estimate(col));
  }

  double previous_proxy = kInfinity;
  std::vector<BiasRow> previous;
  for (double cap : caps) {
    BpsSpec spec = base;
    spec.variant = BpsSpec::Variant::Truncated;
    spec.cap = cap;
    const auto est = replica_ergodic_means(build_bps(spec), init, fs, t_end, n_replicas, seed,
                                           opt.burn_in_fraction, opt.threads);
    const double proxy = std::isinf(cap) ? 0.0
                                         : truncation_bound_proxy(base.potential, cap,
                                                                  opt.quad_nodes,
                                                                  opt.quad_half_width);
    if (!(proxy < previous_proxy)) result.proxy_decreasing = false;
    previous_proxy = proxy;

    std::vector<BiasRow> current;
    for (std::size_t j = 0; j < fs.size(); ++j) {
      std::vector<double> col(n_replicas);
      std::vector<double> diff(n_replicas);
      for (std::size_t r = 0; r < n_replicas; ++r) {
        col[r] = est[r][j];
        diff[r] = est[r][j] - ref[r][j];
      }
      const auto d = iid_estimate(diff);
      BiasRow row{cap, fs[j].name, iid_estimate(col), d.mean, d.std_error, proxy};
      if (!previous.empty()) {
        const BiasRow& p = previous[j];
        if (std::abs(row.bias) - std::abs(p.bias) > opt.z * (row.bias_std_error + p.bias_std_error))
          result.monotone = false;
      }
      current.push_back(row);
      result.rows.push_back(row);
    }
    previous = std::move(current);
  }
  for (const auto& row : previous) {
    if (std::abs(row.bias) > opt.z * row.bias_std_error) result.last_cap_unbiased = false;
  }
  return result;
}

// (E[f(X_h)] - f(x)) / h from n independent runs of length h.
inline EstimateWithError semigroup_slope(const Characteristics& ch, const PhaseState& s,
                                         const TestFunction& f, double h, std::size_t n,
                                         std::uint64_t seed) {
  std::vector<double> diffs(n);
  const double f0 = f.value(s);
  EngineConfig cfg;
  cfg.t_end = h;
  for (std::size_t r = 0; r < n; ++r) {
    cfg.seed = replica_seed(seed, ch.mechanisms.size(), r);
    diffs[r] = (f.value(run_summary(ch, s, cfg).final_state) - f0) / h;
  }
  return iid_estimate(diffs);
}

// Second-order Richardson extrapolation of the slope from h, h/2, h/4:
// (8 D(h/4) - 6 D(h/2) + D(h)) / 3, independent runs at each step.
inline EstimateWithError richardson_slope(const Characteristics& ch, const PhaseState& s,
                                          const TestFunction& f, double h, std::size_t n,
                                          std::uint64_t seed) {
  const auto d1 = semigroup_slope(ch, s, f, h, n, derive_seed(seed, 1));
  const auto d2 = semigroup_slope(ch, s, f, 0.5 * h, n, derive_seed(seed, 2));
  const auto d4 = semigroup_slope(ch, s, f, 0.25 * h, n, derive_seed(seed, 4));
  EstimateWithError out;
  out.mean = (8.0 * d4.mean - 6.0 * d2.mean + d1.mean) / 3.0;
  out.std_error = std::sqrt(64.0 * d4.std_error * d4.std_error + 36.0 * d2.std_error * d2.std_error +
                            d1.std_error * d1.std_error) /
                  3.0;
  out.n = 3 * n;
  return out;
}

// Marginal observables of a batch of independent runs to time t.
struct MarginalSample {
  std::vector<double> first_jump;  // +inf when no jump before t
  std::vector<double> position;    // x_1 at time t
  std::vector<double> jump_count;
};

inline MarginalSample sample_marginals(const Characteristics& ch, const InitialState& init,
                                       EngineConfig cfg, std::size_t n_runs, std::uint64_t seed,
                                       unsigned threads = 1) {
  MarginalSample out;
  out.first_jump.resize(n_runs);
  out.position.resize(n_runs);
  out.jump_count.resize(n_runs);
  parallel_for(n_runs, threads, [&](std::size_t r) {
    EngineConfig c = cfg;
    c.seed = replica_seed(seed, ch.mechanisms.size(), r);
    struct FirstJump {
      double time = kInfinity;
      void on_event(const Event& e) {
        if (e.type != 0 && time == kInfinity) time = e.time;
      }
    } obs;
    const RunSummary s = simulate(ch, init.draw(c.seed, ch.mechanisms.size()), c, obs);
    require_completed(s);
    out.first_jump[r] = obs.time;
    out.position[r] = s.final_state.x[0];
    out.jump_count[r] = static_cast<double>(s.events);
  });
  return out;
}

struct EquivalenceRow {
  std::string name;
  KsResult ks;
};

// Two-sample KS battery on a BPS: construction equivalence (first jump, time-t
// position, jump count), superposition (list / total / minimal), thinning
// against the base sampler, and phantom-rate augmentation. Every arm runs on
// its own master seed.
inline std::vector<EquivalenceRow> equivalence_battery(const BpsSpec& spec, std::size_t n_runs,
                                                       double t, std::uint64_t seed,
                                                       double lambda_star = 10.0,
                                                       unsigned threads = 1) {
  const Characteristics bps = build_bps(spec);
  const InitialState init{Vec::Zero(spec.potential.dim), spec.velocity_space, {}};
  EngineConfig cfg;
  cfg.t_end = t;
  auto arm = [&](const Characteristics& ch, Construction c, std::uint64_t id) {
    EngineConfig local = cfg;
    local.construction = c;
    return sample_marginals(ch, init, local, n_runs, derive_seed(seed, id), threads);
  };

  std::vector<EquivalenceRow> rows;
  const auto c1 = arm(bps, Construction::C1, 1);
  const auto c2 = arm(bps, Construction::C2, 2);
  rows.push_back({"c1_vs_c2_first_jump", ks_two_sample(c1.first_jump, c2.first_jump)});
  rows.push_back({"c1_vs_c2_position", ks_two_sample(c1.position, c2.position)});
  rows.push_back({"c1_vs_c2_jump_count", ks_two_sample(c1.jump_count, c2.jump_count)});

  const Characteristics total{bps.flow, {total_mechanism(bps.mechanisms)}};
  const Characteristics minimal{bps.flow, {minimal_mechanism(bps.mechanisms)}};
  const auto list_arm = arm(bps, Construction::C1, 3);
  const auto total_arm = arm(total, Construction::C1, 4);
  const auto minimal_arm = arm(minimal, Construction::C1, 5);
  rows.push_back({"list_vs_total_position", ks_two_sample(list_arm.position, total_arm.position)});
  rows.push_back(
      {"list_vs_minimal_position", ks_two_sample(list_arm.position, minimal_arm.position)});
  rows.push_back(
      {"total_vs_minimal_position", ks_two_sample(total_arm.position, minimal_arm.position)});

  BpsSpec thinned_spec = spec;
  thinned_spec.variant = BpsSpec::Variant::Thinned;
  thinned_spec.lambda_star = lambda_star;
  const auto thinned = arm(build_bps(thinned_spec), Construction::C1, 6);
  const auto plain = arm(bps, Construction::C1, 7);
  rows.push_back({"thinned_vs_analytic_position", ks_two_sample(thinned.position, plain.position)});

  Characteristics phantom{bps.flow, add_phantom_rate(bps.mechanisms[0],
                                                     [](const PhaseState&) { return 1.0; },
                                                     AnalyticAffine{[](const PhaseState&) {
                                                       return std::pair{1.0, 0.0};
                                                     }})};
  phantom.mechanisms.push_back(bps.mechanisms[1]);
  const auto with_phantom = arm(phantom, Construction::C1, 8);
  rows.push_back({"phantom_vs_plain_position", ks_two_sample(with_phantom.position, plain.position)});
  return rows;
}

}  // namespace pdmp
