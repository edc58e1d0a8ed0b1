#pragma once

// Synchronous coupling of two PDMPs sharing a flow. Three clocks compete:
//   r0 = lambda_1(x) ^ lambda_2(y)        both chains jump, maximally coupled
//   r1 = (lambda_1(x) - lambda_2(y))_+    chain 1 jumps alone
//   r2 = (lambda_2(y) - lambda_1(x))_+    chain 2 jumps alone
// so that r0 + r1 = lambda_1(x) and r0 + r2 = lambda_2(y), and each marginal
// is the standalone PDMP.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/engine.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/event_time.hpp"
#include "pdmp/mechanisms.hpp"
#include "pdmp/stats.hpp"

namespace pdmp {

using TimeBound = std::function<double(double)>;

struct CoupledCharacteristics {
  Flow flow;
  JumpMechanism first;
  JumpMechanism second;
  TimeBound g_bound = [](double) { return 0.0; };
};

struct PairState {
  PhaseState first;
  PhaseState second;

  bool equal() const { return same_state(first, second); }
};

struct ClockRates {
  double r0 = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
};

inline ClockRates coupling_rates(double lambda_1, double lambda_2) {
  return {std::min(lambda_1, lambda_2), std::max(0.0, lambda_1 - lambda_2),
          std::max(0.0, lambda_2 - lambda_1)};
}

// Normalised component weights of two kernels at one state, matched by
// alignment key.
struct AlignedKernels {
  std::vector<const KernelAction*> actions;
  std::vector<double> first;
  std::vector<double> second;

  double common_mass() const {
    double m = 0.0;
    for (std::size_t c = 0; c < first.size(); ++c) m += std::min(first[c], second[c]);
    return m;
  }
};

inline AlignedKernels align_kernels(const KernelSpec& k1, const KernelSpec& k2,
                                    const PhaseState& s) {
  static const KernelAction kIdentity = Identity{};
  AlignedKernels out;
  std::map<std::string, std::size_t> index;
  auto add = [&](const KernelSpec& k, bool is_first) {
    const auto w = k.weights(s);
    double total = 0.0;
    for (double v : w) total += v;
    auto slot = [&](const std::string& key, const KernelAction* action) -> std::size_t {
      auto [it, inserted] = index.emplace(key, out.actions.size());
      if (inserted) {
        out.actions.push_back(action);
        out.first.push_back(0.0);
        out.second.push_back(0.0);
      } else if (const auto* m1 = std::get_if<DeterministicMap>(out.actions[it->second])) {
        const auto* m2 = std::get_if<DeterministicMap>(action);
        if (!m2 || !same_state(m1->map(s), m2->map(s)))
          throw UnalignedKernels("deterministic maps sharing key '" + key + "' disagree");
      }
      return it->second;
    };
    if (!(total > 0.0)) {
      const std::size_t c = slot("identity", &kIdentity);
      (is_first ? out.first : out.second)[c] += 1.0;
      return;
    }
    for (std::size_t c = 0; c < k.size(); ++c) {
      if (w[c] <= 0.0) continue;
      const auto& action = k.components()[c].action;
      const std::size_t i = slot(alignment_key(action), &action);
      (is_first ? out.first : out.second)[i] += w[c] / total;
    }
  };
  add(k1, true);
  add(k2, false);
  return out;
}

// sup_A |Q1(s, A) - Q2(s, A)| for aligned mixture kernels.
inline double kernel_tv_distance(const KernelSpec& k1, const KernelSpec& k2, const PhaseState& s) {
  return std::max(0.0, 1.0 - align_kernels(k1, k2, s).common_mass());
}

struct KernelCouplingDraw {
  PhaseState first;
  PhaseState second;
  bool stayed_equal = false;
};

namespace detail {

inline std::size_t pick(const std::vector<double>& w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (w[c] <= 0.0) continue;
    last = c;
    if (u < w[c]) return c;
    u -= w[c];
  }
  return last;
}

}  // namespace detail

// Maximal coupling of Q1(s, .) and Q2(s, .): with probability equal to the
// common mass both chains take one shared draw; otherwise each draws from its
// residual part independently.
inline KernelCouplingDraw maximal_kernel_coupling(const KernelSpec& k1, const KernelSpec& k2,
                                                  const PhaseState& s, Rng& rng) {
  const AlignedKernels al = align_kernels(k1, k2, s);
  std::vector<double> common(al.actions.size());
  double mass = 0.0;
  for (std::size_t c = 0; c < common.size(); ++c) {
    common[c] = std::min(al.first[c], al.second[c]);
    mass += common[c];
  }
  if (rng.uniform() < mass) {
    const std::size_t c = detail::pick(common, rng);
    PhaseState out = apply_action(*al.actions[c], s, rng);
    return {out, out, true};
  }
  std::vector<double> rest1(common.size());
  std::vector<double> rest2(common.size());
  double sum1 = 0.0;
  double sum2 = 0.0;
  for (std::size_t c = 0; c < common.size(); ++c) {
    rest1[c] = std::max(0.0, al.first[c] - common[c]);
    rest2[c] = std::max(0.0, al.second[c] - common[c]);
    sum1 += rest1[c];
    sum2 += rest2[c];
  }
  if (!(sum1 > 0.0)) rest1 = al.first;
  if (!(sum2 > 0.0)) rest2 = al.second;
  PhaseState a = apply_action(*al.actions[detail::pick(rest1, rng)], s, rng);
  PhaseState b = apply_action(*al.actions[detail::pick(rest2, rng)], s, rng);
  const bool equal = same_state(a, b);
  return {std::move(a), std::move(b), equal};
}

// lambda_1 ^ lambda_2 sup_A |Q1 - Q2| + |lambda_1 - lambda_2| at a diagonal state.
inline double dominator_expression(const JumpMechanism& m1, const JumpMechanism& m2,
                                   const PhaseState& s) {
  const double l1 = m1.rate(s);
  const double l2 = m2.rate(s);
  return std::min(l1, l2) * kernel_tv_distance(m1.kernel, m2.kernel, s) + std::abs(l1 - l2);
}

inline TimeBound constant_g(double c) {
  return [c](double) { return c; };
}

// Exact vs smoothed(eps) BPS: the dominator is at most 4 eps.
inline TimeBound certified_g_smoothed(double eps) { return constant_g(4.0 * eps); }

// Exact vs truncated(M) BPS on a potential with Lipschitz gradient (constant
// `lipschitz`, gradient zero at the origin) and speeds bounded by `speed`,
// started within `radius` of the origin: the bounce rate reachable by time t
// is at most lipschitz * speed * (radius + speed t), and the dominator is at
// most twice its excess over M.
inline TimeBound certified_g_truncated(double cap, double radius, double speed, double lipschitz) {
  return [=](double t) {
    return 2.0 * std::max(0.0, lipschitz * speed * (radius + speed * t) - cap);
  };
}

struct CoupledEvent {
  double time = 0.0;
  PairState state;
  int clock = -1;  // 0 joint, 1 first only, 2 second only; -1 initial
  bool equal = true;
};

struct CoupledTrajectory {
  std::vector<CoupledEvent> events;
  std::optional<double> decouple_time;
  PairState final_state;
  double t_end = 0.0;
  RunStatus status = RunStatus::Completed;
};

inline CoupledTrajectory simulate_coupled(const CoupledCharacteristics& cc, const PairState& init,
                                          const EngineConfig& cfg, bool record_events = true) {
  cfg.validate();
  Rng streams[3] = {Rng(derive_seed(cfg.seed, 0)), Rng(derive_seed(cfg.seed, 1)),
                    Rng(derive_seed(cfg.seed, 2))};
  const Flow& flow = cc.flow;

  CoupledTrajectory out;
  PairState state = init;
  double t = 0.0;
  bool coupled = state.equal();
  if (!coupled) out.decouple_time = 0.0;
  if (record_events) out.events.push_back({0.0, state, -1, coupled});

  std::uint64_t events = 0;
  auto lambda_1 = [&](double h) { return cc.first.rate(flow(state.first, h)); };
  auto lambda_2 = [&](double h) { return cc.second.rate(flow(state.second, h)); };
  auto clock_rate = [&](int k) {
    return [&, k](double h) {
      const ClockRates r = coupling_rates(lambda_1(h), lambda_2(h));
      return k == 0 ? r.r0 : (k == 1 ? r.r1 : r.r2);
    };
  };

  try {
    for (;;) {
      const double horizon = cfg.t_end - t;
      double best = kInfinity;
      int winner = -1;
      for (int k = 0; k < 3; ++k) {
        const double e = streams[k].exponential();
        auto rate = clock_rate(k);
        const double h =
            numeric_first_passage(rate, e, horizon, initial_step_for(rate(0.0), e));
        if (h < best) {
          best = h;
          winner = k;
        }
      }
      if (winner < 0 || !(t + best <= cfg.t_end)) {
        state.first = flow(state.first, cfg.t_end - t);
        state.second = flow(state.second, cfg.t_end - t);
        out.t_end = cfg.t_end;
        break;
      }
      if (events >= cfg.max_events) {
        out.status = RunStatus::ExplosionSuspected;
        out.t_end = t;
        break;
      }
      PairState before{flow(state.first, best), flow(state.second, best)};
      Rng& rng = streams[winner];
      t += best;
      ++events;
      if (winner == 0) {
        if (before.equal()) {
          auto draw = maximal_kernel_coupling(cc.first.kernel, cc.second.kernel, before.first, rng);
          state = {std::move(draw.first), std::move(draw.second)};
        } else {
          state = {cc.first.kernel.sample(before.first, rng),
                   cc.second.kernel.sample(before.second, rng)};
        }
      } else if (winner == 1) {
        state = {cc.first.kernel.sample(before.first, rng), before.second};
      } else {
        state = {before.first, cc.second.kernel.sample(before.second, rng)};
      }
      const bool equal = state.equal();
      if (coupled && (winner != 0 || !equal)) {
        coupled = false;
        out.decouple_time = t;
      }
      if (record_events) out.events.push_back({t, state, winner, equal});
    }
  } catch (const RateBoundViolated&) {
    out.status = RunStatus::RateBoundViolated;
    out.t_end = t;
  }
  out.final_state = state;
  return out;
}

inline CoupledTrajectory simulate_coupled(const CoupledCharacteristics& cc, const PhaseState& init,
                                          const EngineConfig& cfg, bool record_events = true) {
  return simulate_coupled(cc, PairState{init, init}, cfg, record_events);
}

struct TvRow {
  double t = 0.0;
  double p_decouple = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct TvReport {
  std::vector<TvRow> rows;
  KsResult marginal_first;
  KsResult marginal_second;
  std::vector<double> decouple_times;  // +inf when never decoupled

  bool bound_holds() const {
    return std::all_of(rows.begin(), rows.end(), [](const TvRow& r) { return r.pass; });
  }
  bool marginals_match(double alpha = 0.01) const {
    return marginal_first.pass(alpha) && marginal_second.pass(alpha);
  }
  bool all_pass() const { return bound_holds() && marginals_match(); }
};

// 1 - exp(-int_0^t g).
inline double coupling_bound(const TimeBound& g, double t) {
  return -std::expm1(-integrate(g, 0.0, t, 1e-12));
}

// Empirical decoupling probabilities against the bound, plus KS checks of both
// time-t_max position marginals against standalone runs of each mechanism.
// Position marginals use the first coordinate.
inline TvReport verify_tv_bound(const CoupledCharacteristics& cc, const InitialState& init,
                                std::vector<double> t_grid, std::size_t n_runs,
                                std::uint64_t seed, std::uint64_t max_events = 1'000'000) {
  if (t_grid.empty()) throw ConfigError("t_grid must not be empty");
  if (n_runs < 2) throw ConfigError("n_runs must be at least 2");
  std::sort(t_grid.begin(), t_grid.end());
  const double t_max = t_grid.back();
  if (!(t_max > 0.0)) throw ConfigError("t_grid needs a positive time");

  TvReport report;
  std::vector<double> coupled_first;
  std::vector<double> coupled_second;
  report.decouple_times.reserve(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) {
    EngineConfig cfg;
    cfg.t_end = t_max;
    cfg.max_events = max_events;
    cfg.seed = replica_seed(seed, 3, r);
    const PhaseState s0 = init.draw(cfg.seed, 3);
    const CoupledTrajectory traj = simulate_coupled(cc, s0, cfg, false);
    report.decouple_times.push_back(traj.decouple_time.value_or(kInfinity));
    coupled_first.push_back(traj.final_state.first.x[0]);
    coupled_second.push_back(traj.final_state.second.x[0]);
  }

  const double n = static_cast<double>(n_runs);
  for (double t : t_grid) {
    const double hits = static_cast<double>(std::count_if(
        report.decouple_times.begin(), report.decouple_times.end(),
        [t](double d) { return d <= t; }));
    TvRow row;
    row.t = t;
    row.p_decouple = hits / n;
    row.std_error = std::sqrt(row.p_decouple * (1.0 - row.p_decouple) / n);
    row.bound = coupling_bound(cc.g_bound, t);
    row.pass = row.p_decouple <= row.bound + 3.0 * row.std_error;
    report.rows.push_back(row);
  }

  auto standalone = [&](const JumpMechanism& m, std::uint64_t stream) {
    const Characteristics ch{cc.flow, {m}};
    std::vector<double> xs;
    xs.reserve(n_runs);
    const std::uint64_t master = derive_seed(seed, stream);
    for (std::size_t r = 0; r < n_runs; ++r) {
      EngineConfig cfg;
      cfg.t_end = t_max;
      cfg.max_events = max_events;
      cfg.seed = replica_seed(master, 1, r);
      xs.push_back(run_summary(ch, init.draw(cfg.seed, 1), cfg).final_state.x[0]);
    }
    return xs;
  };
  report.marginal_first = ks_two_sample(coupled_first, standalone(cc.first, 1001));
  report.marginal_second = ks_two_sample(coupled_second, standalone(cc.second, 1002));
  return report;
}

}  // namespace pdmp
