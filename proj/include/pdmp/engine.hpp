#pragma once

// The event loop. A PDMP is simulated from its characteristics either with
// fresh competing clocks at every event (Construction 1) or with residual
// hazards carried forward for the losing mechanisms (Construction 2).
//
// Randomness: mechanism j (0-based) owns the stream derive_seed(seed, j) and
// draws both its exponential levels and its kernel randomness from it, in
// both constructions. With one mechanism the two constructions therefore
// produce identical paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/event_time.hpp"
#include "pdmp/mechanisms.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/state_space.hpp"

namespace pdmp {

struct Characteristics {
  Flow flow;
  std::vector<JumpMechanism> mechanisms;
};

enum class Construction { C1, C2 };
enum class Recording { SkeletonOnly, SkeletonPlusGrid };
enum class RunStatus { Completed, ExplosionSuspected, RateBoundViolated };

inline const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed:
      return "completed";
    case RunStatus::ExplosionSuspected:
      return "explosion_suspected";
    case RunStatus::RateBoundViolated:
      return "rate_bound_violated";
  }
  return "unknown";
}

struct EngineConfig {
  double t_end = 1.0;
  std::uint64_t max_events = 1'000'000;
  std::uint64_t seed = 0;
  Construction construction = Construction::C1;
  Recording record = Recording::SkeletonOnly;
  double grid_dt = 0.1;

  void validate() const {
    if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
    if (max_events < 1) throw ConfigError("max_events must be at least 1");
    if (record == Recording::SkeletonPlusGrid && !(grid_dt > 0.0))
      throw ConfigError("grid dt must be positive");
  }
};

// One skeleton point. `type` is the 1-based mechanism index; 0 marks the
// initial point S_0 = 0.
struct Event {
  double time = 0.0;
  PhaseState state;
  int type = 0;
  bool phantom = false;
};

struct GridPoint {
  double time = 0.0;
  PhaseState state;
};

struct RunSummary {
  double t_reached = 0.0;
  RunStatus status = RunStatus::Completed;
  std::uint64_t events = 0;
  std::uint64_t phantoms = 0;
  PhaseState final_state;
};

struct Trajectory {
  std::vector<Event> events;
  std::vector<GridPoint> grid;
  double t_end = 0.0;
  RunStatus status = RunStatus::Completed;
  PhaseState final_state;

  std::size_t jump_count() const { return events.empty() ? 0 : events.size() - 1; }
  std::size_t phantom_count() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const Event& e) { return e.phantom; }));
  }
  std::size_t true_jump_count() const { return jump_count() - phantom_count(); }

  // First event time whose type lies in [first_type, last_type]; +inf if none.
  double first_time_of_types(int first_type, int last_type) const {
    for (const auto& e : events) {
      if (e.type >= first_type && e.type <= last_type) return e.time;
    }
    return kInfinity;
  }
};

namespace detail {

template <class Observer>
void notify_event(Observer& obs, const Event& e) {
  if constexpr (requires { obs.on_event(e); }) obs.on_event(e);
}

template <class Observer>
void notify_segment(Observer& obs, double t0, const PhaseState& start, double t1) {
  if constexpr (requires { obs.on_segment(t0, start, t1); }) obs.on_segment(t0, start, t1);
}

struct NullObserver {};

}  // namespace detail

// Core loop; the observer sees every skeleton event (including the initial
// point) and every flow segment [t0, t1) started from `start`.
template <class Observer>
RunSummary simulate(const Characteristics& ch, const PhaseState& init, const EngineConfig& cfg,
                    Observer&& obs) {
  cfg.validate();
  const std::size_t n = ch.mechanisms.size();
  const Flow& flow = ch.flow;

  std::vector<Rng> streams;
  streams.reserve(n);
  for (std::size_t j = 0; j < n; ++j) streams.emplace_back(derive_seed(cfg.seed, j));

  RunSummary summary;
  PhaseState state = init;
  double t = 0.0;
  detail::notify_event(obs, Event{0.0, state, 0, false});

  // Construction 2 residual hazards.
  std::vector<double> residual(n);
  if (cfg.construction == Construction::C2) {
    for (std::size_t j = 0; j < n; ++j) residual[j] = streams[j].exponential();
  }
  std::vector<double> clocks(n);

  auto finish = [&](RunStatus status, double t_stop) {
    if (t_stop > t) {
      detail::notify_segment(obs, t, state, t_stop);
      state = flow(state, t_stop - t);
    }
    summary.t_reached = t_stop;
    summary.status = status;
    summary.final_state = state;
    return summary;
  };

  try {
    for (;;) {
      const double horizon = cfg.t_end - t;
      double best = kInfinity;
      std::size_t winner = n;
      for (std::size_t j = 0; j < n; ++j) {
        double h;
        if (cfg.construction == Construction::C1) {
          h = sample_event_time(ch.mechanisms[j], state, flow, streams[j].exponential(), streams[j],
                                horizon);
        } else {
          // Residual levels need the exact hazard, so BoundedBy mechanisms are
          // inverted numerically here rather than thinned.
          h = hazard_first_passage(ch.mechanisms[j], state, flow, residual[j], horizon);
        }
        clocks[j] = h;
        if (h < best) {  // strict: ties go to the smallest index
          best = h;
          winner = j;
        }
      }

      if (winner == n || !(t + best <= cfg.t_end)) return finish(RunStatus::Completed, cfg.t_end);
      if (summary.events >= cfg.max_events) return finish(RunStatus::ExplosionSuspected, t);

      detail::notify_segment(obs, t, state, t + best);
      const PhaseState before = flow(state, best);

      if (cfg.construction == Construction::C2) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j == winner) continue;
          residual[j] = std::max(
              0.0, residual[j] - integrated_hazard(ch.mechanisms[j], state, flow, best));
        }
      }

      PhaseState after = ch.mechanisms[winner].kernel.sample(before, streams[winner]);
      if (cfg.construction == Construction::C2) residual[winner] = streams[winner].exponential();

      const bool phantom = same_state(after, before);
      t += best;
      state = std::move(after);
      ++summary.events;
      if (phantom) ++summary.phantoms;
      detail::notify_event(obs, Event{t, state, static_cast<int>(winner) + 1, phantom});
    }
  } catch (const RateBoundViolated&) {
    summary.t_reached = t;
    summary.status = RunStatus::RateBoundViolated;
    summary.final_state = state;
    return summary;
  }
}

namespace detail {

struct RecordingObserver {
  Trajectory* traj;
  bool grid = false;
  double dt = 0.1;
  const Flow* flow = nullptr;
  std::uint64_t next_grid = 0;

  void on_event(const Event& e) { traj->events.push_back(e); }

  void on_segment(double t0, const PhaseState& start, double t1) {
    if (!grid) return;
    for (;;) {
      const double tg = static_cast<double>(next_grid) * dt;
      if (tg >= t1) break;
      if (tg >= t0) traj->grid.push_back({tg, (*flow)(start, tg - t0)});
      ++next_grid;
    }
  }
};

}  // namespace detail

inline Trajectory record_trajectory(const Characteristics& ch, const PhaseState& init,
                                    const EngineConfig& cfg) {
  Trajectory traj;
  detail::RecordingObserver obs{&traj, cfg.record == Recording::SkeletonPlusGrid, cfg.grid_dt,
                                &ch.flow};
  const RunSummary s = simulate(ch, init, cfg, obs);
  traj.t_end = s.t_reached;
  traj.status = s.status;
  traj.final_state = s.final_state;
  if (obs.grid && s.status == RunStatus::Completed) {
    const double tg = static_cast<double>(obs.next_grid) * cfg.grid_dt;
    if (tg <= s.t_reached * (1.0 + 1e-15)) traj.grid.push_back({tg, s.final_state});
  }
  return traj;
}

inline Trajectory simulate_c1(const Characteristics& ch, const PhaseState& init, EngineConfig cfg) {
  cfg.construction = Construction::C1;
  return record_trajectory(ch, init, cfg);
}

inline Trajectory simulate_c2(const Characteristics& ch, const PhaseState& init, EngineConfig cfg) {
  cfg.construction = Construction::C2;
  return record_trajectory(ch, init, cfg);
}

// Turns an incomplete run into the matching exception.
inline void require_completed(const RunSummary& s) {
  switch (s.status) {
    case RunStatus::Completed:
      return;
    case RunStatus::ExplosionSuspected:
      throw ExplosionSuspected("event cap reached at t = " + std::to_string(s.t_reached));
    case RunStatus::RateBoundViolated:
      throw RateBoundViolated(kInfinity, 0.0);
  }
}

// Summary-only run, used by bulk experiments.
inline RunSummary run_summary(const Characteristics& ch, const PhaseState& init,
                              const EngineConfig& cfg) {
  return simulate(ch, init, cfg, detail::NullObserver{});
}

// Empirical CDF on [0, inf]; +inf samples count as "never".
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> samples) : samples_(std::move(samples)) {
    std::sort(samples_.begin(), samples_.end());
  }
  double operator()(double u) const {
    if (samples_.empty()) return 0.0;
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), u);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
  }
  const std::vector<double>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }

 private:
  std::vector<double> samples_;
};

// Draws an initial state: fixed position, velocity from `space` on the
// replica's initial-state stream.
struct InitialState {
  Vec x;
  std::optional<VelocitySpace> space;
  Vec y;

  PhaseState draw(std::uint64_t seed, std::size_t mechanism_count) const {
    if (!space) return {x, y};
    Rng rng(derive_seed(seed, mechanism_count));
    return {x, space->sample(rng)};
  }
};

// Samples of T = first jump time of a type in (split, l]; +inf when no such
// jump happens before t_end.
inline EmpiricalCdf first_type_jump_time(const Characteristics& ch, std::size_t split,
                                         const InitialState& init, const EngineConfig& cfg,
                                         std::size_t n_runs) {
  if (split < 1 || split >= ch.mechanisms.size())
    throw Error("split must satisfy 1 <= split < number of mechanisms");
  std::vector<double> samples;
  samples.reserve(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) {
    EngineConfig c = cfg;
    c.seed = replica_seed(cfg.seed, ch.mechanisms.size(), r);
    struct FirstOfType {
      int first;
      double time = kInfinity;
      void on_event(const Event& e) {
        if (e.type > first && time == kInfinity) time = e.time;
      }
    } obs{static_cast<int>(split)};
    simulate(ch, init.draw(c.seed, ch.mechanisms.size()), c, obs);
    samples.push_back(obs.time);
  }
  return EmpiricalCdf(std::move(samples));
}

// The right-hand side representation: simulate the reduced process Z with
// mechanisms [1, split] and an independent exponential E, and report the first
// u with E < int_0^u sum_{i > split} lambda_i(Z_s) ds.
inline EmpiricalCdf first_type_jump_time_reduced(const Characteristics& ch, std::size_t split,
                                                 const InitialState& init,
                                                 const EngineConfig& cfg, std::size_t n_runs) {
  if (split < 1 || split >= ch.mechanisms.size())
    throw Error("split must satisfy 1 <= split < number of mechanisms");
  Characteristics reduced{ch.flow, {ch.mechanisms.begin(), ch.mechanisms.begin() + split}};
  std::vector<JumpMechanism> rest(ch.mechanisms.begin() + split, ch.mechanisms.end());
  const JumpMechanism tail = total_mechanism(rest);

  std::vector<double> samples;
  samples.reserve(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) {
    EngineConfig c = cfg;
    c.seed = replica_seed(cfg.seed, ch.mechanisms.size(), r);
    Rng level_rng(derive_seed(c.seed, ch.mechanisms.size() + 1));
    struct HazardWalker {
      const JumpMechanism* tail;
      const Flow* flow;
      double level;
      double time = kInfinity;
      void on_segment(double t0, const PhaseState& start, double t1) {
        if (time != kInfinity) return;
        const double h = t1 - t0;
        const double used = integrated_hazard(*tail, start, *flow, h);
        if (used >= level) {
          time = t0 + hazard_first_passage(*tail, start, *flow, level, h);
          time = std::min(time, t1);
        } else {
          level -= used;
        }
      }
    } walker{&tail, &ch.flow, level_rng.exponential()};
    simulate(reduced, init.draw(c.seed, ch.mechanisms.size()), c, walker);
    samples.push_back(walker.time);
  }
  return EmpiricalCdf(std::move(samples));
}

}  // namespace pdmp
