#pragma once

// pdmp-kit front end: builds samplers and experiments from a RunConfig and
// maps outcomes to exit codes.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/analysis.hpp"
#include "pdmp/config.hpp"
#include "pdmp/coupling.hpp"
#include "pdmp/engine.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/io.hpp"
#include "pdmp/samplers.hpp"

namespace pdmp::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kExplosion = 2,
  kRateBound = 3,
  kStatisticalFailure = 4,
};

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

inline Potential potential_from(const RunConfig& c) {
  const std::string name = c.get_string("sampler", "potential", "gaussian_iso");
  const int d = c.get_int("sampler", "dim", 1);
  if (d < 1 || d > kMaxDim) throw ConfigError("dim must lie in [1, 16]");
  if (name == "gaussian_iso") return gaussian_iso(d);
  if (name == "gaussian_aniso") {
    const auto p = c.get_list("sampler", "precision");
    if (p.size() != static_cast<std::size_t>(d * d))
      throw ConfigError("precision needs dim*dim entries in row-major order");
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = p[static_cast<std::size_t>(i * d + j)];
    try {
      return gaussian_aniso(a);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (name == "double_well") {
    if (d != 1) throw ConfigError("double_well is one-dimensional");
    return double_well(c.get_double("sampler", "height", 1.0));
  }
  throw ConfigError("unknown potential '" + name + "'");
}

inline VelocitySpace velocity_from(const RunConfig& c, int d) {
  const std::string name = c.get_string("sampler", "velocity", "unit_sphere");
  if (name == "unit_sphere") return VelocitySpace::unit_sphere(d);
  if (name == "std_gaussian") return VelocitySpace::std_gaussian(d);
  if (name == "signed_hypercube") return VelocitySpace::signed_hypercube(d);
  if (name == "ball") {
    const double r = c.get_double("sampler", "velocity_radius", 1.0);
    if (!(r > 0.0)) throw ConfigError("velocity_radius must be positive");
    return VelocitySpace::ball(d, r);
  }
  throw ConfigError("unknown velocity space '" + name + "'");
}

inline EventTimeStrategy strategy_from(const RunConfig& c) {
  const std::string s = c.get_string("sampler", "strategy", "analytic");
  if (s == "analytic") return EventTimeStrategy::Analytic;
  if (s == "bounded") return EventTimeStrategy::Bounded;
  if (s == "numeric") return EventTimeStrategy::Numeric;
  throw ConfigError("unknown strategy '" + s + "'");
}

inline BpsSpec bps_spec_from(const RunConfig& c) {
  BpsSpec spec;
  spec.potential = potential_from(c);
  spec.velocity_space = velocity_from(c, spec.potential.dim);
  spec.lambda_c = c.get_double("sampler", "lambda_c", 1.0);
  const std::string v = c.get_string("sampler", "variant", "exact");
  if (v == "exact") {
    spec.variant = BpsSpec::Variant::Exact;
  } else if (v == "truncated") {
    spec.variant = BpsSpec::Variant::Truncated;
    spec.cap = c.get_double("sampler", "M");
  } else if (v == "smoothed") {
    spec.variant = BpsSpec::Variant::Smoothed;
  } else if (v == "thinned") {
    spec.variant = BpsSpec::Variant::Thinned;
  } else {
    throw ConfigError("unknown variant '" + v + "'");
  }
  spec.eps = c.get_double("sampler", "eps", spec.eps);
  spec.lambda_star = c.get_double("sampler", "lambda_star", spec.lambda_star);
  spec.strategy = strategy_from(c);
  spec.validate();
  return spec;
}

inline ZigZagSpec zigzag_spec_from(const RunConfig& c) {
  ZigZagSpec spec;
  spec.potential = potential_from(c);
  if (c.get_string("sampler", "velocity", "signed_hypercube") != "signed_hypercube")
    throw ConfigError("zigzag velocities live on the signed hypercube");
  if (c.has("sampler", "variant") && c.get_string("sampler", "variant") != "exact")
    throw ConfigError("zigzag supports only the exact variant");
  const double refresh = c.get_double("sampler", "refresh_rate", 0.0);
  if (refresh < 0.0) throw ConfigError("refresh_rate must be non-negative");
  if (refresh > 0.0) spec.refresh_rate = refresh;
  spec.full_reversal = c.get_bool("sampler", "full_reversal", false);
  spec.strategy = strategy_from(c);
  spec.bound = c.get_double("sampler", "lambda_star", spec.bound);
  return spec;
}

inline bool is_zigzag(const RunConfig& c) {
  const std::string s = c.get_string("sampler", "sampler");
  if (s == "bps") return false;
  if (s == "zigzag") return true;
  throw ConfigError("sampler must be bps or zigzag, got '" + s + "'");
}

inline VelocitySpace velocity_space_of(const RunConfig& c, int d) {
  return is_zigzag(c) ? VelocitySpace::signed_hypercube(d) : velocity_from(c, d);
}

inline Characteristics characteristics_from(const RunConfig& c) {
  return is_zigzag(c) ? build_zigzag(zigzag_spec_from(c)) : build_bps(bps_spec_from(c));
}

inline Vec vec_from(const std::vector<double>& v) {
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
    throw ConfigError("vector must have between 1 and 16 entries");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

inline InitialState initial_state_from(const RunConfig& c, int d) {
  InitialState init;
  init.x = c.has("engine", "x0") ? vec_from(c.get_list("engine", "x0")) : Vec(Vec::Zero(d));
  if (init.x.size() != d) throw ConfigError("x0 has the wrong dimension");
  if (c.has("engine", "y0")) {
    init.y = vec_from(c.get_list("engine", "y0"));
    if (init.y.size() != d) throw ConfigError("y0 has the wrong dimension");
  } else {
    init.space = velocity_space_of(c, d);
  }
  return init;
}

inline EngineConfig engine_from(const RunConfig& c, const Options& opt) {
  EngineConfig e;
  e.t_end = c.get_double("engine", "t_end", e.t_end);
  e.max_events = c.get_u64("engine", "max_events", e.max_events);
  e.seed = opt.seed ? *opt.seed : c.get_u64("engine", "seed", 0);
  const std::string construction = c.get_string("engine", "construction", "c1");
  if (construction == "c1") {
    e.construction = Construction::C1;
  } else if (construction == "c2") {
    e.construction = Construction::C2;
  } else {
    throw ConfigError("construction must be c1 or c2");
  }
  const std::string record = c.get_string("engine", "record", "skeleton");
  if (record == "skeleton") {
    e.record = Recording::SkeletonOnly;
  } else if (record == "grid") {
    e.record = Recording::SkeletonPlusGrid;
  } else {
    throw ConfigError("record must be skeleton or grid");
  }
  e.grid_dt = c.get_double("engine", "grid_dt", e.grid_dt);
  e.validate();
  return e;
}

inline TestFunction test_function_named(const std::string& name, const Potential& u) {
  namespace tf = test_functions;
  const int d = u.dim;
  if (name == "x") return tf::position(0);
  if (name == "x2") return tf::position_squared(0);
  if (name == "y") return tf::velocity(0);
  if (name == "y2") return tf::velocity_squared(0);
  if (name == "xy") return tf::position_velocity(0, 0);
  if (name == "bump") return tf::bump(Vec::Zero(d), 1.5);
  if (name == "bump_tilted") return tf::bump(Vec::Zero(d), 1.5, true);
  if (name == "lyapunov") return tf::lyapunov(u);
  throw ConfigError("unknown test function '" + name + "'");
}

inline std::vector<TestFunction> test_functions_from(const RunConfig& c, const Potential& u,
                                                     std::vector<std::string> fallback) {
  std::vector<TestFunction> fs;
  for (const auto& n : c.get_names("experiment", "test_functions", std::move(fallback)))
    fs.push_back(test_function_named(n, u));
  if (fs.empty()) throw ConfigError("test_functions must not be empty");
  return fs;
}

inline std::filesystem::path out_path(const Options& opt, const std::string& file) {
  std::filesystem::create_directories(opt.out);
  return std::filesystem::path(opt.out) / file;
}

inline int cmd_simulate(const RunConfig& c, const Options& opt, std::ostream& out) {
  const Characteristics ch = characteristics_from(c);
  const int d = potential_from(c).dim;
  const EngineConfig cfg = engine_from(c, opt);
  const PhaseState init = initial_state_from(c, d).draw(cfg.seed, ch.mechanisms.size());

  const auto start = std::chrono::steady_clock::now();
  const Trajectory traj = record_trajectory(ch, init, cfg);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  io::write_file(out_path(opt, "trajectory.csv").string(),
                 [&](std::ostream& os) { io::write_trajectory(os, traj); });
  if (cfg.record == Recording::SkeletonPlusGrid) {
    io::write_file(out_path(opt, "grid.csv").string(),
                   [&](std::ostream& os) { io::write_grid(os, traj); });
  }
  const std::size_t events = traj.jump_count();
  out << "status=" << to_string(traj.status) << " events=" << events
      << " true_jumps=" << traj.true_jump_count() << " phantom_jumps=" << traj.phantom_count()
      << " wall_time=" << io::fmt(wall)
      << " events_per_sec=" << io::fmt(wall > 0.0 ? static_cast<double>(events) / wall : 0.0)
      << '\n';
  switch (traj.status) {
    case RunStatus::Completed:
      return kOk;
    case RunStatus::ExplosionSuspected:
      return kExplosion;
    case RunStatus::RateBoundViolated:
      return kRateBound;
  }
  return kOk;
}

inline double max_speed(const VelocitySpace& v) {
  switch (v.kind()) {
    case VelocitySpace::Kind::UnitSphere:
      return 1.0;
    case VelocitySpace::Kind::SignedHypercube:
      return std::sqrt(static_cast<double>(v.dim()));
    case VelocitySpace::Kind::Ball:
      return v.radius();
    case VelocitySpace::Kind::StdGaussian:
      break;
  }
  throw ConfigError("unbounded velocities: set [experiment] g explicitly");
}

inline int cmd_couple(const RunConfig& c, const Options& opt, std::ostream& out) {
  if (is_zigzag(c)) throw ConfigError("couple pairs the exact BPS with a perturbed variant");
  const BpsSpec spec = bps_spec_from(c);
  BpsSpec exact = spec;
  exact.variant = BpsSpec::Variant::Exact;
  const EngineConfig cfg = engine_from(c, opt);
  const InitialState init = initial_state_from(c, spec.potential.dim);
  const auto t_grid = c.get_list("experiment", "t_grid");
  if (t_grid.empty()) throw ConfigError("t_grid must not be empty");
  const std::size_t n = c.get_u64("experiment", "n_replicas", 10000);

  TimeBound g;
  if (c.has("experiment", "g")) {
    g = constant_g(c.get_double("experiment", "g"));
  } else if (spec.variant == BpsSpec::Variant::Exact) {
    g = constant_g(0.0);
  } else if (spec.variant == BpsSpec::Variant::Smoothed) {
    g = certified_g_smoothed(spec.eps);
  } else if (spec.variant == BpsSpec::Variant::Truncated) {
    if (!spec.potential.precision) throw ConfigError("set [experiment] g for this potential");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*spec.potential.precision);
    g = certified_g_truncated(spec.cap, init.x.norm(), max_speed(spec.velocity_space),
                              eig.eigenvalues().cwiseAbs().maxCoeff());
  } else {
    throw ConfigError("set [experiment] g for the thinned variant");
  }

  const Characteristics a = build_bps(exact);
  const Characteristics b = build_bps(spec);
  const CoupledCharacteristics cc{a.flow, total_mechanism(a.mechanisms),
                                  total_mechanism(b.mechanisms), g};
  const TvReport report = verify_tv_bound(cc, init, t_grid, n, cfg.seed, cfg.max_events);
  io::write_file(out_path(opt, "couple.csv").string(),
                 [&](std::ostream& os) { io::write_couple_report(os, report); });
  out << "bound_holds=" << report.bound_holds()
      << " marginal_first_p=" << io::fmt(report.marginal_first.p_value)
      << " marginal_second_p=" << io::fmt(report.marginal_second.p_value) << '\n';
  return report.all_pass() ? kOk : kStatisticalFailure;
}

inline int cmd_check_invariance(const RunConfig& c, const Options& opt, std::ostream& out) {
  const Characteristics ch = characteristics_from(c);
  const Potential u = potential_from(c);
  if (!u.precision) throw ConfigError("the candidate measure needs a Gaussian potential");
  const VelocitySpace space = velocity_space_of(c, u.dim);
  const double variance = c.get_double("experiment", "candidate_variance", 1.0);
  if (!(variance > 0.0)) throw ConfigError("candidate_variance must be positive");
  const std::size_t n = c.get_u64("experiment", "n_samples", 100000);
  if (n < 2) throw ConfigError("n_samples must be at least 2");
  const std::string inner = c.get_string("experiment", "inner_rule", "exact");
  InnerRule rule;
  if (inner == "exact") {
    rule = InnerRule::ClosedFormOrEnumeration;
  } else if (inner == "monte_carlo") {
    rule = InnerRule::AllowMonteCarlo;
  } else {
    throw ConfigError("inner_rule must be exact or monte_carlo");
  }
  const auto fs = test_functions_from(c, u, {"x", "x2", "y", "xy", "bump"});
  const std::uint64_t seed = opt.seed ? *opt.seed : c.get_u64("engine", "seed", 0);
  const InvarianceReport report =
      invariance_test(ch, gaussian_candidate(*u.precision, variance, space), fs, n, seed, rule);
  io::write_file(out_path(opt, "invariance.csv").string(),
                 [&](std::ostream& os) { io::write_invariance_report(os, report); });
  out << "invariance=" << (report.pass ? "PASS" : "FAIL") << '\n';
  return report.pass ? kOk : kStatisticalFailure;
}

inline int cmd_bias_sweep(const RunConfig& c, const Options& opt, std::ostream& out) {
  if (is_zigzag(c)) throw ConfigError("bias-sweep runs on the BPS");
  const BpsSpec spec = bps_spec_from(c);
  const EngineConfig cfg = engine_from(c, opt);
  const auto caps = c.get_list("experiment", "caps");
  const std::size_t n = c.get_u64("experiment", "n_replicas", 20);
  BiasSweepOptions o;
  o.burn_in_fraction = c.get_double("experiment", "burn_in", o.burn_in_fraction);
  o.quad_nodes = c.get_int("experiment", "quad_nodes", o.quad_nodes);
  o.quad_half_width = c.get_double("experiment", "quad_half_width", o.quad_half_width);
  o.threads = opt.threads;
  if (!(o.burn_in_fraction >= 0.0 && o.burn_in_fraction < 1.0))
    throw ConfigError("burn_in must lie in [0, 1)");
  const auto fs = test_functions_from(c, spec.potential, {"x2"});
  const BiasSweepResult result = bias_sweep(spec, caps, fs, cfg.t_end, n, cfg.seed, o);
  io::write_file(out_path(opt, "bias_sweep.csv").string(),
                 [&](std::ostream& os) { io::write_bias_sweep(os, result); });
  out << "monotone=" << result.monotone << " last_cap_unbiased=" << result.last_cap_unbiased
      << " proxy_decreasing=" << result.proxy_decreasing << '\n';
  return result.pass() ? kOk : kStatisticalFailure;
}

inline int cmd_equivalence(const RunConfig& c, const Options& opt, std::ostream& out) {
  if (is_zigzag(c)) throw ConfigError("equivalence runs on the BPS");
  BpsSpec spec = bps_spec_from(c);
  const EngineConfig cfg = engine_from(c, opt);
  const std::size_t n = c.get_u64("experiment", "n_replicas", 10000);
  if (n < 2) throw ConfigError("n_replicas must be at least 2");
  const double lambda_star = spec.lambda_star;
  spec.variant = BpsSpec::Variant::Exact;
  const auto rows = equivalence_battery(spec, n, cfg.t_end, cfg.seed, lambda_star, opt.threads);
  io::write_file(out_path(opt, "equivalence.csv").string(),
                 [&](std::ostream& os) { io::write_equivalence(os, rows); });
  bool pass = true;
  for (const auto& r : rows) {
    out << r.name << " p=" << io::fmt(r.ks.p_value) << (r.ks.pass() ? " ok" : " FAIL") << '\n';
    pass = pass && r.ks.pass();
  }
  return pass ? kOk : kStatisticalFailure;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Simulation and diagnostics for piecewise deterministic Markov processes",
               "pdmp-kit"};
  app.require_subcommand(1);
  Options opt;
  using Command = int (*)(const RunConfig&, const Options&, std::ostream&);
  struct Entry {
    std::string name;
    Command fn;
    std::string help;
  };
  const std::vector<Entry> commands = {
      {"simulate", cmd_simulate, "run one trajectory and write its skeleton"},
      {"couple", cmd_couple, "exact BPS coupled with a perturbed variant, TV bound check"},
      {"check-invariance", cmd_check_invariance, "Monte Carlo test of E[Af] = 0 under a candidate"},
      {"bias-sweep", cmd_bias_sweep, "bias of truncated BPS against the exact sampler"},
      {"equivalence", cmd_equivalence, "two-sample KS battery between equivalent simulations"},
  };
  for (const auto& [name, fn, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "INI run configuration")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "master seed (overrides [engine] seed)");
    sub->add_option("--threads", opt.threads, "worker threads for replica loops")
        ->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  for (const auto& [name, fn, help] : commands) {
    if (!app.got_subcommand(name)) continue;
    try {
      const RunConfig cfg = RunConfig::load(opt.config);
      return fn(cfg, opt, out);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << '\n';
      return kConfigError;
    } catch (const ExplosionSuspected& e) {
      err << "explosion suspected: " << e.what() << '\n';
      return kExplosion;
    } catch (const RateBoundViolated& e) {
      err << "rate bound violated: " << e.what() << '\n';
      return kRateBound;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kStatisticalFailure;
    }
  }
  return kConfigError;
}

}  // namespace pdmp::cli
