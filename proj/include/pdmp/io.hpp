#pragma once

// CSV emission. Floats are printed with 17 significant digits so values
// round-trip exactly.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "pdmp/analysis.hpp"
#include "pdmp/coupling.hpp"
#include "pdmp/engine.hpp"
#include "pdmp/errors.hpp"

namespace pdmp::io {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void append_vec(std::string& line, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) {
    line += ',';
    line += fmt(v[i]);
  }
}

inline std::string vec_header(char prefix, int d) {
  std::string h;
  for (int i = 1; i <= d; ++i) h += "," + std::string(1, prefix) + "_" + std::to_string(i);
  return h;
}

inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
  const int d = traj.events.empty() ? 0 : traj.events.front().state.dim();
  os << "k,time,type,phantom" << vec_header('x', d) << vec_header('y', d) << '\n';
  std::string line;
  for (std::size_t k = 0; k < traj.events.size(); ++k) {
    const Event& e = traj.events[k];
    line = std::to_string(k) + ',' + fmt(e.time) + ',' + std::to_string(e.type) + ',' +
           (e.phantom ? "1" : "0");
    append_vec(line, e.state.x);
    append_vec(line, e.state.y);
    os << line << '\n';
  }
}

inline void write_grid(std::ostream& os, const Trajectory& traj) {
  const int d = traj.events.empty() ? 0 : traj.events.front().state.dim();
  os << 't' << vec_header('x', d) << vec_header('y', d) << '\n';
  std::string line;
  for (const auto& g : traj.grid) {
    line = fmt(g.time);
    append_vec(line, g.state.x);
    append_vec(line, g.state.y);
    os << line << '\n';
  }
}

inline void write_couple_report(std::ostream& os, const TvReport& report) {
  os << "t,p_decouple,stderr,bound,pass\n";
  for (const auto& r : report.rows) {
    os << fmt(r.t) << ',' << fmt(r.p_decouple) << ',' << fmt(r.std_error) << ',' << fmt(r.bound)
       << ',' << (r.pass ? 1 : 0) << '\n';
  }
}

inline void write_invariance_report(std::ostream& os, const InvarianceReport& report) {
  os << "function,mean,stderr,z,pass\n";
  for (std::size_t j = 0; j < report.names.size(); ++j) {
    const bool ok = std::abs(report.z_scores[j]) <= kInvarianceZThreshold;
    os << report.names[j] << ',' << fmt(report.estimates[j].mean) << ','
       << fmt(report.estimates[j].std_error) << ',' << fmt(report.z_scores[j]) << ','
       << (ok ? 1 : 0) << '\n';
  }
}

inline void write_bias_sweep(std::ostream& os, const BiasSweepResult& result) {
  os << "M,function,estimate,stderr,bias,bias_stderr,bound_proxy\n";
  for (const auto& r : result.rows) {
    os << fmt(r.cap) << ',' << r.function << ',' << fmt(r.estimate.mean) << ','
       << fmt(r.estimate.std_error) << ',' << fmt(r.bias) << ',' << fmt(r.bias_std_error) << ','
       << fmt(r.bound_proxy) << '\n';
  }
}

inline void write_equivalence(std::ostream& os, const std::vector<EquivalenceRow>& rows,
                              double alpha = 0.01) {
  os << "test,statistic,p_value,pass\n";
  for (const auto& r : rows) {
    os << r.name << ',' << fmt(r.ks.statistic) << ',' << fmt(r.ks.p_value) << ','
       << (r.ks.pass(alpha) ? 1 : 0) << '\n';
  }
}

template <class Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  writer(out);
  if (!out) throw Error("failed writing " + path);
}

}  // namespace pdmp::io
