#pragma once

// INI run configuration with sections [sampler], [engine], [experiment].
// Unknown sections and keys are rejected.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/errors.hpp"

namespace pdmp {

inline const std::map<std::string, std::set<std::string>>& allowed_config_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"sampler",
       {"sampler", "potential", "dim", "precision", "height", "velocity", "velocity_radius",
        "lambda_c", "variant", "M", "eps", "lambda_star", "strategy", "refresh_rate",
        "full_reversal"}},
      {"engine", {"t_end", "max_events", "seed", "construction", "record", "grid_dt", "x0", "y0"}},
      {"experiment",
       {"n_replicas", "t_grid", "g", "candidate_variance", "test_functions", "n_samples",
        "inner_rule", "caps", "burn_in", "quad_nodes", "quad_half_width"}},
  };
  return keys;
}

class RunConfig {
 public:
  static RunConfig parse(std::istream& in, const std::string& origin = "<config>") {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    RunConfig cfg;
    const auto& allowed = allowed_config_keys();
    for (const auto& [section, body] : tree) {
      const auto it = allowed.find(section);
      if (it == allowed.end() || !body.data().empty()) {
        throw ConfigError(origin + ": unknown section or top-level key '" + section + "'");
      }
      for (const auto& [key, value] : body) {
        if (!it->second.count(key))
          throw ConfigError(origin + ": unknown key '" + key + "' in [" + section + "]");
        cfg.values_[section][key] = unquote(value.data());
      }
    }
    return cfg;
  }

  static RunConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    return s != values_.end() && s->second.count(key);
  }

  void set(const std::string& section, const std::string& key, std::string value) {
    values_[section][key] = std::move(value);
  }

  std::string raw(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw ConfigError("missing key '" + key + "' in [" + section + "]");
    return values_.at(section).at(key);
  }

  std::string get_string(const std::string& section, const std::string& key,
                         std::optional<std::string> fallback = std::nullopt) const {
    if (!has(section, key)) {
      if (fallback) return *fallback;
      return raw(section, key);
    }
    return raw(section, key);
  }

  double get_double(const std::string& section, const std::string& key,
                    std::optional<double> fallback = std::nullopt) const {
    if (!has(section, key) && fallback) return *fallback;
    return to_double(raw(section, key), key);
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::optional<std::uint64_t> fallback = std::nullopt) const {
    if (!has(section, key) && fallback) return *fallback;
    return to_u64(raw(section, key), key);
  }

  int get_int(const std::string& section, const std::string& key,
              std::optional<int> fallback = std::nullopt) const {
    const std::uint64_t v = get_u64(section, key, fallback ? std::optional<std::uint64_t>(
                                                                 static_cast<std::uint64_t>(*fallback))
                                                           : std::nullopt);
    if (v > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
      throw ConfigError("value of '" + key + "' is too large");
    return static_cast<int>(v);
  }

  bool get_bool(const std::string& section, const std::string& key,
                std::optional<bool> fallback = std::nullopt) const {
    if (!has(section, key) && fallback) return *fallback;
    const std::string v = raw(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "' must be true or false, got '" + v + "'");
  }

  // Comma-separated list; an empty value is an empty list.
  std::vector<double> get_list(const std::string& section, const std::string& key,
                               std::optional<std::vector<double>> fallback = std::nullopt) const {
    if (!has(section, key) && fallback) return *fallback;
    std::vector<double> out;
    for (const auto& item : split(raw(section, key))) out.push_back(to_double(item, key));
    return out;
  }

  std::vector<std::string> get_names(const std::string& section, const std::string& key,
                                     std::vector<std::string> fallback) const {
    if (!has(section, key)) return fallback;
    return split(raw(section, key));
  }

  static std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  }

  static std::string unquote(std::string v) {
    v = trim(v);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
      v = v.substr(1, v.size() - 2);
    return v;
  }

  static double to_double(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
      throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
    return v;
  }

  static std::uint64_t to_u64(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec == std::errc() && ptr == t.data() + t.size() && !t.empty()) return v;
    // Accept integral floats such as 1e6.
    const double d = to_double(t, key);
    if (d >= 0.0 && d < 1.8e19 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + text + "'");
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace pdmp
