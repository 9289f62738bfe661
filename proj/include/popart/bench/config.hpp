#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "popart/core.hpp"
#include "popart/lasso.hpp"

namespace popart::bench {

enum class Preset { case1_l1, case1_bandit, case2_l1, case2_bandit, design_diagnostics, custom };

inline std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::case1_l1: return "case1-l1";
    case Preset::case1_bandit: return "case1-bandit";
    case Preset::case2_l1: return "case2-l1";
    case Preset::case2_bandit: return "case2-bandit";
    case Preset::design_diagnostics: return "design-diagnostics";
    case Preset::custom: return "custom";
  }
  return "custom";
}

inline Preset parse_preset(std::string_view s) {
  for (Preset p : {Preset::case1_l1, Preset::case1_bandit, Preset::case2_l1, Preset::case2_bandit,
                   Preset::design_diagnostics, Preset::custom})
    if (preset_name(p) == s) return p;
  throw Error(Errc::config, "unknown preset '" + std::string(s) + "'");
}

/// What a run computes. `automatic` lets the preset decide.
enum class Mode { automatic, design, estimate, bandit };

struct ExperimentConfig {
  Preset preset = Preset::custom;
  Index d = 10;
  int s = 2;
  double sigma = 0.1;
  double delta = 0.05;
  Index k_arms = 0;  // sphere instances only
  std::vector<std::size_t> n_grid;
  int reps = 30;
  std::uint64_t base_seed = 0;
  std::optional<double> r_max;  // default: max_k ||a_k||_1 * ||theta*||_inf
  std::optional<double> m;
  double scale = 1.0;  // divides bandit horizons
  std::string output_dir = "bench_out";
  std::vector<std::string> algorithms;
  LassoLambdaRule lasso_rule = LassoLambdaRule::noise_scaled;
  std::string actions_file;  // custom preset
  std::string theta_file;    // custom preset
  unsigned threads = 0;      // 0: hardware concurrency

  bool is_bandit() const {
    return preset == Preset::case1_bandit || preset == Preset::case2_bandit;
  }

  /// Horizons actually simulated (bandit horizons divided by `scale`).
  std::vector<std::size_t> effective_grid() const {
    if (scale == 1.0 || !is_bandit()) return n_grid;
    std::vector<std::size_t> out;
    for (auto n : n_grid) out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n / scale))));
    return out;
  }

  unsigned worker_count() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(Errc::config, msg); };
    if (reps < 1) fail("reps must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail("sigma must be >= 0");
    if (d < 1) fail("d must be >= 1");
    if (s < 1 || s > d) fail("s must lie in [1, d]");
    if (n_grid.empty()) fail("n grid is empty");
    for (auto n : n_grid)
      if (n < 1) fail("every n must be >= 1");
    if (!(scale > 0.0) || !std::isfinite(scale)) fail("scale must be positive");
    if (r_max && !(*r_max > 0.0)) fail("r_max must be positive");
    if (m && !(*m > 0.0)) fail("m must be positive");
    if ((preset == Preset::case2_l1 || preset == Preset::case2_bandit) && k_arms < d)
      fail("K must be >= d for sphere instances");
    if (preset == Preset::custom && (actions_file.empty() || theta_file.empty()))
      fail("custom preset needs 'actions' and 'theta' matrix files");
    static const char* known[] = {"popart", "c_min-lasso", "h2-lasso", "etc-popart", "estc", "restricted-phase-elim"};
    for (const auto& a : algorithms)
      if (std::find(std::begin(known), std::end(known), a) == std::end(known)) fail("unknown algorithm '" + a + "'");
  }
};

/// Raw `key = value` pairs in file order; later occurrences win.
using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw Error(Errc::config, "invalid value for '" + key + "': '" + text + "'");
  return value;
}

// "5000", "1000,2000,4000" or "1000:10000:1000" (inclusive range).
inline std::vector<std::size_t> parse_grid(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw Error(Errc::config, "range for '" + key + "' must be start:stop:step");
    const auto a = parse_number<std::size_t>(key, parts[0]);
    const auto b = parse_number<std::size_t>(key, parts[1]);
    const auto step = parse_number<std::size_t>(key, parts[2]);
    if (step == 0 || b < a) throw Error(Errc::config, "empty range for '" + key + "'");
    for (auto v = a; v <= b; v += step) out.push_back(v);
  } else {
    for (const auto& p : split(text, ',')) out.push_back(parse_number<std::size_t>(key, p));
  }
  return out;
}

}  // namespace detail

/// Reads `key = value` lines; '#' starts a comment, blank lines are skipped.
inline KeyValues read_config_text(std::istream& in, const std::string& origin = "config") {
  KeyValues kv;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string key = eq == std::string::npos ? std::string() : detail::trim(body.substr(0, eq));
    const std::string value = eq == std::string::npos ? std::string() : detail::trim(body.substr(eq + 1));
    if (eq == std::string::npos || key.empty() || value.empty())
      throw Error(Errc::config, origin + ":" + std::to_string(lineno) + ": malformed line, expected 'key = value'");
    kv[key] = value;
  }
  return kv;
}

inline KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot open config file '" + path + "'");
  return read_config_text(in, path);
}

inline void apply_preset_defaults(ExperimentConfig& c) {
  std::vector<std::size_t> l1_grid;
  for (std::size_t n = 1000; n <= 10000; n += 1000) l1_grid.push_back(n);
  c.sigma = 0.1;
  c.delta = 0.05;
  c.s = 2;
  c.reps = 30;
  switch (c.preset) {
    case Preset::case1_l1:
      c.d = 10;
      c.n_grid = l1_grid;
      c.algorithms = {"popart", "c_min-lasso", "h2-lasso"};
      break;
    case Preset::case1_bandit:
      c.d = 10;
      c.n_grid = {400000};
      c.algorithms = {"etc-popart", "estc"};
      break;
    case Preset::case2_l1:
      c.d = 30;
      c.k_arms = 90;
      c.n_grid = l1_grid;
      c.algorithms = {"popart", "c_min-lasso", "h2-lasso"};
      break;
    case Preset::case2_bandit:
      c.d = 30;
      c.k_arms = 90;
      c.n_grid = {10000};
      c.algorithms = {"etc-popart", "estc"};
      break;
    case Preset::design_diagnostics:
      c.d = 10;
      c.n_grid = {1};
      c.reps = 1;
      c.algorithms = {};
      break;
    case Preset::custom:
      c.n_grid = {10000};
      c.algorithms = {"popart", "c_min-lasso", "h2-lasso"};
      break;
  }
}

/**
 * Resolves a configuration: file values, then flag overrides, on top of
 * the preset defaults. Unknown keys are rejected.
 */
inline ExperimentConfig parse_config(const KeyValues& file_values, const KeyValues& overrides = {}) {
  KeyValues kv = file_values;
  for (const auto& [k, v] : overrides) kv[k] = v;

  ExperimentConfig c;
  c.preset = parse_preset(kv.count("preset") ? kv.at("preset") : "custom");
  apply_preset_defaults(c);
  bool algorithms_set = false;

  for (const auto& [key, value] : kv) {
    using detail::parse_number;
    if (key == "preset") {
      continue;
    } else if (key == "d") {
      c.d = parse_number<Index>(key, value);
    } else if (key == "s") {
      c.s = parse_number<int>(key, value);
    } else if (key == "sigma") {
      c.sigma = parse_number<double>(key, value);
    } else if (key == "delta") {
      c.delta = parse_number<double>(key, value);
    } else if (key == "k") {
      c.k_arms = parse_number<Index>(key, value);
    } else if (key == "n") {
      c.n_grid = detail::parse_grid(key, value);
    } else if (key == "reps") {
      c.reps = parse_number<int>(key, value);
    } else if (key == "seed") {
      c.base_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "r_max") {
      c.r_max = parse_number<double>(key, value);
    } else if (key == "m") {
      c.m = parse_number<double>(key, value);
    } else if (key == "scale") {
      c.scale = parse_number<double>(key, value);
    } else if (key == "out") {
      c.output_dir = value;
    } else if (key == "algorithms") {
      c.algorithms = detail::split(value, ',');
      algorithms_set = true;
    } else if (key == "lasso_lambda") {
      if (value == "noise-scaled") {
        c.lasso_rule = LassoLambdaRule::noise_scaled;
      } else if (value == "unscaled") {
        c.lasso_rule = LassoLambdaRule::unscaled;
      } else {
        throw Error(Errc::config, "lasso_lambda must be 'noise-scaled' or 'unscaled'");
      }
    } else if (key == "actions") {
      c.actions_file = value;
    } else if (key == "theta") {
      c.theta_file = value;
    } else if (key == "threads") {
      c.threads = parse_number<unsigned>(key, value);
    } else {
      throw Error(Errc::config, "unknown config key '" + key + "'");
    }
  }
  // Restricted phase elimination needs a minimum-signal level; enable it once m is given.
  if (!algorithms_set && c.is_bandit() && c.m) c.algorithms.push_back("restricted-phase-elim");
  c.validate();
  return c;
}

}  // namespace popart::bench
