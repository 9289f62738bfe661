// bench: runs the estimator and bandit experiments and writes CSV/SVG results.
//
//   bench design|estimate|bandit|sweep --preset <name> [options]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <type_traits>

#include "CLI11.hpp"
#include "popart/bench/config.hpp"
#include "popart/bench/experiment.hpp"

namespace {

using popart::bench::KeyValues;
using popart::bench::Mode;

struct Flags {
  std::optional<std::string> preset, n, out, config, algorithms, lasso_lambda, actions, theta;
  std::optional<long long> d, s, reps, k, threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma, delta, r_max, m, scale;
};

void add_options(CLI::App* cmd, Flags& f) {
  cmd->add_option("--preset", f.preset,
                  "case1-l1 | case1-bandit | case2-l1 | case2-bandit | design-diagnostics | custom");
  cmd->add_option("--d", f.d, "dimension");
  cmd->add_option("--s", f.s, "sparsity");
  cmd->add_option("--sigma", f.sigma, "noise scale");
  cmd->add_option("--delta", f.delta, "failure rate in (0,1)");
  cmd->add_option("--n", f.n, "horizon or grid: 5000 | 1000,2000 | 1000:10000:1000");
  cmd->add_option("--reps", f.reps, "repetitions");
  cmd->add_option("--seed", f.seed, "base seed; rep k uses seed + k");
  cmd->add_option("--r-max", f.r_max, "reward-range bound (default from the instance)");
  cmd->add_option("--m", f.m, "minimum signal; enables restricted-phase-elim");
  cmd->add_option("--scale", f.scale, "divide bandit horizons by this factor");
  cmd->add_option("--k", f.k, "number of arms for sphere instances");
  cmd->add_option("--algorithms", f.algorithms, "comma-separated algorithm list");
  cmd->add_option("--lasso-lambda", f.lasso_lambda, "noise-scaled | unscaled");
  cmd->add_option("--actions", f.actions, "arm matrix file (custom preset)");
  cmd->add_option("--theta", f.theta, "parameter vector file (custom preset)");
  cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--config", f.config, "key = value config file");
}

KeyValues overrides(const Flags& f) {
  KeyValues kv;
  auto put = [&kv](const char* key, const auto& opt) {
    if (!opt) return;
    using T = std::decay_t<decltype(*opt)>;
    if constexpr (std::is_same_v<T, std::string>) {
      kv[key] = *opt;
    } else if constexpr (std::is_integral_v<T>) {
      kv[key] = std::to_string(*opt);
    } else {
      kv[key] = popart::bench::format_double(*opt);
    }
  };
  put("preset", f.preset);
  put("d", f.d);
  put("s", f.s);
  put("sigma", f.sigma);
  put("delta", f.delta);
  put("n", f.n);
  put("reps", f.reps);
  put("seed", f.seed);
  put("r_max", f.r_max);
  put("m", f.m);
  put("scale", f.scale);
  put("k", f.k);
  put("algorithms", f.algorithms);
  put("lasso_lambda", f.lasso_lambda);
  put("actions", f.actions);
  put("theta", f.theta);
  put("threads", f.threads);
  put("out", f.out);
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PopArt sparse estimation and bandit benchmarks"};
  app.require_subcommand(1);
  Flags flags;
  std::map<CLI::App*, Mode> modes;
  for (auto [name, mode, help] : {std::tuple{"design", Mode::design, "solve the design problems and report"},
                                  std::tuple{"estimate", Mode::estimate, "l1 estimation error sweep"},
                                  std::tuple{"bandit", Mode::bandit, "bandit regret runs"},
                                  std::tuple{"sweep", Mode::automatic, "run whatever the preset describes"}}) {
    auto* cmd = app.add_subcommand(name, help);
    add_options(cmd, flags);
    modes[cmd] = mode;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  Mode mode = Mode::automatic;
  for (auto& [cmd, m] : modes)
    if (cmd->parsed()) mode = m;

  popart::bench::ExperimentConfig config;
  try {
    const KeyValues file = flags.config ? popart::bench::read_config_file(*flags.config) : KeyValues{};
    config = popart::bench::parse_config(file, overrides(flags));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }

  try {
    const auto result = popart::bench::run_experiment(config, mode);
    std::cout << result.report;
    std::cout << result.rows.size() << " rows\n";
    for (const auto& f : result.files) std::cout << "wrote " << f << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
