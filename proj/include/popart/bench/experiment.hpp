#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "popart/bandit.hpp"
#include "popart/bench/config.hpp"
#include "popart/bench/io.hpp"
#include "popart/bench/svg.hpp"
#include "popart/design.hpp"
#include "popart/estimator.hpp"
#include "popart/instances.hpp"
#include "popart/lasso.hpp"
#include "popart/rng.hpp"

namespace popart::bench {

struct SummaryRow {
  std::string algorithm;
  std::size_t n;
  std::string metric;
  std::size_t count;  // finite values
  std::size_t failed;
  double mean;
  double sd;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<ResultRow> timings;  // runtime_ms, kept apart so `rows` is reproducible
  std::vector<SummaryRow> summary;
  std::string report;  // human-readable diagnostics
  std::vector<std::string> files;
};

/// Arms and the per-rep hidden parameter for a configuration.
class InstanceFactory {
 public:
  explicit InstanceFactory(const ExperimentConfig& c) : config_(c) {
    switch (c.preset) {
      case Preset::case1_l1:
      case Preset::case1_bandit:
      case Preset::design_diagnostics:
        actions_.emplace(hard_set_actions(c.d));
        break;
      case Preset::case2_l1:
      case Preset::case2_bandit:
        actions_.emplace(unit_sphere_actions(c.d, c.k_arms, c.base_seed));
        break;
      case Preset::custom: {
        actions_.emplace(read_matrix_file(c.actions_file));
        Matrix t = read_matrix_file(c.theta_file);
        if (t.cols() != 1 && t.rows() == 1) t.transposeInPlace();
        if (t.cols() != 1 || t.rows() != actions_->dim())
          throw Error(Errc::config, "theta file must hold a d x 1 vector matching the arm dimension");
        fixed_theta_ = Vector(t.col(0));
        break;
      }
    }
  }

  const ActionSet& actions() const { return *actions_; }

  Vector theta(std::uint64_t seed) const {
    switch (config_.preset) {
      case Preset::case1_l1: return theta_generator(ThetaCase::case1_l1, config_.d, seed);
      case Preset::case1_bandit:
      case Preset::design_diagnostics: return theta_generator(ThetaCase::case1_bandit, config_.d, seed);
      case Preset::case2_l1:
      case Preset::case2_bandit: return theta_generator(ThetaCase::case2, config_.d, seed);
      case Preset::custom: return *fixed_theta_;
    }
    return *fixed_theta_;
  }

  double r_max(const Vector& theta) const {
    if (config_.r_max) return *config_.r_max;
    return actions_->arms().cwiseAbs().rowwise().sum().maxCoeff() * theta.cwiseAbs().maxCoeff();
  }

 private:
  const ExperimentConfig& config_;
  std::optional<ActionSet> actions_;
  std::optional<Vector> fixed_theta_;
};

namespace detail {

inline bool needs(const ExperimentConfig& c, std::initializer_list<const char*> names) {
  for (const auto& a : c.algorithms)
    for (const char* n : names)
      if (a == n) return true;
  return false;
}

struct SharedDesigns {
  std::optional<DesignSolution> h_star;
  std::optional<DesignSolution> c_min;
};

// Regression data drawn from a design: arms by DesignSampler, Gaussian noise.
inline std::pair<std::vector<std::uint32_t>, std::vector<double>> draw_samples(const ActionSet& actions,
                                                                               const Vector& theta, double sigma,
                                                                               const Design& design,
                                                                               std::uint64_t seed,
                                                                               std::uint64_t tag, std::size_t n) {
  popart::detail::DesignSampler sampler(design, seed, tag);
  const Vector means = actions.arms() * theta;
  std::vector<std::uint32_t> idx(n);
  std::vector<double> rewards(n);
  for (std::size_t t = 0; t < n; ++t) {
    idx[t] = static_cast<std::uint32_t>(sampler.draw(t));
    rewards[t] = means(idx[t]) + sigma * rng::normal_at(seed, rng::kSampleNoise * 16 + tag, t);
  }
  return {std::move(idx), std::move(rewards)};
}

class RowSink {
 public:
  RowSink(const ExperimentConfig& c, std::uint64_t seed) : preset_(preset_name(c.preset)), seed_(seed) {}

  void add(const std::string& algorithm, std::size_t n, const std::string& metric, double value) {
    rows.push_back({preset_, algorithm, seed_, n, metric, value});
  }
  void time(const std::string& algorithm, std::size_t n, double ms) {
    timings.push_back({preset_, algorithm, seed_, n, "runtime_ms", ms});
  }

  std::vector<ResultRow> rows;
  std::vector<ResultRow> timings;
  std::vector<std::string> failures;

 private:
  std::string preset_;
  std::uint64_t seed_;
};

// Runs one algorithm; a failure becomes NaN rows for `metrics` and a report line.
template <class F>
bool timed(RowSink& sink, const std::string& algorithm, std::size_t n, F&& body,
           const std::vector<std::string>& metrics) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  try {
    body();
  } catch (const std::exception& e) {
    ok = false;
    for (const auto& m : metrics) sink.add(algorithm, n, m, std::nan(""));
    sink.failures.push_back(algorithm + " n=" + std::to_string(n) + ": " + e.what());
  }
  sink.time(algorithm, n, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  return ok;
}

inline void run_estimation_rep(const ExperimentConfig& c, const InstanceFactory& inst, const SharedDesigns& designs,
                               std::uint64_t seed, RowSink& sink) {
  const ActionSet& actions = inst.actions();
  const Vector theta = inst.theta(seed);
  const double r_max = inst.r_max(theta);
  const Index d = actions.dim();
  for (std::size_t n : c.effective_grid()) {
    const std::uint64_t sample_seed = rng::hash3(seed, rng::kSampleArm, n);
    std::optional<std::pair<std::vector<std::uint32_t>, std::vector<double>>> h_data;
    auto h_samples = [&]() -> const auto& {
      if (!h_data) h_data = draw_samples(actions, theta, c.sigma, designs.h_star->design, sample_seed, 0, n);
      return *h_data;
    };
    for (const auto& alg : c.algorithms) {
      if (alg == "popart") {
        timed(sink, alg, n, [&] {
          const auto& [idx, r] = h_samples();
          const ArmSampleView view(actions, idx, r);
          const SparseEstimate est = warm_popart(view, designs.h_star->cov, r_max, c.sigma, c.delta);
          sink.add(alg, n, "l1_error", (est.theta_hat - theta).lpNorm<1>());
        }, {"l1_error"});
      } else if (alg == "h2-lasso" || alg == "c_min-lasso") {
        timed(sink, alg, n, [&] {
          std::pair<std::vector<std::uint32_t>, std::vector<double>> own;
          const auto* data = &own;
          if (alg == "h2-lasso") {
            data = &h_samples();  // same draws as popart
          } else {
            own = draw_samples(actions, theta, c.sigma, designs.c_min->design, sample_seed, 1, n);
          }
          const SampleBatch batch = ArmSampleView(actions, data->first, data->second).to_batch();
          const LassoResult fit = lasso_cd(batch, lasso_lambda(n, d, c.delta, c.sigma, c.lasso_rule), 1e-8, 10000);
          sink.add(alg, n, "l1_error", (fit.theta - theta).lpNorm<1>());
        }, {"l1_error"});
      }
    }
  }
}

inline std::vector<std::size_t> checkpoints(std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k <= 10; ++k) {
    const std::size_t p = n * k / 10;
    if (p > 0 && (out.empty() || out.back() != p)) out.push_back(p);
  }
  return out;
}

inline void run_bandit_rep(const ExperimentConfig& c, const InstanceFactory& inst, const SharedDesigns& designs,
                           std::uint64_t seed, RowSink& sink) {
  const Vector theta = inst.theta(seed);
  const double r_max = inst.r_max(theta);
  const BanditEnv env(inst.actions(), theta, c.sigma, seed, c.s);
  for (std::size_t n : c.effective_grid()) {
    const auto marks = checkpoints(n);
    auto emit_regret = [&](const std::string& alg, const AlgorithmReport& rep) {
      for (auto p : marks) sink.add(alg, p, "cum_regret", rep.regret.at(p));
    };
    for (const auto& alg : c.algorithms) {
      BanditOptions opt;
      bool ok = true;
      if (alg == "etc-popart") {
        opt.design = designs.h_star;
        ok = timed(sink, alg, n, [&] { emit_regret(alg, run_etc_popart(env, n, c.delta, r_max, c.s, opt)); }, {});
      } else if (alg == "estc") {
        opt.design = designs.c_min;
        opt.lasso_rule = c.lasso_rule;
        ok = timed(sink, alg, n, [&] { emit_regret(alg, run_estc_baseline(env, n, c.delta, r_max, c.s, opt)); }, {});
      } else if (alg == "restricted-phase-elim") {
        opt.design = designs.h_star;
        ok = timed(sink, alg, n, [&] {
          if (!c.m) throw Error(Errc::config, "restricted-phase-elim needs m");
          const AlgorithmReport rep = run_restricted_phase_elim(env, n, c.delta, r_max, c.s, *c.m, opt);
          emit_regret(alg, rep);
          const auto truth = support_of(theta);
          sink.add(alg, n, "support_recovered", rep.recovered_support && *rep.recovered_support == truth ? 1.0 : 0.0);
        }, {});
      } else {
        continue;
      }
      // failed runs leave no regret rows; record one NaN per checkpoint instead
      if (!ok) {
        for (auto p : marks) sink.add(alg, p, "cum_regret", std::nan(""));
        if (alg == "restricted-phase-elim") sink.add(alg, n, "support_recovered", std::nan(""));
      }
    }
  }
}

inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::tuple<std::string, std::size_t, std::string>, std::size_t> slot;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.algorithm, r.n, r.metric);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      out.push_back({r.algorithm, r.n, r.metric, 0, 0, 0.0, 0.0});
      values.emplace_back();
    }
    if (std::isfinite(r.value)) {
      values[it->second].push_back(r.value);
    } else {
      ++out[it->second].failed;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& v = values[k];
    out[k].count = v.size();
    if (v.empty()) {
      out[k].mean = out[k].sd = std::nan("");
      continue;
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[k].mean = mean;
    out[k].sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  std::stable_sort(out.begin(), out.end(), [](const SummaryRow& a, const SummaryRow& b) {
    return std::tie(a.metric, a.algorithm, a.n) < std::tie(b.metric, b.algorithm, b.n);
  });
  return out;
}

}  // namespace detail

inline void write_summary_file(const std::string& path, const std::string& preset,
                               const std::vector<SummaryRow>& summary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
  out << "preset,algorithm,n,metric,count,failed,mean,sd\n";
  for (const auto& s : summary)
    out << preset << ',' << s.algorithm << ',' << s.n << ',' << s.metric << ',' << s.count << ',' << s.failed << ','
        << format_double(s.mean) << ',' << format_double(s.sd) << '\n';
}

inline Mode resolve_mode(const ExperimentConfig& c, Mode mode) {
  if (mode != Mode::automatic) return mode;
  if (c.preset == Preset::design_diagnostics) return Mode::design;
  return c.is_bandit() ? Mode::bandit : Mode::estimate;
}

/**
 * Runs every repetition of a configured experiment on a worker pool and
 * collects rows in repetition order. Repetition k uses seed base_seed + k.
 * When `write_files` is set, results.csv, summary.csv, timings.csv and one
 * SVG chart per metric are written to the output directory.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& config, Mode mode = Mode::automatic,
                                       bool write_files = true) {
  config.validate();
  mode = resolve_mode(config, mode);
  const std::string preset(preset_name(config.preset));
  namespace fs = std::filesystem;
  const fs::path out_dir(config.output_dir);
  if (write_files) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
      throw Error(Errc::io, "output directory '" + config.output_dir + "' is not writable");
    const fs::path probe = out_dir / ".write_probe";
    if (!std::ofstream(probe)) throw Error(Errc::io, "output directory '" + config.output_dir + "' is not writable");
    fs::remove(probe, ec);
  }

  const InstanceFactory inst(config);
  ExperimentResult result;
  detail::SharedDesigns designs;
  const bool design_mode = mode == Mode::design;
  DesignSolverOptions solver;
  solver.seed = config.base_seed;
  if (design_mode || detail::needs(config, {"popart", "h2-lasso", "etc-popart", "restricted-phase-elim"}))
    designs.h_star = solve_h_star(inst.actions(), solver);
  if (design_mode || detail::needs(config, {"c_min-lasso", "estc"})) designs.c_min = solve_c_min(inst.actions(), solver);

  if (design_mode) {
    detail::RowSink sink(config, config.base_seed);
    sink.add("solve_h_star", 0, "h_star_sq", designs.h_star->objective);
    sink.add("solve_c_min", 0, "c_min", designs.c_min->objective);
    result.rows = std::move(sink.rows);
    std::ostringstream rep;
    rep << "arms K=" << inst.actions().size() << " d=" << inst.actions().dim() << "\n";
    rep << "H*^2 = " << format_double(designs.h_star->objective) << " (" << designs.h_star->iterations
        << " iterations, gap " << designs.h_star->certified_gap << ")\n";
    rep << "C_min = " << format_double(designs.c_min->objective)
        << "  1/C_min = " << format_double(1.0 / designs.c_min->objective) << "\n";
    rep << "1/C_min over H*^2 = " << 1.0 / designs.c_min->objective / designs.h_star->objective << "\n";
    if (config.preset == Preset::design_diagnostics || config.preset == Preset::case1_l1 ||
        config.preset == Preset::case1_bandit) {
      const double closed = hard_set_h_star_sq(config.d);
      const auto br = hard_set_cmin_bracket(config.d);
      const double inv = 1.0 / designs.c_min->objective;
      rep << "closed-form H*^2 = " << format_double(closed)
          << "  relative error = " << std::abs(designs.h_star->objective - closed) / closed << "\n";
      rep << "f(b) bracket: b* = " << br.b_star << "  [" << format_double(br.lower) << ", " << format_double(br.upper)
          << "]  1/C_min inside: " << (inv >= br.lower && inv <= br.upper ? "yes" : "no") << "\n";
    }
    result.report = rep.str();
    if (write_files) {
      write_matrix_file((out_dir / "design_h_star.txt").string(), designs.h_star->design.weights());
      write_matrix_file((out_dir / "design_c_min.txt").string(), designs.c_min->design.weights());
      result.files.push_back((out_dir / "design_h_star.txt").string());
      result.files.push_back((out_dir / "design_c_min.txt").string());
    }
  } else {
    const auto reps = static_cast<std::size_t>(config.reps);
    std::vector<detail::RowSink> sinks;
    sinks.reserve(reps);
    for (std::size_t k = 0; k < reps; ++k) sinks.emplace_back(config, config.base_seed + k);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k; (k = next.fetch_add(1)) < reps;) {
        const std::uint64_t seed = config.base_seed + k;
        try {
          if (mode == Mode::bandit) {
            detail::run_bandit_rep(config, inst, designs, seed, sinks[k]);
          } else {
            detail::run_estimation_rep(config, inst, designs, seed, sinks[k]);
          }
        } catch (const std::exception& e) {
          sinks[k].failures.push_back(std::string("rep aborted: ") + e.what());
        }
      }
    };
    const unsigned workers = std::min<unsigned>(config.worker_count(), static_cast<unsigned>(reps));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ostringstream rep;
    for (auto& s : sinks) {
      result.rows.insert(result.rows.end(), s.rows.begin(), s.rows.end());
      result.timings.insert(result.timings.end(), s.timings.begin(), s.timings.end());
      for (const auto& f : s.failures) rep << "failure (seed " << (&s - sinks.data()) + config.base_seed << "): " << f << "\n";
    }
    result.report = rep.str();
  }
  result.summary = detail::summarize(result.rows);

  if (write_files) {
    const auto csv = (out_dir / "results.csv").string();
    write_rows_file(csv, result.rows);
    write_rows_file((out_dir / "timings.csv").string(), result.timings);
    write_summary_file((out_dir / "summary.csv").string(), preset, result.summary);
    result.files.insert(result.files.end(), {csv, (out_dir / "timings.csv").string(), (out_dir / "summary.csv").string()});

    std::map<std::string, std::map<std::string, Series>> charts;
    for (const auto& s : result.summary) {
      auto& series = charts[s.metric][s.algorithm];
      series.label = s.algorithm;
      series.points.push_back({static_cast<double>(s.n), s.mean, s.sd});
    }
    for (auto& [metric, by_alg] : charts) {
      std::vector<Series> series;
      for (auto& [alg, ser] : by_alg) series.push_back(std::move(ser));
      const auto path = (out_dir / (preset + "_" + metric + ".svg")).string();
      write_svg_file(path, render_svg(preset + ": " + metric, "n", metric + " (mean +- sd)", series));
      result.files.push_back(path);
    }
    if (!result.report.empty()) {
      const auto path = (out_dir / "report.txt").string();
      std::ofstream(path) << result.report;
      result.files.push_back(path);
    }
  }
  return result;
}

}  // namespace popart::bench
