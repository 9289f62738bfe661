#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popart/core.hpp"
#include "popart/design.hpp"
#include "popart/estimator.hpp"
#include "popart/lasso.hpp"
#include "popart/rng.hpp"

namespace popart {

/// Sparse linear bandit: reward of arm a at round t is <theta*, a> + sigma * eta_t,
/// where eta_t is a standard normal keyed by (seed, t).
class BanditEnv {
 public:
  BanditEnv(ActionSet actions, Vector theta_star, double sigma, std::uint64_t seed, int sparsity)
      : actions_(std::move(actions)), theta_star_(std::move(theta_star)), sigma_(sigma), seed_(seed),
        sparsity_(sparsity) {
    detail::require(theta_star_.size() == actions_.dim(), Errc::dimension_mismatch,
                    "BanditEnv: theta* dimension differs from arms");
    detail::require(sigma_ >= 0.0, Errc::invalid_argument, "BanditEnv: sigma must be >= 0");
    detail::require(sparsity_ >= 0 && (theta_star_.array() != 0.0).count() <= sparsity_, Errc::invalid_argument,
                    "BanditEnv: theta* has more nonzeros than the declared sparsity");
    means_ = actions_.arms() * theta_star_;
    best_ = means_.maxCoeff();
  }

  const ActionSet& actions() const noexcept { return actions_; }
  const Vector& theta_star() const noexcept { return theta_star_; }
  double sigma() const noexcept { return sigma_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int sparsity() const noexcept { return sparsity_; }
  double mean_reward(Index arm) const { return means_(arm); }
  double best_mean() const noexcept { return best_; }
  double gap(Index arm) const { return best_ - means_(arm); }

 private:
  ActionSet actions_;
  Vector theta_star_;
  double sigma_;
  std::uint64_t seed_;
  int sparsity_;
  Vector means_;
  double best_;
};

inline double env_pull(const BanditEnv& env, Index arm, std::uint64_t round) {
  detail::require(arm >= 0 && arm < env.actions().size(), Errc::invalid_argument, "env_pull: arm index out of range");
  return env.mean_reward(arm) + env.sigma() * rng::normal_at(env.seed(), rng::kRewardNoise, round);
}

/// Per-round pseudo-regret and its running sum.
struct RegretTrace {
  std::vector<double> instantaneous;
  std::vector<double> cumulative;

  std::size_t size() const noexcept { return instantaneous.size(); }
  double total() const noexcept { return cumulative.empty() ? 0.0 : cumulative.back(); }
  /// Cumulative regret after the first `rounds` rounds.
  double at(std::size_t rounds) const { return rounds == 0 ? 0.0 : cumulative.at(rounds - 1); }
};

struct AlgorithmReport {
  RegretTrace regret;
  std::optional<SparseEstimate> estimate;
  std::optional<std::vector<Index>> recovered_support;
  std::size_t exploration_length = 0;
  std::vector<std::size_t> pull_counts;
  std::vector<std::uint32_t> arm_history;
  bool empty_support = false;
};

struct BanditOptions {
  std::optional<DesignSolution> design;  // reuse a precomputed design instead of solving
  DesignSolverOptions solver;
  double lasso_tol = 1e-8;
  std::size_t lasso_max_iter = 10000;
  LassoLambdaRule lasso_rule = LassoLambdaRule::noise_scaled;
};

namespace detail {

/// Serial driver shared by all algorithms: pulls arms, records regret and history.
class BanditRunner {
 public:
  BanditRunner(const BanditEnv& env, std::size_t horizon, std::uint64_t first_round = 0)
      : env_(env), horizon_(horizon), round_(first_round), first_(first_round) {
    report_.pull_counts.assign(static_cast<std::size_t>(env.actions().size()), 0);
    report_.regret.instantaneous.reserve(horizon);
    report_.regret.cumulative.reserve(horizon);
    report_.arm_history.reserve(horizon);
  }

  std::size_t remaining() const noexcept { return horizon_ - played(); }
  std::size_t played() const noexcept { return static_cast<std::size_t>(round_ - first_); }
  std::uint64_t round() const noexcept { return round_; }

  double pull(Index arm) {
    const double reward = env_pull(env_, arm, round_);
    const double g = env_.gap(arm);
    auto& tr = report_.regret;
    tr.instantaneous.push_back(g);
    tr.cumulative.push_back((tr.cumulative.empty() ? 0.0 : tr.cumulative.back()) + g);
    ++report_.pull_counts[static_cast<std::size_t>(arm)];
    report_.arm_history.push_back(static_cast<std::uint32_t>(arm));
    ++round_;
    return reward;
  }

  AlgorithmReport& report() noexcept { return report_; }
  AlgorithmReport take() { return std::move(report_); }

 private:
  const BanditEnv& env_;
  std::size_t horizon_;
  std::uint64_t round_;
  std::uint64_t first_;
  AlgorithmReport report_;
};

/// Draws arms i.i.d. from a design with a counter-keyed uniform per round.
class DesignSampler {
 public:
  DesignSampler(const Design& design, std::uint64_t seed, std::uint64_t tag) : seed_(seed), tag_(tag) {
    cdf_.resize(static_cast<std::size_t>(design.size()));
    double acc = 0.0;
    for (Index k = 0; k < design.size(); ++k) {
      acc += design.weights()(k);
      cdf_[static_cast<std::size_t>(k)] = acc;
    }
    cdf_.back() = 1.0;
  }

  Index draw(std::uint64_t round) const {
    const double u = rng::uniform_at(seed_, rng::kExplorationArm * 16 + tag_, round);
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    auto k = static_cast<Index>(it - cdf_.begin());
    // skip zero-weight arms that share a cdf value with their successor
    while (k > 0 && cdf_[static_cast<std::size_t>(k - 1)] >= u) --k;
    return std::min<Index>(k, static_cast<Index>(cdf_.size()) - 1);
  }

 private:
  std::vector<double> cdf_;
  std::uint64_t seed_;
  std::uint64_t tag_;
};

enum AlgorithmTag : std::uint64_t { kEtcPopArt = 1, kEstc = 2, kRestrictedPhaseElim = 3 };

/// Explores `count` rounds from the design; returns the rewards (arms are in the history).
inline std::vector<double> explore(BanditRunner& runner, const Design& design, std::uint64_t seed,
                                   std::uint64_t tag, std::size_t count) {
  DesignSampler sampler(design, seed, tag);
  std::vector<double> rewards;
  rewards.reserve(count);
  for (std::size_t t = 0; t < count; ++t) rewards.push_back(runner.pull(sampler.draw(runner.round())));
  return rewards;
}

inline Index greedy_arm(const ActionSet& actions, const Vector& theta) {
  const Vector values = actions.arms() * theta;
  Index best = 0;
  for (Index k = 1; k < values.size(); ++k)
    if (values(k) > values(best)) best = k;
  return best;
}

inline void commit(BanditRunner& runner, Index arm) {
  while (runner.remaining() > 0) runner.pull(arm);
}

inline std::size_t round_clamped(double value, std::size_t lo, std::size_t hi) {
  if (!std::isfinite(value)) return value > 0 ? hi : lo;
  const double r = std::round(value);
  if (r <= static_cast<double>(lo)) return lo;
  if (r >= static_cast<double>(hi)) return hi;
  return static_cast<std::size_t>(r);
}

}  // namespace detail

/// G-optimal design on the rows of `features` by Frank-Wolfe on log det.
/// Stops once the maximal leverage is within (1 + tol) of the dimension.
inline Vector g_optimal_design(const Matrix& features, std::size_t max_iter = 1000, double tol = 1e-3) {
  const Index m = features.rows();
  const Index r = features.cols();
  Vector mu = Vector::Constant(m, 1.0 / static_cast<double>(m));
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Matrix v = features.transpose() * mu.asDiagonal() * features;
    const Matrix vinv = v.ldlt().solve(Matrix::Identity(r, r));
    const Vector lev = (features * vinv).cwiseProduct(features).rowwise().sum();
    Index k = 0;
    const double lmax = lev.maxCoeff(&k);
    const double dim = static_cast<double>(r);
    if (lmax <= (1.0 + tol) * dim) break;
    const double gamma = (lmax / dim - 1.0) / (lmax - 1.0);
    mu *= (1.0 - gamma);
    mu(k) += gamma;
  }
  return mu;
}

struct PhaseRecord {
  double epsilon;
  std::size_t active_before;
  std::size_t active_after;
  std::size_t pulls;
};

struct PhasedEliminationResult {
  RegretTrace regret;
  std::vector<PhaseRecord> phases;
  std::vector<Index> surviving_arms;
};

namespace detail {

// Coordinates of the rows of `b` in an orthonormal basis of their row space.
inline Matrix row_space_coordinates(const Matrix& b) {
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Index rank = 0;
  const double cut = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  if (rank == 0) return Matrix::Zero(b.rows(), 0);
  return b * svd.matrixV().leftCols(rank);
}

inline std::vector<PhaseRecord> phased_elimination_drive(BanditRunner& runner, const ActionSet& restricted,
                                                         double delta, std::vector<Index>& active) {
  const Index k_total = restricted.size();
  active.resize(static_cast<std::size_t>(k_total));
  for (Index k = 0; k < k_total; ++k) active[static_cast<std::size_t>(k)] = k;
  std::vector<PhaseRecord> phases;

  for (int ell = 1; runner.remaining() > 0; ++ell) {
    const double eps = std::ldexp(1.0, -ell);
    if (active.size() == 1) {
      commit(runner, active.front());
      break;
    }
    Matrix b(static_cast<Index>(active.size()), restricted.dim());
    for (std::size_t j = 0; j < active.size(); ++j) b.row(static_cast<Index>(j)) = restricted.arm(active[j]);
    const Matrix y = row_space_coordinates(b);
    const Index dim = y.cols();
    if (dim == 0) {  // all active arms are identical on these coordinates
      commit(runner, active.front());
      break;
    }
    const Vector mu = g_optimal_design(y);
    const double log_term = std::log(static_cast<double>(k_total) * ell * (ell + 1.0) / delta);
    const double scale = 2.0 * static_cast<double>(dim) / (eps * eps) * log_term;

    Matrix gram = Matrix::Zero(dim, dim);
    Vector moment = Vector::Zero(dim);
    std::size_t pulls = 0;
    for (std::size_t j = 0; j < active.size() && runner.remaining() > 0; ++j) {
      const auto count = static_cast<std::size_t>(std::ceil(mu(static_cast<Index>(j)) * scale));
      const Vector yj = y.row(static_cast<Index>(j)).transpose();
      for (std::size_t c = 0; c < count && runner.remaining() > 0; ++c) {
        const double reward = runner.pull(active[j]);
        gram.noalias() += yj * yj.transpose();
        moment += reward * yj;
        ++pulls;
      }
    }
    if (runner.remaining() == 0) {
      phases.push_back({eps, active.size(), active.size(), pulls});
      break;
    }
    const Vector theta = gram.ldlt().solve(moment);
    const Vector est = y * theta;
    const double best = est.maxCoeff();
    std::vector<Index> next;
    for (std::size_t j = 0; j < active.size(); ++j)
      if (best - est(static_cast<Index>(j)) <= 2.0 * eps) next.push_back(active[j]);
    phases.push_back({eps, active.size(), next.size(), pulls});
    active = std::move(next);
  }
  return phases;
}

}  // namespace detail

/// Phased elimination on a (coordinate-restricted) arm set whose rows correspond
/// one-to-one with the environment's arms. Rewards come from the full environment.
inline PhasedEliminationResult phased_elimination_run(const ActionSet& actions_restricted, const BanditEnv& env,
                                                      std::size_t horizon, double delta,
                                                      std::uint64_t first_round = 0) {
  detail::require(actions_restricted.size() == env.actions().size(), Errc::dimension_mismatch,
                  "phased_elimination: restricted arms must match the environment's arms");
  detail::require(delta > 0.0 && delta < 1.0, Errc::invalid_argument, "phased_elimination: delta must lie in (0, 1)");
  detail::BanditRunner runner(env, horizon, first_round);
  std::vector<Index> active;
  auto phases = detail::phased_elimination_drive(runner, actions_restricted, delta, active);
  return {std::move(runner.report().regret), std::move(phases), std::move(active)};
}

inline RegretTrace phased_elimination(const ActionSet& actions_restricted, const BanditEnv& env, std::size_t horizon,
                                      double delta, std::uint64_t first_round = 0) {
  return phased_elimination_run(actions_restricted, env, horizon, delta, first_round).regret;
}

/// Exploration length n0 = 4 (s^2 sigma^2 H*^2 n^2 log(2d/delta) / R_max^2)^{1/3},
/// rounded and clamped to [4 ceil(log(2d/delta)), n].
inline std::size_t etc_exploration_length(std::size_t n, Index d, int s, double sigma, double h_star_sq,
                                          double delta, double r_max) {
  const double log_term = std::log(2.0 * static_cast<double>(d) / delta);
  const double nn = static_cast<double>(n);
  const double raw = 4.0 * std::cbrt(s * s * sigma * sigma * h_star_sq * nn * nn * log_term / (r_max * r_max));
  const auto lo = static_cast<std::size_t>(4.0 * std::ceil(log_term));
  return detail::round_clamped(raw, std::min(lo, n), n);
}

/// Exploration length of the Lasso baseline: (s^2 sigma^2 n^2 log(2d/delta) / (C_min^2 R_max^2))^{1/3}.
inline std::size_t estc_exploration_length(std::size_t n, Index d, int s, double sigma, double c_min, double delta,
                                           double r_max) {
  const double log_term = std::log(2.0 * static_cast<double>(d) / delta);
  const double nn = static_cast<double>(n);
  const double raw = std::cbrt(s * s * sigma * sigma * nn * nn * log_term / (c_min * c_min * r_max * r_max));
  return detail::round_clamped(raw, std::min<std::size_t>(1, n), n);
}

/// Support-recovery length max(256 sigma^2 H*^2 / m^2, 32 s^2 (R_max^2 + sigma^2) H*^2 / sigma^2) log(2d/delta).
inline double support_recovery_length(Index d, int s, double sigma, double h_star_sq, double delta, double r_max,
                                      double m) {
  const double log_term = std::log(2.0 * static_cast<double>(d) / delta);
  const double first = 256.0 * sigma * sigma * h_star_sq / (m * m) * log_term;
  const double second = 32.0 * s * s * (r_max * r_max + sigma * sigma) * h_star_sq / (sigma * sigma) * log_term;
  return std::max(first, second);
}

namespace detail {

inline void check_bandit_args(const BanditEnv& env, std::size_t n, double delta, double r_max) {
  require(n >= 1, Errc::invalid_argument, "bandit: horizon must be >= 1");
  require(delta > 0.0 && delta < 1.0, Errc::invalid_argument, "bandit: delta must lie in (0, 1)");
  require(r_max > 0.0 && std::isfinite(r_max), Errc::invalid_argument, "bandit: r_max must be positive");
  require(env.actions().spans(), Errc::rank_deficient, "bandit: action set does not span R^d");
}

}  // namespace detail

/// Explore-then-commit: explore from the H*^2-optimal design, estimate with
/// the two-stage PopArt estimator, then play the greedy arm.
inline AlgorithmReport run_etc_popart(const BanditEnv& env, std::size_t n, double delta, double r_max, int s,
                                      const BanditOptions& opt = {}) {
  detail::check_bandit_args(env, n, delta, r_max);
  const DesignSolution sol = opt.design ? *opt.design : solve_h_star(env.actions(), opt.solver);
  const Index d = env.actions().dim();
  const std::size_t n0 = etc_exploration_length(n, d, s, env.sigma(), sol.objective, delta, r_max);

  detail::BanditRunner runner(env, n);
  const auto rewards = detail::explore(runner, sol.design, env.seed(), detail::kEtcPopArt, n0);
  const ArmSampleView samples(env.actions(), std::span(runner.report().arm_history).first(n0), rewards);
  SparseEstimate est = warm_popart(samples, sol.cov, r_max, env.sigma(), delta);
  detail::commit(runner, detail::greedy_arm(env.actions(), est.theta_hat));

  AlgorithmReport report = runner.take();
  report.exploration_length = n0;
  report.estimate = std::move(est);
  return report;
}

/// Lasso explore-then-commit baseline on the C_min-optimal design.
inline AlgorithmReport run_estc_baseline(const BanditEnv& env, std::size_t n, double delta, double r_max, int s,
                                         const BanditOptions& opt = {}) {
  detail::check_bandit_args(env, n, delta, r_max);
  const DesignSolution sol = opt.design ? *opt.design : solve_c_min(env.actions(), opt.solver);
  const Index d = env.actions().dim();
  const std::size_t n0 = estc_exploration_length(n, d, s, env.sigma(), sol.objective, delta, r_max);

  detail::BanditRunner runner(env, n);
  const auto rewards = detail::explore(runner, sol.design, env.seed(), detail::kEstc, n0);
  const SampleBatch batch =
      ArmSampleView(env.actions(), std::span(runner.report().arm_history).first(n0), rewards).to_batch();
  const double lambda = lasso_lambda(n0, d, delta, env.sigma(), opt.lasso_rule);
  const LassoResult fit = lasso_cd(batch, lambda, opt.lasso_tol, opt.lasso_max_iter);
  detail::commit(runner, detail::greedy_arm(env.actions(), fit.theta));

  AlgorithmReport report = runner.take();
  report.exploration_length = n0;
  return report;
}

/// Support recovery with the two-stage estimator followed by phased
/// elimination on the recovered coordinates.
inline AlgorithmReport run_restricted_phase_elim(const BanditEnv& env, std::size_t n, double delta, double r_max,
                                                 int s, double m, const BanditOptions& opt = {}) {
  detail::check_bandit_args(env, n, delta, r_max);
  detail::require(m > 0.0, Errc::invalid_argument, "restricted phase elimination: minimum signal must be positive");
  const DesignSolution sol = opt.design ? *opt.design : solve_h_star(env.actions(), opt.solver);
  const Index d = env.actions().dim();

  double min_signal = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < d; ++j)
    if (env.theta_star()(j) != 0.0) min_signal = std::min(min_signal, std::abs(env.theta_star()(j)));
  if (!(min_signal > m)) warn("minimum signal condition violated: min |theta*_j| <= m");

  const double n2_real = support_recovery_length(d, s, env.sigma(), sol.objective, delta, r_max, m);
  const double log_term = std::log(2.0 * static_cast<double>(d) / delta);
  const auto floor_len = static_cast<std::size_t>(4.0 * std::ceil(log_term));
  detail::require(std::isfinite(n2_real) && static_cast<double>(n) > std::max(std::round(n2_real), double(floor_len)),
                  Errc::horizon_too_short, "horizon too short for support recovery phase");
  const std::size_t n2 = detail::round_clamped(n2_real, floor_len, n);

  detail::BanditRunner runner(env, n);
  std::vector<double> rewards = detail::explore(runner, sol.design, env.seed(), detail::kRestrictedPhaseElim, n2);
  SparseEstimate est = [&] {
    const ArmSampleView samples(env.actions(), std::span(runner.report().arm_history).first(n2), rewards);
    return warm_popart(samples, sol.cov, r_max, env.sigma(), delta);
  }();
  std::vector<double>().swap(rewards);

  std::vector<Index> support = est.support;
  bool empty = support.empty();
  if (empty) {
    detail::commit(runner, detail::greedy_arm(env.actions(), est.theta_hat));
  } else {
    const ActionSet restricted = env.actions().restricted(support);
    std::vector<Index> active;
    detail::phased_elimination_drive(runner, restricted, delta, active);
  }

  AlgorithmReport report = runner.take();
  report.exploration_length = n2;
  report.estimate = std::move(est);
  report.recovered_support = std::move(support);
  report.empty_support = empty;
  return report;
}

}  // namespace popart
