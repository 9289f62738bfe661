#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "popart/catoni.hpp"
#include "popart/core.hpp"
#include "popart/design.hpp"

namespace popart {

/// Dense (covariate, response) pairs: X is n x d, r has length n.
class SampleBatch {
 public:
  SampleBatch(Matrix covariates, Vector responses)
      : covariates_(std::move(covariates)), responses_(std::move(responses)) {
    detail::require(covariates_.rows() == responses_.size(), Errc::dimension_mismatch,
                    "SampleBatch: covariate rows differ from response length");
    detail::require(covariates_.rows() >= 1 && covariates_.cols() >= 1, Errc::invalid_argument,
                    "SampleBatch: need n >= 1 and d >= 1");
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(covariates_.rows()); }
  Index dim() const noexcept { return covariates_.cols(); }
  const Matrix& covariates() const noexcept { return covariates_; }
  const Vector& responses() const noexcept { return responses_; }

  Vector project(const Vector& direction) const { return covariates_ * direction; }
  Vector residuals(const Vector& pilot) const { return responses_ - covariates_ * pilot; }

  SampleBatch slice(std::size_t begin, std::size_t count) const {
    const auto b = static_cast<Index>(begin), c = static_cast<Index>(count);
    return SampleBatch(covariates_.middleRows(b, c), responses_.segment(b, c));
  }

 private:
  Matrix covariates_;
  Vector responses_;
};

/// Samples whose covariates are arms of an ActionSet, stored by arm index.
/// Non-owning view: the arm set and both spans must outlive it.
class ArmSampleView {
 public:
  ArmSampleView(const ActionSet& actions, std::span<const std::uint32_t> arm_index,
                std::span<const double> responses)
      : actions_(&actions), arm_index_(arm_index), responses_(responses) {
    detail::require(arm_index_.size() == responses_.size(), Errc::dimension_mismatch,
                    "ArmSampleView: index and response lengths differ");
    detail::require(!arm_index_.empty(), Errc::invalid_argument, "ArmSampleView: empty sample");
  }

  std::size_t size() const noexcept { return arm_index_.size(); }
  Index dim() const noexcept { return actions_->dim(); }

  Vector project(const Vector& direction) const {
    const Vector per_arm = actions_->arms() * direction;
    Vector out(static_cast<Index>(size()));
    for (std::size_t t = 0; t < size(); ++t) out(static_cast<Index>(t)) = per_arm(arm_index_[t]);
    return out;
  }

  Vector residuals(const Vector& pilot) const {
    const Vector per_arm = actions_->arms() * pilot;
    Vector out(static_cast<Index>(size()));
    for (std::size_t t = 0; t < size(); ++t)
      out(static_cast<Index>(t)) = responses_[t] - per_arm(arm_index_[t]);
    return out;
  }

  ArmSampleView slice(std::size_t begin, std::size_t count) const {
    return ArmSampleView(*actions_, arm_index_.subspan(begin, count), responses_.subspan(begin, count));
  }

  /// Materializes the dense batch (n x d copy).
  SampleBatch to_batch() const {
    Matrix x(static_cast<Index>(size()), dim());
    Vector r(static_cast<Index>(size()));
    for (std::size_t t = 0; t < size(); ++t) {
      x.row(static_cast<Index>(t)) = actions_->arm(arm_index_[t]);
      r(static_cast<Index>(t)) = responses_[t];
    }
    return SampleBatch(std::move(x), std::move(r));
  }

 private:
  const ActionSet* actions_;
  std::span<const std::uint32_t> arm_index_;
  std::span<const double> responses_;
};

template <class S>
concept SampleSource = requires(const S& s, const Vector& v, std::size_t i) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.dim() } -> std::convertible_to<Index>;
  { s.project(v) } -> std::convertible_to<Vector>;
  { s.residuals(v) } -> std::convertible_to<Vector>;
  { s.slice(i, i) } -> std::same_as<S>;
};

struct PopArtConfig {
  double sigma;  // sub-Gaussian noise scale
  double delta;  // failure rate
  double r0;     // bound on max_a |<a, theta* - pilot>|
  Vector pilot;

  void validate(Index d) const {
    detail::require(delta > 0.0 && delta < 1.0, Errc::invalid_argument, "PopArtConfig: delta must lie in (0, 1)");
    detail::require(sigma >= 0.0 && r0 >= 0.0, Errc::invalid_argument, "PopArtConfig: sigma and r0 must be >= 0");
    detail::require(r0 * r0 + sigma * sigma > 0.0, Errc::invalid_argument,
                    "PopArtConfig: r0^2 + sigma^2 must be positive");
    detail::require(pilot.size() == d, Errc::dimension_mismatch, "PopArtConfig: pilot has wrong dimension");
  }
};

/// Estimator output: thresholded estimate, pre-threshold Catoni values,
/// per-coordinate thresholds, and the support of theta_hat.
struct SparseEstimate {
  Vector theta_hat;
  Vector theta_prime;
  Vector thresholds;
  std::vector<Index> support;
};

/// clip_lambda(v)_i = v_i if |v_i| > lambda_i, else 0.
inline Vector hard_threshold(const Vector& values, const Vector& thresholds) {
  detail::require(values.size() == thresholds.size(), Errc::dimension_mismatch,
                  "hard_threshold: length mismatch");
  return (values.array().abs() > thresholds.array()).select(values, 0.0);
}

inline std::vector<Index> support_of(const Vector& v) {
  std::vector<Index> s;
  for (Index i = 0; i < v.size(); ++i)
    if (v(i) != 0.0) s.push_back(i);
  return s;
}

inline SparseEstimate make_sparse_estimate(Vector theta_prime, Vector thresholds) {
  Vector theta_hat = hard_threshold(theta_prime, thresholds);
  auto support = support_of(theta_hat);
  return {std::move(theta_hat), std::move(theta_prime), std::move(thresholds), std::move(support)};
}

/// Row t = Q^{-1} X_t (r_t - <X_t, pilot>) + pilot; each row is unbiased for theta*.
inline Matrix one_sample_estimates(const SampleBatch& batch, const Matrix& q_inv, const Vector& pilot) {
  const Index d = batch.dim();
  detail::require(q_inv.rows() == d && q_inv.cols() == d && pilot.size() == d, Errc::dimension_mismatch,
                  "one_sample_estimates: dimension mismatch");
  const double scale = std::max(1.0, q_inv.cwiseAbs().maxCoeff());
  detail::require((q_inv - q_inv.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, Errc::invalid_argument,
                  "one_sample_estimates: q_inv must be symmetric");
  const Vector res = batch.residuals(pilot);
  Matrix out = batch.covariates() * q_inv;
  out.array().colwise() *= res.array();
  out.rowwise() += pilot.transpose();
  return out;
}

/// Confidence radius for coordinate i: sqrt(4 (R0^2 + sigma^2) (Q^{-1})_ii log(2d/delta) / n).
inline double popart_threshold(double q_inv_ii, double r0, double sigma, double delta, Index d, std::size_t n) {
  return std::sqrt(4.0 * (r0 * r0 + sigma * sigma) * q_inv_ii * std::log(2.0 * static_cast<double>(d) / delta) /
                   static_cast<double>(n));
}

/**
 * Population-covariance regression with hard thresholding.
 *
 * Builds one-sample estimates against the known covariance Q, takes a
 * per-coordinate Catoni mean (variance bound (R0^2 + sigma^2) (Q^{-1})_ii,
 * failure rate delta / 2d), then zeroes every coordinate whose magnitude
 * does not exceed its confidence radius.
 */
template <SampleSource S>
SparseEstimate popart(const S& batch, const CovMatrix& q, const PopArtConfig& config) {
  const Index d = batch.dim();
  const std::size_t n = batch.size();
  detail::require(q.dim() == d, Errc::dimension_mismatch, "popart: covariance dimension differs from data");
  config.validate(d);
  const double log_term = std::log(2.0 * static_cast<double>(d) / config.delta);
  detail::require(static_cast<double>(n) > 2.0 * log_term, Errc::insufficient_samples,
                  "insufficient samples: popart needs n > 2 log(2d/delta)");

  const Matrix& q_inv = q.q_inv();
  const double scale2 = config.r0 * config.r0 + config.sigma * config.sigma;
  const double coord_delta = config.delta / (2.0 * static_cast<double>(d));
  const Vector res = batch.residuals(config.pilot);

  Vector theta_prime(d), thresholds(d);
  Vector z;
  for (Index i = 0; i < d; ++i) {
    z = batch.project(q_inv.col(i));
    z.array() = z.array() * res.array() + config.pilot(i);
    const double alpha = catoni_alpha(n, scale2 * q_inv(i, i), coord_delta);
    theta_prime(i) = catoni_estimate(std::span<const double>(z.data(), n), {alpha, coord_delta});
    thresholds(i) = popart_threshold(q_inv(i, i), config.r0, config.sigma, config.delta, d, n);
  }
  return make_sparse_estimate(std::move(theta_prime), std::move(thresholds));
}

struct WarmPopArtResult {
  SparseEstimate coarse;   // first half, pilot 0, R0 = r_max
  SparseEstimate refined;  // second half, pilot = coarse, R0 = sigma
  PopArtConfig refine_config;
  bool refined_stage_run;  // false only when sigma == 0 (no valid second-stage variance bound)
};

/// Two-stage estimator: a coarse pass on the first floor(n0/2) samples supplies
/// the pilot for a second pass on the rest with R0 = sigma.
template <SampleSource S>
WarmPopArtResult warm_popart_stages(const S& batch, const CovMatrix& q, double r_max, double sigma, double delta) {
  const Index d = batch.dim();
  const std::size_t n0 = batch.size();
  detail::require(delta > 0.0 && delta < 1.0, Errc::invalid_argument, "warm_popart: delta must lie in (0, 1)");
  const double log_term = std::log(2.0 * static_cast<double>(d) / delta);
  const std::size_t first = n0 / 2;
  const std::size_t second = n0 - first;
  detail::require(static_cast<double>(first) > 2.0 * log_term, Errc::insufficient_samples,
                  "insufficient samples for warm-up: need n0 >= 4 log(2d/delta)");

  SparseEstimate coarse = popart(batch.slice(0, first), q, PopArtConfig{sigma, delta, r_max, Vector::Zero(d)});
  PopArtConfig refine{sigma, delta, sigma, coarse.theta_hat};
  if (sigma == 0.0) return {coarse, coarse, std::move(refine), false};
  SparseEstimate refined = popart(batch.slice(first, second), q, refine);
  return {std::move(coarse), std::move(refined), std::move(refine), true};
}

template <SampleSource S>
SparseEstimate warm_popart(const S& batch, const CovMatrix& q, double r_max, double sigma, double delta) {
  return warm_popart_stages(batch, q, r_max, sigma, delta).refined;
}

}  // namespace popart
