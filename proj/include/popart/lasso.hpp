#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "popart/core.hpp"
#include "popart/estimator.hpp"

namespace popart {

inline double soft_threshold(double x, double t) noexcept {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// (1 / 2n) ||r - X theta||^2 + lambda ||theta||_1
inline double lasso_objective(const SampleBatch& batch, const Vector& theta, double lambda_reg) {
  const double n = static_cast<double>(batch.size());
  return 0.5 * (batch.responses() - batch.covariates() * theta).squaredNorm() / n + lambda_reg * theta.lpNorm<1>();
}

enum class LassoLambdaRule {
  noise_scaled,  // sigma * sqrt(2 log(2d/delta) / n)
  unscaled,      // sqrt(2 log(2d/delta) / n)
};

inline double lasso_lambda(std::size_t n, Index d, double delta, double sigma,
                           LassoLambdaRule rule = LassoLambdaRule::noise_scaled) {
  const double base = std::sqrt(2.0 * std::log(2.0 * static_cast<double>(d) / delta) / static_cast<double>(n));
  return rule == LassoLambdaRule::noise_scaled ? sigma * base : base;
}

struct LassoResult {
  Vector theta;
  bool converged;
  std::size_t iterations;  // full coordinate sweeps
  double objective;
};

/// Cyclic coordinate descent; stops once a full sweep moves no coordinate by tol or more.
inline LassoResult lasso_cd(const SampleBatch& batch, double lambda_reg, double tol, std::size_t max_iter) {
  detail::require(tol > 0.0, Errc::invalid_argument, "lasso_cd: tol must be positive");
  detail::require(lambda_reg >= 0.0, Errc::invalid_argument, "lasso_cd: lambda must be nonnegative");
  const Matrix& x = batch.covariates();
  const Index d = x.cols();
  const double n = static_cast<double>(batch.size());

  Vector col_sq = x.colwise().squaredNorm().transpose() / n;
  Vector theta = Vector::Zero(d);
  Vector residual = batch.responses();
  bool converged = false;
  std::size_t sweep = 0;
  while (sweep < max_iter) {
    ++sweep;
    double max_change = 0.0;
    for (Index j = 0; j < d; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double rho = x.col(j).dot(residual) / n + col_sq(j) * theta(j);
      const double updated = soft_threshold(rho, lambda_reg) / col_sq(j);
      const double change = updated - theta(j);
      if (change != 0.0) {
        residual.noalias() -= change * x.col(j);
        theta(j) = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    if (max_change < tol) {
      converged = true;
      break;
    }
  }
  const double objective = lasso_objective(batch, theta, lambda_reg);
  return {std::move(theta), converged, sweep, objective};
}

}  // namespace popart
