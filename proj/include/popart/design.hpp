#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "popart/core.hpp"
#include "popart/rng.hpp"

namespace popart {

/// Finite arm (measurement) set: K rows of dimension d.
class ActionSet {
 public:
  explicit ActionSet(Matrix arms) : arms_(std::move(arms)) {
    detail::require(arms_.rows() >= 1 && arms_.cols() >= 1, Errc::invalid_argument,
                    "ActionSet: need at least one arm and one dimension");
    detail::require(arms_.allFinite(), Errc::invalid_argument, "ActionSet: non-finite entry");
  }

  const Matrix& arms() const noexcept { return arms_; }
  Index dim() const noexcept { return arms_.cols(); }
  Index size() const noexcept { return arms_.rows(); }
  auto arm(Index k) const { return arms_.row(k); }

  Index rank() const {
    Eigen::FullPivLU<Matrix> lu(arms_);
    lu.setThreshold(1e-10);
    return lu.rank();
  }
  bool spans() const { return rank() == dim(); }
  bool within_unit_box() const { return arms_.cwiseAbs().maxCoeff() <= 1.0 + 1e-12; }

  /// Keeps only the listed coordinates of every arm (arm order unchanged).
  ActionSet restricted(std::span<const Index> coords) const {
    detail::require(!coords.empty(), Errc::invalid_argument, "ActionSet::restricted: empty coordinate set");
    Matrix out(size(), static_cast<Index>(coords.size()));
    for (Index j = 0; j < out.cols(); ++j) {
      detail::require(coords[j] >= 0 && coords[j] < dim(), Errc::invalid_argument,
                      "ActionSet::restricted: coordinate out of range");
      out.col(j) = arms_.col(coords[j]);
    }
    return ActionSet(std::move(out));
  }

 private:
  Matrix arms_;
};

/// Probability weights over the arms of an ActionSet.
class Design {
 public:
  explicit Design(Vector weights) : weights_(std::move(weights)) {
    detail::require(weights_.size() >= 1, Errc::invalid_argument, "Design: empty weight vector");
    detail::require(weights_.allFinite() && weights_.minCoeff() >= 0.0, Errc::invalid_argument,
                    "Design: weights must be finite and nonnegative");
    detail::require(std::abs(weights_.sum() - 1.0) <= 1e-9, Errc::invalid_argument,
                    "Design: weights must sum to 1");
  }

  static Design uniform(Index k) { return Design(Vector::Constant(k, 1.0 / static_cast<double>(k))); }

  const Vector& weights() const noexcept { return weights_; }
  Index size() const noexcept { return weights_.size(); }

 private:
  Vector weights_;
};

/// Symmetric positive definite covariance with its cached inverse.
class CovMatrix {
 public:
  explicit CovMatrix(Matrix q) : q_(std::move(q)) {
    detail::require(q_.rows() == q_.cols() && q_.rows() >= 1, Errc::dimension_mismatch,
                    "CovMatrix: matrix must be square");
    const double scale = std::max(1.0, q_.cwiseAbs().maxCoeff());
    detail::require((q_ - q_.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, Errc::invalid_argument,
                    "CovMatrix: matrix is not symmetric");
    q_ = 0.5 * (q_ + q_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(q_, Eigen::EigenvaluesOnly);
    detail::require(eig.eigenvalues()(0) > 0.0, Errc::not_invertible, "covariance not invertible");
    Eigen::LLT<Matrix> llt(q_);
    detail::require(llt.info() == Eigen::Success, Errc::not_invertible, "covariance not invertible");
    q_inv_ = llt.solve(Matrix::Identity(q_.rows(), q_.cols()));
    q_inv_ = 0.5 * (q_inv_ + q_inv_.transpose());
  }

  const Matrix& q() const noexcept { return q_; }
  const Matrix& q_inv() const noexcept { return q_inv_; }
  Index dim() const noexcept { return q_.rows(); }

 private:
  Matrix q_;
  Matrix q_inv_;
};

namespace detail {

inline Matrix weighted_gram(const Matrix& arms, const Vector& w) {
  return arms.transpose() * w.asDiagonal() * arms;
}

}  // namespace detail

/// Q(mu) = sum_k mu_k a_k a_k^T.
inline CovMatrix population_covariance(const ActionSet& actions, const Design& design) {
  detail::require(design.size() == actions.size(), Errc::dimension_mismatch,
                  "population_covariance: design size differs from arm count");
  Matrix q = detail::weighted_gram(actions.arms(), design.weights());
  const double trace = q.trace();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q, Eigen::EigenvaluesOnly);
  detail::require(trace > 0.0 && eig.eigenvalues()(0) > 1e-12 * trace, Errc::rank_deficient,
                  "design does not span the space");
  return CovMatrix(std::move(q));
}

/// H^2(Q) = max_i (Q^{-1})_ii.
inline double h_squared(const CovMatrix& cov) { return cov.q_inv().diagonal().maxCoeff(); }

inline double lambda_min(const CovMatrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.q(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

struct DesignSolution {
  Design design;
  CovMatrix cov;
  double objective;  // H^2(Q) for solve_h_star, lambda_min(Q) for solve_c_min
  std::size_t iterations;
  double certified_gap;
};

struct DesignSolverOptions {
  double tol = 1e-6;
  std::size_t max_iter = 100000;
  std::uint64_t seed = 0;
  int dirichlet_restarts = 5;
  double eta0 = 1.0;
  std::size_t window = 1000;
};

namespace detail {

enum class DesignCriterion { h_squared, lambda_min };

struct MirrorDescentRun {
  Vector weights;
  double objective;
  std::size_t iterations;
  double gap;
};

// Entropic mirror descent (exponentiated subgradient) over the simplex.
// Steps are normalized by the subgradient's sup-norm so the multiplicative
// update stays bounded whatever the scale of the arms.
inline MirrorDescentRun mirror_descent(const Matrix& arms, Vector start, DesignCriterion crit,
                                       const DesignSolverOptions& opt) {
  const Index d = arms.cols();
  const bool minimize = crit == DesignCriterion::h_squared;
  Vector logw = start.array().max(1e-300).log().matrix();
  Vector w = start;
  Vector best_w = start;
  double best = minimize ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  std::vector<double> best_trace;
  best_trace.reserve(std::min<std::size_t>(opt.max_iter, 1 << 16));
  double gap = std::numeric_limits<double>::infinity();
  std::size_t it = 0;

  for (it = 1; it <= opt.max_iter; ++it) {
    w = (logw.array() - logw.maxCoeff()).exp().matrix();
    w /= w.sum();
    Matrix q = weighted_gram(arms, w);
    q.diagonal().array() += 1e-12 * q.trace() / static_cast<double>(d);

    double value = 0.0;
    Vector grad;
    if (minimize) {
      Eigen::LLT<Matrix> llt(q);
      Matrix q_inv = llt.solve(Matrix::Identity(d, d));
      Index i_star = 0;
      value = q_inv.diagonal().maxCoeff(&i_star);  // first maximal index on ties
      grad = -(arms * q_inv.col(i_star)).array().square().matrix();
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(q);
      value = eig.eigenvalues()(0);
      grad = (arms * eig.eigenvectors().col(0)).array().square().matrix();
    }
    if (!std::isfinite(value)) break;

    const bool improved = minimize ? value < best : value > best;
    if (improved) {
      best = value;
      best_w = w;
    }
    best_trace.push_back(best);
    if (best_trace.size() > opt.window) {
      const double past = best_trace[best_trace.size() - 1 - opt.window];
      gap = std::abs(past - best) / std::max(std::abs(best), 1e-300);
      if (gap < opt.tol) break;
    }

    const double gmax = grad.cwiseAbs().maxCoeff();
    if (!(gmax > 0.0)) break;
    const double eta = opt.eta0 / (std::sqrt(static_cast<double>(it)) * gmax);
    if (minimize) {
      logw -= eta * grad;
    } else {
      logw += eta * grad;
    }
  }
  return {best_w, best, std::min(it, opt.max_iter), std::isfinite(gap) ? gap : 0.0};
}

inline Vector dirichlet_start(Index k, std::uint64_t seed, int restart) {
  CounterRng gen(seed, rng::kDesignRestart * 1000 + static_cast<std::uint64_t>(restart));
  Vector w(k);
  for (Index i = 0; i < k; ++i) w(i) = gen.exponential();
  return w / w.sum();
}

inline Vector prune_weights(const Vector& w) {
  Vector out = (w.array() < 1e-10).select(0.0, w);
  return out / out.sum();
}

inline DesignSolution solve_design(const ActionSet& actions, DesignCriterion crit, const DesignSolverOptions& opt) {
  if (!actions.within_unit_box()) warn("action set has entries outside [-1, 1]");
  const Index k = actions.size();
  const bool minimize = crit == DesignCriterion::h_squared;

  MirrorDescentRun best{};
  bool have = false;
  std::size_t total_iters = 0;
  for (int r = 0; r <= opt.dirichlet_restarts; ++r) {
    Vector start = r == 0 ? Vector(Vector::Constant(k, 1.0 / static_cast<double>(k)))
                          : dirichlet_start(k, opt.seed, r);
    MirrorDescentRun run = mirror_descent(actions.arms(), std::move(start), crit, opt);
    total_iters += run.iterations;
    const bool better = !have || (minimize ? run.objective < best.objective : run.objective > best.objective);
    if (better) {
      best = std::move(run);
      have = true;
    }
  }

  auto evaluate = [&](const Vector& w) {
    Design design(w / w.sum());
    CovMatrix cov = population_covariance(actions, design);
    const double obj = minimize ? h_squared(cov) : lambda_min(cov);
    return DesignSolution{std::move(design), std::move(cov), obj, total_iters, best.gap};
  };
  try {
    return evaluate(prune_weights(best.weights));
  } catch (const Error&) {
    return evaluate(best.weights);
  }
}

}  // namespace detail

/// Approximately minimizes H^2(Q(mu)) over designs on `actions`.
inline DesignSolution solve_h_star(const ActionSet& actions, const DesignSolverOptions& opt = {}) {
  detail::require(actions.spans(), Errc::rank_deficient, "cannot attain finite H^2: arm set does not span");
  return detail::solve_design(actions, detail::DesignCriterion::h_squared, opt);
}

/// Approximately maximizes lambda_min(Q(mu)) over designs on `actions`.
inline DesignSolution solve_c_min(const ActionSet& actions, const DesignSolverOptions& opt = {}) {
  detail::require(actions.spans(), Errc::rank_deficient, "C_min = 0; set does not span");
  return detail::solve_design(actions, detail::DesignCriterion::lambda_min, opt);
}

}  // namespace popart
