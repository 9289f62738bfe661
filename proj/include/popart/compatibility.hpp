#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "popart/core.hpp"
#include "popart/rng.hpp"

namespace popart {

/// Which cone the compatibility constant minimizes over.
enum class ConeConvention {
  standard,       // ||v_{-S}||_1 <= 3 ||v_S||_1
  reversed,  // ||v_S||_1 <= 3 ||v_{-S}||_1
};

struct CompatibilityOptions {
  int restarts = 2000;
  int iterations = 300;
  std::uint64_t seed = 0;
};

namespace detail {

// Euclidean projection onto {u >= 0, sum u = radius}.
inline void project_simplex(Eigen::Ref<Vector> u, double radius) {
  Vector sorted = u;
  std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
  double cumsum = 0.0, tau = 0.0;
  for (Index k = 0; k < sorted.size(); ++k) {
    cumsum += sorted(k);
    const double t = (cumsum - radius) / static_cast<double>(k + 1);
    if (sorted(k) - t > 0.0) tau = t;
  }
  u = (u.array() - tau).max(0.0).matrix();
}

// Projection onto the l1 ball of the given radius.
inline void project_l1_ball(Eigen::Ref<Vector> w, double radius) {
  if (w.lpNorm<1>() <= radius) return;
  Vector signs = w.array().sign().matrix();
  Vector mag = w.cwiseAbs();
  project_simplex(mag, radius);
  w = signs.cwiseProduct(mag);
}

// Projection onto {signs .* w >= 0, ||w||_1 >= radius}.
inline void project_outside_l1(Eigen::Ref<Vector> w, const Vector& signs, double radius) {
  Vector u = signs.cwiseProduct(w).cwiseMax(0.0);
  if (u.sum() < radius) {
    u = signs.cwiseProduct(w);
    project_simplex(u, radius);
  }
  w = signs.cwiseProduct(u);
}

}  // namespace detail

/**
 * Brute-force compatibility constant
 *   min_{|S| = s} min_{v in cone(S)} s v^T Sigma v / ||v_S||_1^2
 * for small problems (d <= 8, s <= 3). The inner problem is solved by
 * projected gradient on the slice ||v_S||_1 = 1 from many random sign
 * patterns plus the basis directions, so the result is an upper bound on
 * the true constant that tightens with more restarts.
 */
inline double compatibility_constant(const Matrix& sigma_matrix, int s,
                                     ConeConvention convention = ConeConvention::standard,
                                     const CompatibilityOptions& opt = {}) {
  const Index d = sigma_matrix.rows();
  detail::require(sigma_matrix.cols() == d, Errc::dimension_mismatch, "compatibility_constant: matrix not square");
  detail::require(d <= 8 && s <= 3, Errc::oracle_scale_exceeded, "oracle scale exceeded: need d <= 8 and s <= 3");
  detail::require(s >= 1 && s <= d, Errc::invalid_argument, "compatibility_constant: need 1 <= s <= d");
  Eigen::LLT<Matrix> llt(sigma_matrix);
  detail::require(llt.info() == Eigen::Success, Errc::not_invertible, "compatibility_constant: matrix not SPD");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_matrix, Eigen::EigenvaluesOnly);
  const double step = 1.0 / (2.0 * s * eig.eigenvalues().maxCoeff());
  const bool reversed = convention == ConeConvention::reversed;
  detail::require(!reversed || s < d, Errc::invalid_argument, "compatibility_constant: reversed cone needs s < d");

  std::vector<Index> subset(static_cast<std::size_t>(s));
  for (int k = 0; k < s; ++k) subset[static_cast<std::size_t>(k)] = k;
  std::vector<Index> rest;
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t subset_id = 0;

  for (;;) {
    rest.clear();
    for (Index i = 0, k = 0; i < d; ++i) {
      if (k < s && subset[static_cast<std::size_t>(k)] == i) {
        ++k;
      } else {
        rest.push_back(i);
      }
    }
    const auto m = static_cast<Index>(rest.size());
    Matrix sub(d, d);  // Sigma permuted so that S comes first
    std::vector<Index> order(subset.begin(), subset.end());
    order.insert(order.end(), rest.begin(), rest.end());
    for (Index r = 0; r < d; ++r)
      for (Index c = 0; c < d; ++c) sub(r, c) = sigma_matrix(order[r], order[c]);

    CounterRng gen(opt.seed + subset_id, rng::kOracle);
    for (int restart = 0; restart < opt.restarts; ++restart) {
      Vector v = Vector::Zero(d);
      Vector sign_s(s), sign_r(m);
      if (restart < s) {
        sign_s.setOnes();
        v(restart) = 1.0;
      } else {
        for (Index k = 0; k < s; ++k) {
          sign_s(k) = gen.uniform() < 0.5 ? -1.0 : 1.0;
          v(k) = gen.exponential();
        }
        v.head(s) = sign_s.cwiseProduct(v.head(s)) / v.head(s).lpNorm<1>();
      }
      for (Index k = 0; k < m; ++k) sign_r(k) = gen.uniform() < 0.5 ? -1.0 : 1.0;
      if (m > 0 && (reversed || restart >= s)) {
        const double radius = reversed ? (1.0 / 3.0) * (1.0 + 2.0 * gen.uniform()) : 3.0 * gen.uniform();
        Vector w(m);
        for (Index k = 0; k < m; ++k) w(k) = gen.exponential();
        v.tail(m) = sign_r.cwiseProduct(w) * (radius / w.sum());
      }

      for (int it = 0; it < opt.iterations; ++it) {
        Vector next = v - step * (2.0 * s) * (sub * v);
        Vector head = sign_s.cwiseProduct(next.head(s));
        detail::project_simplex(head, 1.0);
        next.head(s) = sign_s.cwiseProduct(head);
        if (m > 0) {
          if (reversed) {
            detail::project_outside_l1(next.tail(m), sign_r, 1.0 / 3.0);
          } else {
            detail::project_l1_ball(next.tail(m), 3.0);
          }
        }
        const double moved = (next - v).squaredNorm();
        v = std::move(next);
        if (moved < 1e-24) break;
      }
      const double vs = v.head(s).lpNorm<1>();
      best = std::min(best, s * v.dot(sub * v) / (vs * vs));
    }

    // next combination in lexicographic order
    int k = s - 1;
    while (k >= 0 && subset[static_cast<std::size_t>(k)] == d - s + k) --k;
    if (k < 0) break;
    ++subset[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < s; ++j) subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
    ++subset_id;
  }
  return best;
}

}  // namespace popart
