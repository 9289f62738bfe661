#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <boost/math/tools/minima.hpp>

#include "popart/core.hpp"
#include "popart/design.hpp"
#include "popart/rng.hpp"

namespace popart {

/// A named problem instance: arms, hidden parameter, noise level, sparsity.
struct InstanceSpec {
  std::string name;
  ActionSet actions;
  Vector theta_star;
  double sigma;
  int sparsity;
};

/// Hard instance where H*^2 and 1/C_min differ by a factor of order d:
/// a_1 = e_1 / sqrt(d), a_i = e_1 + e_i / sqrt(d) for i = 2..d.
inline ActionSet hard_set_actions(Index d) {
  detail::require(d >= 2, Errc::invalid_argument, "hard_set_actions: need d >= 2");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix arms = Matrix::Zero(d, d);
  arms(0, 0) = inv_sqrt_d;
  for (Index i = 1; i < d; ++i) {
    arms(i, 0) = 1.0;
    arms(i, i) = inv_sqrt_d;
  }
  return ActionSet(std::move(arms));
}

/// Closed-form optimum of H^2 on hard_set_actions(d): d (sqrt(d) + sqrt(d - 1))^2.
inline double hard_set_h_star_sq(Index d) {
  const double dd = static_cast<double>(d);
  const double r = std::sqrt(dd) + std::sqrt(dd - 1.0);
  return dd * r * r;
}

/// For weights a = 1 - (d - 1) b on a_1 and b on the rest, f(b) <= 1 / lambda_min <= 2 f(b) with
/// f(b) = d (1 + (d^2 - 2d + 2) b) / (2 b (1 - (d - 1) b)), 0 < b < 1 / (d - 1).
inline double hard_set_f(Index d, double b) {
  const double dd = static_cast<double>(d);
  return dd * (1.0 + (dd * dd - 2.0 * dd + 2.0) * b) / (2.0 * b * (1.0 - (dd - 1.0) * b));
}

struct CminBracket {
  double b_star;
  double lower;  // min_b f(b)
  double upper;  // 2 min_b f(b)
};

/// Brackets 1/C_min on hard_set_actions(d) by minimizing f numerically.
inline CminBracket hard_set_cmin_bracket(Index d) {
  detail::require(d >= 2, Errc::invalid_argument, "hard_set_cmin_bracket: need d >= 2");
  const double hi = 1.0 / static_cast<double>(d - 1);
  auto [b, fb] = boost::math::tools::brent_find_minima([d](double x) { return hard_set_f(d, x); }, 1e-12 * hi,
                                                       hi * (1.0 - 1e-12), 52);
  return {b, fb, 2.0 * fb};
}

inline ActionSet canonical_basis_actions(Index d) {
  detail::require(d >= 1, Errc::invalid_argument, "canonical_basis_actions: need d >= 1");
  return ActionSet(Matrix::Identity(d, d));
}

/// K arms drawn uniformly on the unit sphere (normalized Gaussians). If the
/// draw fails to span R^d the generator retries with seed + 1.
inline ActionSet unit_sphere_actions(Index d, Index k, std::uint64_t seed) {
  detail::require(d >= 1 && k >= 1, Errc::invalid_argument, "unit_sphere_actions: need d >= 1 and K >= 1");
  for (std::uint64_t attempt = 0;; ++attempt) {
    CounterRng gen(seed + attempt, rng::kInstance);
    Matrix arms(k, d);
    for (Index r = 0; r < k; ++r) {
      for (Index c = 0; c < d; ++c) arms(r, c) = gen.normal();
      arms.row(r).normalize();
    }
    ActionSet set(std::move(arms));
    if (k < d || set.spans() || attempt >= 16) return set;
  }
}

enum class ThetaCase {
  case1_l1,      // -e_1 + e_i, i uniform in {2..d}
  case1_bandit,  // e_1 + e_i, i uniform in {2..d}
  case2,         // e_i + e_j, i != j uniform in [d]
};

inline ThetaCase parse_theta_case(std::string_view label) {
  if (label == "case1-l1") return ThetaCase::case1_l1;
  if (label == "case1-bandit") return ThetaCase::case1_bandit;
  if (label == "case2" || label == "case2-l1" || label == "case2-bandit") return ThetaCase::case2;
  throw Error(Errc::invalid_argument, "theta_generator: unknown case label '" + std::string(label) + "'");
}

inline Vector theta_generator(ThetaCase which, Index d, std::uint64_t seed) {
  detail::require(d >= 2, Errc::invalid_argument, "theta_generator: need d >= 2");
  CounterRng gen(seed, rng::kInstance + 100);
  Vector theta = Vector::Zero(d);
  switch (which) {
    case ThetaCase::case1_l1:
      theta(0) = -1.0;
      theta(gen.integer(1, d - 1)) = 1.0;
      break;
    case ThetaCase::case1_bandit:
      theta(0) = 1.0;
      theta(gen.integer(1, d - 1)) = 1.0;
      break;
    case ThetaCase::case2: {
      const auto i = gen.integer(0, d - 1);
      auto j = gen.integer(0, d - 1);
      while (j == i) j = gen.integer(0, d - 1);
      theta(i) = 1.0;
      theta(j) = 1.0;
      break;
    }
  }
  return theta;
}

inline Vector theta_generator(std::string_view label, Index d, std::uint64_t seed) {
  return theta_generator(parse_theta_case(label), d, seed);
}

}  // namespace popart
