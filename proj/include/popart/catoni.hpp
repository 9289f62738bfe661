#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "popart/core.hpp"

namespace popart {

/// Catoni influence function sign(x) * log(1 + |x| + x^2/2).
inline double psi(double x) noexcept {
  const double u = std::abs(x);
  return std::copysign(std::log1p(u + 0.5 * u * u), x);
}

struct CatoniParams {
  double alpha;
  double delta;
};

/// Weight parameter that makes the Catoni estimate deviate from the mean by
/// less than sqrt(2 V log(1/delta) / (n - log(1/delta))) with probability
/// at least 1 - 2 delta, for samples with variance at most `var_bound`.
inline double catoni_alpha(std::size_t n, double var_bound, double delta) {
  detail::require(var_bound > 0.0 && std::isfinite(var_bound), Errc::invalid_argument,
                  "catoni_alpha: variance bound must be positive and finite");
  detail::require(delta > 0.0 && delta < 1.0, Errc::invalid_argument,
                  "catoni_alpha: delta must lie in (0, 1)");
  const double log_term = 2.0 * std::log(1.0 / delta);
  const auto nn = static_cast<double>(n);
  detail::require(nn > log_term, Errc::insufficient_samples,
                  "insufficient samples for Catoni: need n > 2 log(1/delta)");
  return std::sqrt(log_term / (nn * var_bound * (1.0 + log_term / (nn - log_term))));
}

/// Deviation bound guaranteed by catoni_alpha with probability 1 - 2 delta.
inline double catoni_deviation_bound(std::size_t n, double var_bound, double delta) {
  const double l = std::log(1.0 / delta);
  return std::sqrt(2.0 * var_bound * l / (static_cast<double>(n) - l));
}

namespace detail {

// log(1 + u + u^2/2) for 0 <= u < 0.05; truncation error is below one ulp.
inline double psi_series(double u) noexcept {
  const double u3 = u * u * u;
  return u + u3 * (-1.0 / 6 +
                   u * (1.0 / 8 +
                        u * (-1.0 / 20 +
                             u * (0.0 + u * (1.0 / 56 +
                                             u * (-1.0 / 64 +
                                                  u * (1.0 / 144 +
                                                       u * (0.0 + u * (-1.0 / 352 +
                                                                       u * (1.0 / 384))))))))));
}

inline constexpr double kSeriesCutoff = 0.05;

// psi'(u) = (1 + u) / (1 + u + u^2/2) to O(u^4); only steers Newton steps.
inline double psi_prime_series(double u) noexcept { return 1.0 - 0.5 * u * u * (1.0 - u); }

struct CatoniSums {
  double value;       // sum psi(alpha (z - y))
  double derivative;  // sum psi'(alpha (z - y))
};

// Hot loop of the root finder. The common small-argument branch is a
// polynomial that vectorizes; rare large arguments are patched in a second pass.
inline CatoniSums catoni_sums(std::span<const double> z, double alpha, double y) noexcept {
  double s = 0, d = 0;
  std::size_t large = 0;
  const std::size_t n = z.size();
  const double* p = z.data();
#pragma omp simd reduction(+ : s, d, large)
  for (std::size_t t = 0; t < n; ++t) {
    const double x = alpha * (p[t] - y);
    const double u = std::abs(x);
    const bool small = u < kSeriesCutoff;
    const double v = small ? psi_series(u) : 0.0;
    s += std::copysign(v, x);
    d += small ? psi_prime_series(u) : 0.0;
    large += small ? 0 : 1;
  }
  if (large > 0) {
    for (std::size_t k = 0; k < n; ++k) {
      const double x = alpha * (p[k] - y);
      const double u = std::abs(x);
      if (u >= kSeriesCutoff) {
        s += psi(x);
        d += (1.0 + u) / (1.0 + u + 0.5 * u * u);
      }
    }
  }
  return {s, d};
}

}  // namespace detail

/**
 * Catoni's robust mean: the unique root y of sum_t psi(alpha (z_t - y)) = 0.
 *
 * The sum is continuous and strictly decreasing in y and changes sign on
 * [min z, max z]. The root is located by Newton steps safeguarded by that
 * bracket; any step leaving the bracket falls back to bisection. The result
 * is certified to lie within 1e-12 * max(1, |min z|, |max z|) of the root.
 */
inline double catoni_estimate(std::span<const double> samples, const CatoniParams& params) {
  detail::require(!samples.empty(), Errc::invalid_argument, "catoni_estimate: empty sample vector");
  detail::require(params.alpha > 0.0 && std::isfinite(params.alpha), Errc::invalid_argument,
                  "catoni_estimate: alpha must be positive and finite");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  for (double z : samples) {
    lo = std::min(lo, z);
    hi = std::max(hi, z);
    sum += z;
  }
  detail::require(std::isfinite(sum) && std::isfinite(lo) && std::isfinite(hi), Errc::invalid_argument,
                  "catoni_estimate: non-finite sample");
  if (lo == hi) return lo;

  const double alpha = params.alpha;
  const double tol = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
  double y = std::clamp(sum / static_cast<double>(samples.size()), lo, hi);

  for (int iter = 0; iter < 200; ++iter) {
    const auto [s, d] = detail::catoni_sums(samples, alpha, y);
    if (s == 0.0) return y;
    if (s > 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    if (hi - lo <= tol) return 0.5 * (lo + hi);

    const double step = (d > 0.0) ? s / (alpha * d) : std::numeric_limits<double>::infinity();
    double next = y + step;
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    } else if (std::abs(step) < 0.5 * tol) {
      // Converged; certify by bracketing the candidate within tol.
      const double a = std::max(lo, next - 0.5 * tol);
      const double b = std::min(hi, next + 0.5 * tol);
      const double sa = detail::catoni_sums(samples, alpha, a).value;
      const double sb = detail::catoni_sums(samples, alpha, b).value;
      if (sa >= 0.0 && sb <= 0.0) return next;
      if (sa < 0.0) hi = a;
      if (sb > 0.0) lo = b;
      next = 0.5 * (lo + hi);
    }
    y = next;
  }
  return 0.5 * (lo + hi);
}

}  // namespace popart
