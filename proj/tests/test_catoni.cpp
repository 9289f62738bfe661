#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "popart/catoni.hpp"
#include "popart/rng.hpp"

using namespace popart;

namespace {

std::vector<double> normals(std::uint64_t seed, std::size_t n, double scale = 1.0, double shift = 0.0) {
  CounterRng g(seed, rng::kTest);
  std::vector<double> z(n);
  for (auto& v : z) v = shift + scale * g.normal();
  return z;
}

}  // namespace

TEST(Psi, Values) {
  EXPECT_EQ(psi(0.0), 0.0);
  EXPECT_NEAR(psi(1.0), std::log(2.5), 1e-15);
  EXPECT_NEAR(psi(1.0), 0.916291, 1e-6);
  EXPECT_NEAR(psi(-1.0), -0.916291, 1e-6);
}

TEST(Psi, OddAndIncreasing) {
  double prev = -INFINITY;
  for (double x = -50; x <= 50; x += 0.01) {
    EXPECT_DOUBLE_EQ(psi(-x), -psi(x));
    EXPECT_GT(psi(x), prev);
    prev = psi(x);
  }
}

TEST(Psi, SeriesMatchesClosedForm) {
  for (double u = 0; u < detail::kSeriesCutoff; u += 1e-4) {
    const double exact = static_cast<double>(oracle::psi(u));
    EXPECT_NEAR(detail::psi_series(u), exact, 4e-16 * std::max(exact, 1e-300)) << u;
  }
}

TEST(CatoniAlpha, Formula) {
  EXPECT_NEAR(catoni_alpha(10000, 1.0, 0.05), oracle::catoni_alpha(10000, 1.0, 0.05), 1e-15);
  // the published rounded value 0.024466 agrees to about 2e-4 relative
  EXPECT_NEAR(catoni_alpha(10000, 1.0, 0.05), 0.024466, 5e-4 * 0.024466);
}

TEST(CatoniAlpha, InverseSqrtVariance) {
  EXPECT_NEAR(catoni_alpha(100, 4.0, 0.05), 0.5 * catoni_alpha(100, 1.0, 0.05), 1e-15);
}

TEST(CatoniAlpha, Boundary) {
  // 2 log(1/delta) = 4 exactly
  const double delta = 1.0 / std::exp(2.0);
  ASSERT_LE(2.0 * std::log(1.0 / delta), 4.0);
  if (2.0 * std::log(1.0 / delta) == 4.0) {
    EXPECT_THROW(catoni_alpha(4, 1.0, delta), Error);
  }
  try {
    catoni_alpha(3, 1.0, delta);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_samples);
    EXPECT_NE(std::string(e.what()).find("insufficient samples for Catoni"), std::string::npos);
  }
  EXPECT_THROW(catoni_alpha(100, 0.0, 0.05), Error);
  EXPECT_THROW(catoni_alpha(100, 1.0, 1.0), Error);
}

TEST(CatoniEstimate, Trivial) {
  std::vector<double> same(17, 3.7);
  EXPECT_EQ(catoni_estimate(same, {0.3, 0.05}), 3.7);
  std::vector<double> sym{-2.0, 2.0};
  for (double a : {1e-3, 0.5, 10.0}) EXPECT_NEAR(catoni_estimate(sym, {a, 0.05}), 0.0, 1e-12);
  EXPECT_THROW(catoni_estimate(std::vector<double>{}, {1.0, 0.05}), Error);
  EXPECT_THROW(catoni_estimate(same, {0.0, 0.05}), Error);
  std::vector<double> bad{1.0, NAN};
  EXPECT_THROW(catoni_estimate(bad, {1.0, 0.05}), Error);
}

TEST(CatoniEstimate, MatchesBisectionOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CounterRng g(seed, rng::kTest);
    const std::size_t n = 50 + 37 * seed;
    std::vector<double> z(n);
    // heavy tails: ratio of normals, shifted
    for (auto& v : z) v = 3.0 + g.normal() / (0.05 + std::abs(g.normal()));
    for (double alpha : {1e-3, 0.05, 0.7, 5.0}) {
      const double got = catoni_estimate(z, {alpha, 0.05});
      const double want = oracle::catoni_bisect(z, alpha);
      const double scale = std::max({1.0, std::abs(*std::min_element(z.begin(), z.end())),
                                     std::abs(*std::max_element(z.begin(), z.end()))});
      EXPECT_NEAR(got, want, 5e-12 * scale) << "seed " << seed << " alpha " << alpha;
    }
  }
}

TEST(CatoniEstimate, RootBracketedAndEquivariant) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto z = normals(seed, 300, 2.0, 1.0);
    const double alpha = 0.3;
    const double y = catoni_estimate(z, {alpha, 0.05});
    EXPECT_GE(y, *std::min_element(z.begin(), z.end()));
    EXPECT_LE(y, *std::max_element(z.begin(), z.end()));

    const double c = 7.25;
    auto shifted = z;
    for (auto& v : shifted) v += c;
    EXPECT_NEAR(catoni_estimate(shifted, {alpha, 0.05}), y + c, 1e-10);

    const double k = 3.5;
    auto scaled = z;
    for (auto& v : scaled) v *= k;
    EXPECT_NEAR(catoni_estimate(scaled, {alpha / k, 0.05}), k * y, 1e-10);
  }
}

TEST(CatoniEstimate, LargeArgumentsUseExactPsi) {
  auto z = normals(5, 2000, 50.0);
  z[0] = 1e6;  // forces the fix-up pass
  EXPECT_NEAR(catoni_estimate(z, {0.5, 0.05}), oracle::catoni_bisect(z, 0.5), 5e-12 * 1e6);
}

TEST(CatoniEstimate, DeviationBoundMonteCarlo) {
  const std::size_t n = 10000;
  const double delta = 0.05;
  const double alpha = catoni_alpha(n, 1.0, delta);
  const double bound = catoni_deviation_bound(n, 1.0, delta);
  EXPECT_NEAR(bound, std::sqrt(2.0 * std::log(20.0) / (10000.0 - std::log(20.0))), 1e-15);
  EXPECT_NEAR(bound, 0.02448, 1e-5);
  int inside = 0;
  for (std::uint64_t trial = 0; trial < 500; ++trial) {
    const auto z = normals(1000 + trial, n);
    if (std::abs(catoni_estimate(z, {alpha, delta})) <= bound) ++inside;
  }
  EXPECT_GE(inside, 485);  // 97%
}
