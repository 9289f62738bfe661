#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "oracles.hpp"
#include "popart/design.hpp"
#include "popart/instances.hpp"
#include "popart/rng.hpp"

using namespace popart;

namespace {

Vector random_simplex(Index k, std::uint64_t seed) {
  CounterRng g(seed, rng::kTest);
  Vector w(k);
  for (Index i = 0; i < k; ++i) w(i) = g.exponential();
  return w / w.sum();
}

// Closed-form H^2-optimal weights on the hard-set set.
Vector hard_set_weights(Index d) {
  const double dd = static_cast<double>(d);
  Vector w(d);
  w(0) = dd - std::sqrt(dd * (dd - 1));
  w.tail(d - 1).setConstant(1.0 / (std::sqrt(dd - 1) * (std::sqrt(dd) + std::sqrt(dd - 1))));
  return w;
}

}  // namespace

TEST(PopulationCovariance, OrthonormalArms) {
  const auto q = population_covariance(canonical_basis_actions(3), Design::uniform(3));
  EXPECT_TRUE(q.q().isApprox(Matrix::Identity(3, 3) / 3.0, 1e-15));
  EXPECT_TRUE(q.q_inv().isApprox(3.0 * Matrix::Identity(3, 3), 1e-14));
}

TEST(PopulationCovariance, HardSetDeterminant) {
  const Index d = 6;
  const ActionSet a = hard_set_actions(d);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Vector w = random_simplex(d, seed);
    const auto q = population_covariance(a, Design(w));
    const double want = w(0) * w.tail(d - 1).prod() / std::pow(static_cast<double>(d), static_cast<double>(d));
    EXPECT_NEAR(q.q().determinant(), want, 1e-10 * want);
    EXPECT_NEAR(q.q_inv()(0, 0), d / w(0), 1e-8 * d / w(0));
  }
}

TEST(PopulationCovariance, RankDeficientDesign) {
  Vector w = Vector::Zero(3);
  w(1) = 1;
  try {
    population_covariance(canonical_basis_actions(3), Design(w));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::rank_deficient);
    EXPECT_STREQ(e.what(), "design does not span the space");
  }
  EXPECT_THROW(population_covariance(canonical_basis_actions(3), Design::uniform(4)), Error);
}

TEST(HSquared, Examples) {
  EXPECT_DOUBLE_EQ(h_squared(CovMatrix(Matrix::Identity(4, 4))), 1.0);
  Matrix q = Matrix::Zero(2, 2);
  q.diagonal() << 0.5, 0.25;
  EXPECT_DOUBLE_EQ(h_squared(CovMatrix(q)), 4.0);
  const auto cov = population_covariance(hard_set_actions(10), Design(hard_set_weights(10)));
  EXPECT_NEAR(h_squared(cov), hard_set_h_star_sq(10), 1e-9 * hard_set_h_star_sq(10));
  EXPECT_NEAR(hard_set_h_star_sq(10), 379.73666, 1e-4);
}

TEST(SolveHStar, BasisExact) {
  for (Index d : {3, 5, 10}) {
    const ActionSet a = canonical_basis_actions(d);
    EXPECT_NEAR(solve_h_star(a).objective, d, 1e-6 * d);
    EXPECT_NEAR(solve_c_min(a).objective, 1.0 / d, 1e-6 / d);
  }
}

TEST(SolveHStar, HardSetClosedForm) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = solve_h_star(hard_set_actions(10));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_NEAR(sol.objective, 379.74, 0.02 * 379.74);
  EXPECT_LT(secs, 10.0);
  EXPECT_GE(sol.objective, hard_set_h_star_sq(10) * (1 - 1e-9));  // cannot beat the optimum
}

TEST(SolveCMin, HardSetBracket) {
  const auto sol = solve_c_min(hard_set_actions(10));
  const auto bracket = hard_set_cmin_bracket(10);
  // independent 1-D scan of f
  const auto [b, fb] = oracle::scan_minimum([](double x) { return hard_set_f(10, x); }, 0.0, 1.0 / 9.0);
  EXPECT_NEAR(bracket.b_star, b, 1e-6);
  EXPECT_NEAR(bracket.lower, fb, 1e-9 * fb);
  const double inv = 1.0 / sol.objective;
  EXPECT_GE(inv, bracket.lower);
  EXPECT_LE(inv, bracket.upper);
}

TEST(SolveCMin, BracketHoldsAlongTheWeightFamily) {
  const Index d = 10;
  const ActionSet a = hard_set_actions(d);
  for (double b : {0.01, 0.03, 0.05, 0.08, 0.1}) {
    Vector w = Vector::Constant(d, b);
    w(0) = 1.0 - (d - 1) * b;
    const double inv = 1.0 / lambda_min(population_covariance(a, Design(w)));
    EXPECT_GE(inv, hard_set_f(d, b) * (1 - 1e-12)) << b;
    EXPECT_LE(inv, 2 * hard_set_f(d, b) * (1 + 1e-12)) << b;
  }
}

TEST(Solvers, DuplicatePermutationAndScaling) {
  const ActionSet a = unit_sphere_actions(4, 12, 3);
  const double h = solve_h_star(a).objective;
  const double c = solve_c_min(a).objective;

  Matrix dup(24, 4);
  dup << a.arms(), a.arms();
  EXPECT_NEAR(solve_h_star(ActionSet(dup)).objective, h, 1e-4 * h);

  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const ActionSet permuted(a.arms() * perm);
  EXPECT_NEAR(solve_c_min(permuted).objective, c, 1e-4 * c);
  EXPECT_NEAR(solve_h_star(permuted).objective, h, 1e-4 * h);

  const double k = 0.5;
  const ActionSet scaled(k * a.arms());
  EXPECT_NEAR(solve_h_star(scaled).objective, h / (k * k), 1e-4 * h / (k * k));
  EXPECT_NEAR(solve_c_min(scaled).objective, c * k * k, 1e-4 * c * k * k);
}

TEST(Solvers, SandwichAndOptimality) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Index d = 3 + 2 * static_cast<Index>(seed);
    const ActionSet a = unit_sphere_actions(d, 3 * d, 40 + seed);
    const auto hs = solve_h_star(a);
    const auto cm = solve_c_min(a);
    EXPECT_LE(hs.objective, (1 + 1e-3) / cm.objective);
    EXPECT_LE(1 / cm.objective, (1 + 1e-3) * d * hs.objective);
    for (std::uint64_t r = 0; r < 20; ++r) {
      const auto cov = population_covariance(a, Design(random_simplex(3 * d, 1000 * seed + r)));
      EXPECT_GE(h_squared(cov), hs.objective * (1 - 1e-6));
      EXPECT_LE(lambda_min(cov), cm.objective * (1 + 1e-6));
    }
  }
}

TEST(Objectives, ConvexityAndConcavity) {
  const ActionSet a = unit_sphere_actions(5, 15, 8);
  CounterRng g(17, rng::kTest);
  for (std::uint64_t r = 0; r < 50; ++r) {
    const Vector w1 = random_simplex(15, 2 * r), w2 = random_simplex(15, 2 * r + 1);
    const double t = g.uniform();
    const auto q1 = population_covariance(a, Design(w1));
    const auto q2 = population_covariance(a, Design(w2));
    const auto qt = population_covariance(a, Design(t * w1 + (1 - t) * w2));
    EXPECT_LE(h_squared(qt), t * h_squared(q1) + (1 - t) * h_squared(q2) + 1e-9);
    EXPECT_GE(lambda_min(qt), t * lambda_min(q1) + (1 - t) * lambda_min(q2) - 1e-9);
  }
}

TEST(Solvers, RankDeficientArmSet) {
  Matrix arms = Matrix::Zero(3, 3);
  arms.col(0).setOnes();
  arms(1, 1) = 1;
  try {
    solve_h_star(ActionSet(arms));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("cannot attain finite H"), std::string::npos);
  }
  try {
    solve_c_min(ActionSet(arms));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "C_min = 0; set does not span");
  }
}

TEST(Solvers, WarnsOutsideUnitBox) {
  std::vector<std::string> seen;
  set_warning_handler([&](const std::string& m) { seen.emplace_back(m); });
  solve_h_star(ActionSet(2.0 * Matrix::Identity(2, 2)));
  set_warning_handler(nullptr);
  ASSERT_FALSE(seen.empty());
  EXPECT_NE(seen.front().find("outside [-1, 1]"), std::string::npos);
}

TEST(Solvers, DeterministicForSeed) {
  const ActionSet a = unit_sphere_actions(6, 18, 1);
  DesignSolverOptions opt;
  opt.seed = 42;
  EXPECT_EQ(solve_h_star(a, opt).design.weights(), solve_h_star(a, opt).design.weights());
}
