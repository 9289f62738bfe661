#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "popart/design.hpp"
#include "popart/estimator.hpp"
#include "popart/instances.hpp"
#include "popart/rng.hpp"

using namespace popart;

namespace {

struct Draws {
  std::vector<std::uint32_t> arm;
  std::vector<double> reward;
};

// i.i.d. arms from a design and Gaussian noise; independent of the bandit code.
Draws draw(const ActionSet& a, const Design& mu, const Vector& theta, double sigma, std::size_t n,
           std::uint64_t seed) {
  CounterRng g(seed, rng::kTest);
  std::vector<double> cdf;
  double acc = 0;
  for (Index k = 0; k < mu.size(); ++k) cdf.push_back(acc += mu.weights()(k));
  Draws out;
  for (std::size_t t = 0; t < n; ++t) {
    const double u = g.uniform() * acc;
    const auto k = std::min<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), cdf.size() - 1);
    out.arm.push_back(static_cast<std::uint32_t>(k));
    out.reward.push_back(a.arm(static_cast<Index>(k)).dot(theta) + sigma * g.normal());
  }
  return out;
}

const DesignSolution& case1_design() {
  static const DesignSolution sol = solve_h_star(hard_set_actions(10), {});
  return sol;
}

}  // namespace

TEST(SampleBatch, Invariants) {
  EXPECT_THROW(SampleBatch(Matrix::Zero(3, 2), Vector::Zero(2)), Error);
  EXPECT_THROW(SampleBatch(Matrix::Zero(0, 2), Vector::Zero(0)), Error);
  SampleBatch b(Matrix::Identity(3, 3), Vector::Constant(3, 2.0));
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.dim(), 3);
  EXPECT_EQ(b.slice(1, 2).size(), 2u);
}

TEST(OneSampleEstimates, IdentityCovariance) {
  Matrix x(1, 3);
  x << 1, 0, 0;
  Vector r(1);
  r << 5;
  const Matrix rows = one_sample_estimates(SampleBatch(x, r), Matrix::Identity(3, 3), Vector::Zero(3));
  EXPECT_TRUE(rows.row(0).isApprox(Eigen::RowVector3d(5, 0, 0)));
}

TEST(OneSampleEstimates, ZeroResidualReturnsPilot) {
  CounterRng g(3, rng::kTest);
  Matrix x(20, 4);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = g.normal();
  Vector pilot(4);
  pilot << 0.5, -1, 2, 0;
  const Matrix rows = one_sample_estimates(SampleBatch(x, x * pilot), Matrix::Identity(4, 4) * 3.0, pilot);
  for (Index t = 0; t < rows.rows(); ++t) EXPECT_TRUE(rows.row(t).transpose().isApprox(pilot, 1e-12));
}

TEST(OneSampleEstimates, Errors) {
  SampleBatch b(Matrix::Identity(3, 3), Vector::Zero(3));
  EXPECT_THROW(one_sample_estimates(b, Matrix::Identity(2, 2), Vector::Zero(3)), Error);
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 1;
  EXPECT_THROW(one_sample_estimates(b, asym, Vector::Zero(3)), Error);
}

TEST(OneSampleEstimates, UnbiasedMonteCarlo) {
  const ActionSet a = unit_sphere_actions(5, 15, 11);
  const Design mu = Design::uniform(15);
  const CovMatrix q = population_covariance(a, mu);
  Vector theta(5);
  theta << 1, 0, -0.5, 0, 0.25;
  const auto d = draw(a, mu, theta, 0.3, 100000, 4);
  const SampleBatch batch = ArmSampleView(a, d.arm, d.reward).to_batch();
  const Matrix rows = one_sample_estimates(batch, q.q_inv(), Vector::Zero(5));
  const Vector mean = rows.colwise().mean();
  for (Index i = 0; i < 5; ++i) {
    const double se = std::sqrt((rows.col(i).array() - mean(i)).square().sum() / (rows.rows() - 1.0) / rows.rows());
    EXPECT_LE(std::abs(mean(i) - theta(i)), 3 * se) << i;
  }
}

TEST(HardThreshold, IdentityAndIdempotence) {
  Vector v(5), lam(5);
  v << 0.3, -0.3, 1.0, -2.0, 0.5;
  lam << 0.3, 0.2, 1.5, 0.1, 0.0;
  const Vector once = hard_threshold(v, lam);
  Vector want(5);
  want << 0, -0.3, 0, -2.0, 0.5;
  EXPECT_EQ(once, want);
  EXPECT_EQ(hard_threshold(once, lam), once);
  const auto est = make_sparse_estimate(v, lam);
  EXPECT_EQ(est.support, (std::vector<Index>{1, 3, 4}));
}

TEST(PopArt, ZeroSignalNoNoise) {
  const ActionSet a = canonical_basis_actions(4);
  const CovMatrix q = population_covariance(a, Design::uniform(4));
  Matrix x(40, 4);
  for (Index t = 0; t < 40; ++t) x.row(t) = a.arm(t % 4);
  const SampleBatch batch(x, Vector::Zero(40));
  const auto est = popart::popart(batch, q, PopArtConfig{0.1, 0.05, 1.0, Vector::Zero(4)});
  EXPECT_TRUE(est.theta_hat.isZero());
  EXPECT_TRUE(est.support.empty());
  const auto warm = warm_popart(batch, q, 1.0, 0.1, 0.05);
  EXPECT_TRUE(warm.theta_hat.isZero());
}

TEST(PopArt, ConfigAndSizeErrors) {
  const ActionSet a = canonical_basis_actions(4);
  const CovMatrix q = population_covariance(a, Design::uniform(4));
  const SampleBatch batch(Matrix::Identity(4, 4), Vector::Zero(4));
  EXPECT_THROW(popart::popart(batch, q, PopArtConfig{0.0, 0.05, 0.0, Vector::Zero(4)}), Error);
  EXPECT_THROW(popart::popart(batch, q, PopArtConfig{0.1, 1.5, 1.0, Vector::Zero(4)}), Error);
  EXPECT_THROW(popart::popart(batch, q, PopArtConfig{0.1, 0.05, 1.0, Vector::Zero(3)}), Error);
  try {
    popart::popart(batch, q, PopArtConfig{0.1, 0.05, 1.0, Vector::Zero(4)});  // n = 4 < 2 log(160)
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_samples);
  }
  try {
    warm_popart(SampleBatch(Matrix::Identity(4, 4).replicate(5, 1), Vector::Zero(20)), q, 1.0, 0.1, 0.05);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient samples for warm-up"), std::string::npos);
  }
}

TEST(PopArt, ThresholdsAndIdentity) {
  const auto& sol = case1_design();
  const ActionSet a = hard_set_actions(10);
  Vector theta = Vector::Zero(10);
  theta(0) = -1;
  theta(4) = 1;
  const auto d = draw(a, sol.design, theta, 0.1, 5000, 1);
  const auto est = popart::popart(ArmSampleView(a, d.arm, d.reward), sol.cov, {0.1, 0.05, 2.0, Vector::Zero(10)});
  for (Index i = 0; i < 10; ++i) {
    const double lam = std::sqrt(4 * (4 + 0.01) * sol.cov.q_inv()(i, i) * std::log(400.0) / 5000);
    EXPECT_NEAR(est.thresholds(i), lam, 1e-12 * lam);
    EXPECT_EQ(est.theta_hat(i), std::abs(est.theta_prime(i)) > lam ? est.theta_prime(i) : 0.0);
  }
}

TEST(PopArt, ArmViewMatchesDenseBatch) {
  const auto& sol = case1_design();
  const ActionSet a = hard_set_actions(10);
  Vector theta = Vector::Zero(10);
  theta(0) = 1;
  theta(2) = 1;
  const auto d = draw(a, sol.design, theta, 0.1, 3000, 2);
  const ArmSampleView view(a, d.arm, d.reward);
  const PopArtConfig cfg{0.1, 0.05, 0.5, Vector::Constant(10, 0.1)};
  const auto x = popart::popart(view, sol.cov, cfg);
  const auto y = popart::popart(view.to_batch(), sol.cov, cfg);
  EXPECT_TRUE(x.theta_prime.isApprox(y.theta_prime, 1e-12));
}

// Case-1 configuration: d = 10, s = 2, theta* = -e1 + e5, sigma = 0.1, R0 = 2, n = 10000.
TEST(PopArt, Case1SupportAndErrorBounds) {
  const auto& sol = case1_design();
  const ActionSet a = hard_set_actions(10);
  Vector theta = Vector::Zero(10);
  theta(0) = -1;
  theta(4) = 1;
  const double h2 = h_squared(sol.cov);
  const double radius = std::sqrt(4 * (4 + 0.01) * h2 * std::log(400.0) / 10000);
  int subset = 0, l1_ok = 0, linf_ok = 0;
  const int runs = 100;
  for (int r = 0; r < runs; ++r) {
    const auto d = draw(a, sol.design, theta, 0.1, 10000, 100 + r);
    const auto est = popart::popart(ArmSampleView(a, d.arm, d.reward), sol.cov, {0.1, 0.05, 2.0, Vector::Zero(10)});
    subset += std::all_of(est.support.begin(), est.support.end(), [](Index i) { return i == 0 || i == 4; });
    l1_ok += (est.theta_hat - theta).lpNorm<1>() <= 2 * 2 * radius;
    linf_ok += (est.theta_hat - theta).lpNorm<Eigen::Infinity>() <= 2 * radius;
  }
  EXPECT_GE(subset, 95);
  EXPECT_GE(l1_ok, 95);
  EXPECT_GE(linf_ok, 95);
  // no-false-positive rate <= delta + 3 sqrt(delta (1 - delta) / R)
  EXPECT_LE(1.0 - subset / double(runs), 0.05 + 3 * std::sqrt(0.05 * 0.95 / runs));
}

TEST(WarmPopArt, StageTwoUsesSigma) {
  const auto& sol = case1_design();
  const ActionSet a = hard_set_actions(10);
  Vector theta = Vector::Zero(10);
  theta(0) = -1;
  theta(3) = 1;
  for (double sigma : {0.1, 0.7}) {
    const auto d = draw(a, sol.design, theta, sigma, 2001, 9);
    const auto w = warm_popart_stages(ArmSampleView(a, d.arm, d.reward), sol.cov, 1.3, sigma, 0.05);
    EXPECT_EQ(w.refine_config.r0, sigma);
    EXPECT_EQ(w.refine_config.pilot, w.coarse.theta_hat);
    EXPECT_TRUE(w.refined_stage_run);
  }
}

TEST(WarmPopArt, Case1L1Bound) {
  const auto& sol = case1_design();
  const ActionSet a = hard_set_actions(10);
  const double h2 = h_squared(sol.cov);
  const double bound = 8 * 2 * 0.1 * std::sqrt(h2 * std::log(400.0) / 10000);
  int ok = 0;
  for (int r = 0; r < 100; ++r) {
    const Vector theta = theta_generator(ThetaCase::case1_l1, 10, r);
    const auto d = draw(a, sol.design, theta, 0.1, 10000, 500 + r);
    const auto est = warm_popart(ArmSampleView(a, d.arm, d.reward), sol.cov, 1.0 + 1 / std::sqrt(10.0), 0.1, 0.05);
    ok += (est.theta_hat - theta).lpNorm<1>() <= bound;
  }
  EXPECT_GE(ok, 95);
}
