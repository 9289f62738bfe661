#include <gtest/gtest.h>

#include <set>

#include "popart/instances.hpp"

using namespace popart;

TEST(Instances, CanonicalBasis) {
  EXPECT_EQ(canonical_basis_actions(3).arms(), Matrix::Identity(3, 3));
  EXPECT_THROW(canonical_basis_actions(0), Error);
}

TEST(Instances, HardSetArms) {
  const ActionSet a = hard_set_actions(4);
  Matrix want(4, 4);
  want << 0.5, 0, 0, 0,  //
      1, 0.5, 0, 0,      //
      1, 0, 0.5, 0,      //
      1, 0, 0, 0.5;
  EXPECT_TRUE(a.arms().isApprox(want, 1e-15));
  EXPECT_TRUE(a.within_unit_box());
  EXPECT_THROW(hard_set_actions(1), Error);
}

TEST(Instances, UnitSphere) {
  const ActionSet a = unit_sphere_actions(30, 90, 7);
  EXPECT_EQ(a.size(), 90);
  for (Index k = 0; k < a.size(); ++k) EXPECT_NEAR(a.arm(k).norm(), 1.0, 1e-12);
  EXPECT_EQ(a.rank(), 30);
  EXPECT_EQ(unit_sphere_actions(30, 90, 7).arms(), a.arms());
  EXPECT_NE(unit_sphere_actions(30, 90, 8).arms(), a.arms());
}

TEST(Instances, ThetaCaseOneL1) {
  std::set<Index> hit;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Vector t = theta_generator("case1-l1", 10, seed);
    EXPECT_EQ(t(0), -1.0);
    EXPECT_EQ((t.array() != 0).count(), 2);
    EXPECT_EQ((t.array() == 1).count(), 1);
    for (Index i = 1; i < 10; ++i)
      if (t(i) == 1) hit.insert(i);
  }
  EXPECT_EQ(hit.size(), 9u);  // every index in {2..d} reachable
}

TEST(Instances, ThetaCaseOneBandit) {
  const Vector t = theta_generator(ThetaCase::case1_bandit, 10, 3);
  EXPECT_EQ(t(0), 1.0);
  EXPECT_EQ((t.array() == 1).count(), 2);
}

TEST(Instances, ThetaCaseTwo) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Vector t = theta_generator("case2", 30, seed);
    EXPECT_EQ((t.array() == 1).count(), 2);
    EXPECT_EQ((t.array() != 0).count(), 2);
  }
  EXPECT_EQ(theta_generator("case2", 30, 5), theta_generator("case2", 30, 5));
}

TEST(Instances, ThetaErrors) {
  EXPECT_THROW(theta_generator("case3", 10, 0), Error);
  EXPECT_THROW(theta_generator(ThetaCase::case2, 1, 0), Error);
}

TEST(Instances, CminBracketFunction) {
  const auto b = hard_set_cmin_bracket(10);
  EXPECT_GT(b.b_star, 0.0);
  EXPECT_LT(b.b_star, 1.0 / 9.0);
  EXPECT_DOUBLE_EQ(b.upper, 2 * b.lower);
  EXPECT_LE(b.lower, hard_set_f(10, b.b_star * 0.99));
  EXPECT_LE(b.lower, hard_set_f(10, b.b_star * 1.01));
}
