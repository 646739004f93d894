#include <gtest/gtest.h>

#include "ropt/random.hpp"
#include "ropt/types.hpp"
#include "test_util.hpp"

using namespace ropt;
using testutil::vec1;
using testutil::vec2;

TEST(Cost, QuadraticValueMatchesAlphaTimesSquaredNorm) {
  RelaxationCost h = quadratic_cost(2.0);
  EXPECT_DOUBLE_EQ(cost_value(h, vec2(1.0, 0.5)), 2.5);
  EXPECT_DOUBLE_EQ(cost_value(h, Vec::Zero(3)), 0.0);
}

TEST(Cost, QuadraticGradientIsTwoAlphaU) {
  RelaxationCost h = quadratic_cost(0.5);
  Vec g = cost_grad(h, vec1(2.0));
  ASSERT_EQ(g.size(), 1);
  EXPECT_DOUBLE_EQ(g[0], 2.0);
}

TEST(Cost, LinearValueAndGradient) {
  Vec gamma(1);
  gamma << 3.0;
  RelaxationCost h = linear_cost(gamma);
  EXPECT_DOUBLE_EQ(cost_value(h, vec1(0.2)), 0.6);
  EXPECT_DOUBLE_EQ(cost_grad(h, vec1(0.2))[0], 3.0);
}

TEST(Cost, PerCoordinateValueAndGradient) {
  std::vector<CostTerm> terms{{2.0, 1.0}, {0.5, 0.0}};
  RelaxationCost h = per_coordinate_cost(terms);
  Vec u = vec2(1.0, 2.0);
  // 2*1 + 1*1 + 0.5*4 + 0*2 = 5
  EXPECT_DOUBLE_EQ(cost_value(h, u), 5.0);
  Vec g = cost_grad(h, u);
  EXPECT_DOUBLE_EQ(g[0], 5.0);  // 2*2*1 + 1
  EXPECT_DOUBLE_EQ(g[1], 2.0);  // 2*0.5*2
}

TEST(Cost, NormalizedToZeroAtOrigin) {
  Vec gamma = vec2(1.0, 2.0);
  std::vector<CostTerm> terms{{1.0, 0.5}, {2.0, 0.0}};
  for (const RelaxationCost& h :
       {quadratic_cost(3.0), linear_cost(gamma), per_coordinate_cost(terms)}) {
    EXPECT_DOUBLE_EQ(cost_value(h, Vec::Zero(2)), 0.0);
  }
}

TEST(Cost, StrictlyIncreasingComponentwise) {
  Vec gamma = vec2(1.0, 2.0);
  std::vector<CostTerm> terms{{1.0, 0.5}, {2.0, 0.1}};
  auto g = make_engine(11);
  for (const RelaxationCost& h :
       {quadratic_cost(0.7), linear_cost(gamma), per_coordinate_cost(terms)}) {
    for (int t = 0; t < 50; ++t) {
      Vec u = vec2(uniform_real(g, 0.0, 3.0), uniform_real(g, 0.0, 3.0));
      int coord = t % 2;
      Vec v = u;
      v[coord] += uniform_real(g, 0.01, 1.0);
      EXPECT_GT(cost_value(h, v), cost_value(h, u));
    }
  }
}

TEST(Cost, GradientMatchesFiniteDifferences) {
  Vec gamma = vec2(0.8, 1.7);
  std::vector<CostTerm> terms{{1.3, 0.4}, {0.6, 0.9}};
  auto g = make_engine(5);
  for (const RelaxationCost& h :
       {quadratic_cost(1.9), linear_cost(gamma), per_coordinate_cost(terms)}) {
    for (int t = 0; t < 100; ++t) {
      Vec u = vec2(uniform_real(g, 0.1, 4.0), uniform_real(g, 0.1, 4.0));
      Vec fd = testutil::fd_cost_grad(h, u);
      Vec an = cost_grad(h, u);
      EXPECT_LE((fd - an).lpNorm<Eigen::Infinity>(), 1e-6)
          << "kind=" << static_cast<int>(h.kind) << " u=" << u.transpose();
    }
  }
}

TEST(Cost, StrongConvexityConstants) {
  EXPECT_DOUBLE_EQ(cost_strong_convexity(quadratic_cost(2.5)), 2.5);
  EXPECT_DOUBLE_EQ(cost_strong_convexity(linear_cost(vec2(1.0, 1.0))), 0.0);
  std::vector<CostTerm> terms{{2.0, 0.0}, {0.5, 1.0}};
  EXPECT_DOUBLE_EQ(cost_strong_convexity(per_coordinate_cost(terms)), 0.5);
}

TEST(Cost, QuadraticRejectsNonPositiveAlpha) {
  EXPECT_THROW(
      {
        try {
          quadratic_cost(0.0);
        } catch (const std::invalid_argument& e) {
          EXPECT_STREQ(e.what(), "alpha: must be > 0");
          throw;
        }
      },
      std::invalid_argument);
  EXPECT_THROW(quadratic_cost(-1.0), std::invalid_argument);
}

TEST(Cost, LinearRejectsNegativeGamma) {
  EXPECT_THROW(linear_cost(vec2(1.0, -0.5)), std::invalid_argument);
}

TEST(Cost, PerCoordinateRejectsNegativeCoefficients) {
  std::vector<CostTerm> bad{{-1.0, 0.0}};
  EXPECT_THROW(per_coordinate_cost(bad), std::invalid_argument);
}

TEST(Cost, RejectsNegativeRelaxationComponents) {
  RelaxationCost h = quadratic_cost(1.0);
  EXPECT_THROW(
      {
        try {
          cost_value(h, vec2(0.5, -0.1));
        } catch (const std::invalid_argument& e) {
          EXPECT_STREQ(e.what(), "u: components must be nonnegative");
          throw;
        }
      },
      std::invalid_argument);
}

TEST(Cost, RejectsDimensionMismatch) {
  Vec gamma = vec2(1.0, 1.0);
  EXPECT_THROW(cost_value(linear_cost(gamma), vec1(0.5)), std::invalid_argument);
  std::vector<CostTerm> terms{{1.0, 0.0}};
  EXPECT_THROW(cost_grad(per_coordinate_cost(terms), vec2(0.5, 0.5)), std::invalid_argument);
}
