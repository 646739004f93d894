#include <gtest/gtest.h>

#include <cmath>

#include "ropt/evaluate.hpp"
#include "ropt/instances.hpp"
#include "ropt/random.hpp"
#include "test_util.hpp"

using namespace ropt;
using testutil::vec1;
using testutil::vec2;

namespace {

const ModelFamily kLin1{FamilyKind::linear, 1, 0, 1};

Sample sample1(double x, double y) {
  Sample s;
  s.x = vec1(x);
  s.y = y;
  return s;
}

}  // namespace

TEST(Evaluate, SquaredLoss) {
  // prediction -0.7 against label 1 -> (1 - (-0.7))^2 = 2.89
  ModelFamily f{FamilyKind::linear, 2, 0, 1};
  Sample s;
  s.x = vec2(-1.0, 0.3);
  s.y = 1.0;
  EXPECT_NEAR(loss_value(simple_loss(LossKind::squared, 0.0), f, vec2(1.0, 1.0), s), 2.89, 1e-12);
}

TEST(Evaluate, HingeLossAndKinkBranch) {
  LossSpec hinge = simple_loss(LossKind::hinge, 0.0);
  EXPECT_NEAR(loss_value(hinge, kLin1, vec1(0.3), sample1(1.0, 1.0)), 0.7, 1e-12);
  EXPECT_DOUBLE_EQ(loss_value(hinge, kLin1, vec1(2.0), sample1(1.0, 1.0)), 0.0);
  // at the kink (margin exactly 1) the flat branch wins: zero loss, zero grad
  EXPECT_DOUBLE_EQ(loss_value(hinge, kLin1, vec1(1.0), sample1(1.0, 1.0)), 0.0);
  Vec g = Vec::Zero(1);
  accumulate_loss_grad(hinge, kLin1, vec1(1.0), sample1(1.0, 1.0), 1.0, g);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  // active side pulls toward larger margin
  g.setZero();
  accumulate_loss_grad(hinge, kLin1, vec1(0.3), sample1(1.0, 1.0), 1.0, g);
  EXPECT_DOUBLE_EQ(g[0], -1.0);
}

TEST(Evaluate, BinaryLogisticIsSoftplusOfNegativeMargin) {
  LossSpec logit = simple_loss(LossKind::logistic, 0.0);
  EXPECT_NEAR(loss_value(logit, kLin1, vec1(0.0), sample1(1.0, 1.0)), std::log(2.0), 1e-12);
  double v = loss_value(logit, kLin1, vec1(2.0), sample1(1.0, -1.0));
  EXPECT_NEAR(v, std::log1p(std::exp(2.0)), 1e-12);
  // large |margin| stays finite (stable softplus)
  EXPECT_TRUE(std::isfinite(loss_value(logit, kLin1, vec1(500.0), sample1(1.0, -1.0))));
  EXPECT_NEAR(loss_value(logit, kLin1, vec1(500.0), sample1(1.0, 1.0)), 0.0, 1e-12);
}

TEST(Evaluate, MulticlassLogisticDispatchesOnOutputDim) {
  ModelFamily f{FamilyKind::linear, 1, 0, 2};
  LossSpec logit = simple_loss(LossKind::logistic, 0.0);
  Vec theta = vec2(0.0, 0.0);  // both logits zero
  Sample s = sample1(1.0, 0.0);
  EXPECT_NEAR(loss_value(logit, f, theta, s), std::log(2.0), 1e-12);
  Sample bad = sample1(1.0, 5.0);
  EXPECT_THROW(loss_value(logit, f, theta, bad), std::invalid_argument);
}

TEST(Evaluate, LinearFormAndAbsoluteLinear) {
  LossSpec lin = simple_loss(LossKind::linear_form, 0.0);
  EXPECT_DOUBLE_EQ(loss_value(lin, kLin1, vec1(0.4), sample1(2.0, -3.0)), -2.4);
  LossSpec abs = simple_loss(LossKind::absolute_linear, 0.0);
  EXPECT_DOUBLE_EQ(loss_value(abs, kLin1, vec1(-0.4), sample1(2.0, 7.0)), 0.8);
  // sign convention at zero: flat branch, zero gradient
  Vec g = Vec::Zero(1);
  accumulate_loss_grad(abs, kLin1, vec1(0.0), sample1(2.0, 7.0), 1.0, g);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
}

TEST(Evaluate, OffsetShiftsValueNotGradient) {
  LossSpec shifted = simple_loss(LossKind::squared, 0.25);
  LossSpec plain = simple_loss(LossKind::squared, 0.0);
  Sample s = sample1(1.5, -0.5);
  Vec theta = vec1(0.8);
  EXPECT_NEAR(loss_value(shifted, kLin1, theta, s), loss_value(plain, kLin1, theta, s) - 0.25,
              1e-15);
  Vec ga = Vec::Zero(1), gb = Vec::Zero(1);
  accumulate_loss_grad(shifted, kLin1, theta, s, 1.0, ga);
  accumulate_loss_grad(plain, kLin1, theta, s, 1.0, gb);
  EXPECT_DOUBLE_EQ(ga[0], gb[0]);
}

TEST(Evaluate, RobustMaxTakesWorstTransform) {
  LossSpec l;
  l.kind = LossKind::robust_max;
  l.inner = LossKind::squared;
  l.offset = 0.1;
  Transform t0;  // identity
  t0.a = Mat::Identity(1, 1);
  t0.b = Vec::Zero(1);
  Transform t1;  // x -> 2x
  t1.a = Mat::Identity(1, 1) * 2.0;
  t1.b = Vec::Zero(1);
  l.transforms = {t0, t1};
  Sample s = sample1(1.0, 0.0);
  Vec theta = vec1(0.5);
  // losses: (0.5)^2 = 0.25 and (1.0)^2 = 1.0 -> max is transform 1
  EXPECT_NEAR(loss_value(l, kLin1, theta, s), 1.0 - 0.1, 1e-15);
  Vec g = Vec::Zero(1);
  accumulate_loss_grad(l, kLin1, theta, s, 1.0, g);
  EXPECT_NEAR(g[0], 2.0 * (2.0 * 0.5) * 2.0, 1e-15);  // d/dtheta (2 theta)^2 = 8 theta
}

TEST(Evaluate, RobustMaxBreaksTiesTowardLowestIndex) {
  LossSpec l;
  l.kind = LossKind::robust_max;
  l.inner = LossKind::squared;
  Transform pos;  // x -> x
  pos.a = Mat::Identity(1, 1);
  pos.b = Vec::Zero(1);
  Transform neg;  // x -> -x, same squared loss at y=0
  neg.a = -Mat::Identity(1, 1);
  neg.b = Vec::Zero(1);
  l.transforms = {pos, neg};
  Sample s = sample1(1.0, 0.0);
  Vec theta = vec1(0.7);
  Vec g = Vec::Zero(1);
  accumulate_loss_grad(l, kLin1, theta, s, 1.0, g);
  EXPECT_NEAR(g[0], 2.0 * 0.7, 1e-15);  // gradient of the index-0 branch
  LossSpec empty = l;
  empty.transforms.clear();
  EXPECT_THROW(loss_value(empty, kLin1, theta, s), std::invalid_argument);
}

TEST(Evaluate, MeanLossRejectsEmptySet) {
  EXPECT_THROW(
      {
        try {
          mean_loss(simple_loss(LossKind::squared, 0.0), kLin1, vec1(0.0), {});
        } catch (const std::invalid_argument& e) {
          EXPECT_STREQ(e.what(), "samples: mean over an empty set");
          throw;
        }
      },
      std::invalid_argument);
}

TEST(Evaluate, ScalarLossRejectsMultiOutput) {
  ModelFamily f{FamilyKind::linear, 1, 0, 2};
  EXPECT_THROW(loss_value(simple_loss(LossKind::squared, 0.0), f, vec2(1.0, 1.0),
                          sample1(1.0, 0.0)),
               std::invalid_argument);
}

TEST(Evaluate, ExactRegistryOverridesSampledMeans) {
  ProblemInstance exact = make_finite_example(2, 0, EvalMode::exact);
  const auto& thetas = enumerate_finite(exact.hypothesis);
  ASSERT_EQ(thetas.size(), 4u);
  EXPECT_NEAR(eval_objective(exact, thetas[0]), 1.0 / 32.0, 1e-15);
  Vec c = eval_constraints(exact, thetas[0]);
  EXPECT_NEAR(c[0], 0.5, 1e-15);
  EXPECT_NEAR(c[1], -0.5, 1e-15);
}

TEST(Evaluate, SampledMeansConvergeToExactValues) {
  ProblemInstance exact = make_finite_example(2, 0, EvalMode::exact);
  ProblemInstance sampled = make_finite_example(100000, 42, EvalMode::sampled);
  for (const Vec& th : enumerate_finite(exact.hypothesis)) {
    EXPECT_NEAR(eval_objective(sampled, th), eval_objective(exact, th), 0.01);
    Vec cs = eval_constraints(sampled, th);
    Vec ce = eval_constraints(exact, th);
    EXPECT_LE((cs - ce).lpNorm<Eigen::Infinity>(), 0.01);
  }
}

TEST(Evaluate, WeightedGradientIsLinearInWeights) {
  ProblemInstance inst = make_convex_qp(3, 2, 7);
  auto g = make_engine(3);
  Vec theta(3);
  for (int j = 0; j < 3; ++j) theta[j] = uniform_real(g, -1.0, 1.0);
  Vec w1 = vec2(0.3, 1.2), w2 = vec2(0.9, 0.1);
  Vec lhs = full_batch_weighted_grad(inst, theta, w1 + w2);
  Vec rhs = full_batch_weighted_grad(inst, theta, w1) +
            full_batch_weighted_grad(inst, theta, w2) -
            full_batch_weighted_grad(inst, theta, Vec::Zero(2));
  EXPECT_LE((lhs - rhs).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Evaluate, PerTupleGradientMatchesFullBatchOnSingletonSplits) {
  ProblemInstance inst = testutil::make_sqrt_instance();
  Vec theta = vec1(0.4);
  Vec lambda = vec1(1.5);
  std::vector<const Sample*> tuple{&inst.splits[0].samples[0], &inst.splits[1].samples[0]};
  Vec a = grad_weighted_loss(inst, theta, lambda, tuple);
  Vec b = full_batch_weighted_grad(inst, theta, lambda);
  EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_THROW(grad_weighted_loss(inst, theta, vec2(1.0, 1.0), tuple), std::invalid_argument);
  std::vector<const Sample*> short_tuple{&inst.splits[0].samples[0]};
  EXPECT_THROW(grad_weighted_loss(inst, theta, lambda, short_tuple), std::invalid_argument);
}
