#include <gtest/gtest.h>

#include <cmath>

#include "ropt/instances.hpp"
#include "ropt/oracle.hpp"
#include "ropt/serialize.hpp"
#include "ropt/solver.hpp"
#include "test_util.hpp"

using namespace ropt;
using testutil::vec1;
using testutil::vec2;

TEST(FiniteExample, DrawRangesAndDeterminism) {
  FiniteExampleDraw a = finite_example_draw(500, 11);
  FiniteExampleDraw b = finite_example_draw(500, 11);
  FiniteExampleDraw c = finite_example_draw(500, 12);
  ASSERT_EQ(a.tau.size(), 500u);
  ASSERT_EQ(a.alpha.size(), 500u);
  ASSERT_EQ(a.branch.size(), 500u);
  double mean_tau = 0.0;
  bool any_branch[2] = {false, false};
  for (size_t k = 0; k < a.tau.size(); ++k) {
    EXPECT_GE(a.tau[k], -0.5);
    EXPECT_LE(a.tau[k], 0.5);
    EXPECT_GE(a.alpha[k], 0.0);
    EXPECT_LE(a.alpha[k], 0.25);
    ASSERT_TRUE(a.branch[k] == 0 || a.branch[k] == 1);
    any_branch[a.branch[k]] = true;
    mean_tau += a.tau[k];
    EXPECT_EQ(a.tau[k], b.tau[k]);
    EXPECT_EQ(a.alpha[k], b.alpha[k]);
    EXPECT_EQ(a.branch[k], b.branch[k]);
  }
  mean_tau /= 500.0;
  EXPECT_NEAR(a.tau_bar, mean_tau, 1e-12);
  EXPECT_TRUE(any_branch[0] && any_branch[1]);
  EXPECT_NE(a.tau[0], c.tau[0]);
  EXPECT_THROW(finite_example_draw(0, 1), std::invalid_argument);
}

TEST(FiniteExample, ExactTablesAreClosedForm) {
  ProblemInstance ex = make_finite_example(2, 0, EvalMode::exact);
  EXPECT_EQ(ex.exact_eval, "finite-example");
  const auto& th = enumerate_finite(ex.hypothesis);
  ASSERT_EQ(th.size(), 4u);
  EXPECT_LE((th[0] - vec2(0.5, 0.5)).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_LE((th[1] - vec2(1.0, 1.0)).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_LE((th[2] - vec2(1.0, 1.0 / 3.0)).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_LE((th[3] - vec2(1.0, 0.0)).lpNorm<Eigen::Infinity>(), 1e-15);
  const double J[4] = {1.0 / 32.0, 1.0 / 16.0, 5.0 / 48.0, 1.0 / 8.0};
  const double c1[4] = {0.5, 0.0, 0.0, 0.0};
  const double c2[4] = {-0.5, 0.0, -2.0 / 3.0, -1.0};
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(eval_objective(ex, th[static_cast<size_t>(k)]), J[k], 1e-15);
    Vec c = eval_constraints(ex, th[static_cast<size_t>(k)]);
    EXPECT_NEAR(c[0], c1[k], 1e-15);
    EXPECT_NEAR(c[1], c2[k], 1e-15);
  }
}

TEST(FiniteExample, SampledMeansMatchManualAverages) {
  ProblemInstance inst = make_finite_example(64, 9, EvalMode::sampled);
  EXPECT_TRUE(inst.exact_eval.empty());
  const ModelFamily& fam = family_of(inst.hypothesis);
  for (const Vec& th : enumerate_finite(inst.hypothesis)) {
    for (int i = 0; i < inst.num_constraints; ++i) {
      double mean = 0.0;
      const auto& split = inst.splits[static_cast<size_t>(i) + 1];
      for (const auto& s : split.samples)
        mean += loss_value(inst.constraints[static_cast<size_t>(i)], fam, th, s);
      mean /= static_cast<double>(split.samples.size());
      EXPECT_NEAR(eval_constraints(inst, th)[i], mean, 1e-12);
    }
  }
}

TEST(FiniteExample, SelectionFrequenciesAtAcceptanceScale) {
  SelectionReport rep = run_selection_trials(1000, 200, 7, quadratic_cost(0.5));
  ASSERT_EQ(rep.trials, 200);
  ASSERT_EQ(rep.ecrm.size(), 5u);
  ASSERT_EQ(rep.relaxed.size(), 5u);
  ASSERT_EQ(rep.resilient.size(), 5u);
  double se = 0.0, sr = 0.0, sz = 0.0;
  for (int k = 0; k < 5; ++k) {
    se += rep.ecrm[static_cast<size_t>(k)];
    sr += rep.relaxed[static_cast<size_t>(k)];
    sz += rep.resilient[static_cast<size_t>(k)];
  }
  EXPECT_NEAR(se, 1.0, 1e-12);
  EXPECT_NEAR(sr, 1.0, 1e-12);
  EXPECT_NEAR(sz, 1.0, 1e-12);
  // infeasible-at-zero candidates never win the strict rule
  EXPECT_DOUBLE_EQ(rep.ecrm[0], 0.0);
  EXPECT_DOUBLE_EQ(rep.ecrm[1], 0.0);
  // the relaxation-priced rule locks onto candidate 1
  EXPECT_DOUBLE_EQ(rep.resilient[1], 1.0);
  // the over-relaxed rule abandons candidate 1
  EXPECT_DOUBLE_EQ(rep.relaxed[1], 0.0);
  EXPECT_GT(rep.mean_abs_tau_bar, 0.0);
  EXPECT_LT(rep.mean_abs_tau_bar, 0.05);
}

TEST(ConvexQp, ConstraintFloorsSitQuarterAboveZero) {
  for (auto [d, m, seed] : {std::tuple<int, int, std::uint64_t>{1, 1, 0},
                            {2, 2, 1},
                            {3, 2, 7}}) {
    ProblemInstance inst = make_convex_qp(d, m, seed);
    EXPECT_EQ(inst.dim, d);
    EXPECT_EQ(inst.num_constraints, m);
    const ModelFamily& fam = family_of(inst.hypothesis);
    ASSERT_EQ(fam.kind, FamilyKind::linear);
    for (int i = 0; i < m; ++i) {
      // each constraint is a mean squared loss; its own minimum solves the
      // normal equations of that split
      const auto& samples = inst.splits[static_cast<size_t>(i) + 1].samples;
      Mat A = Mat::Zero(d, d);
      Vec b = Vec::Zero(d);
      for (const auto& s : samples) {
        A += s.x * s.x.transpose();
        b += s.y * s.x;
      }
      A /= static_cast<double>(samples.size());
      b /= static_cast<double>(samples.size());
      Vec theta_star = A.llt().solve(b);
      EXPECT_NEAR(eval_constraints(inst, theta_star)[i], 0.25, 1e-9)
          << "d=" << d << " m=" << m << " i=" << i;
    }
    if (d == 1)
      EXPECT_EQ(inst.inner_solve, "qp-interval");
    else
      EXPECT_TRUE(inst.inner_solve.empty());
  }
}

TEST(ConvexQp, ZeroRelaxationInfeasibleButFiniteRelaxationsFeasible) {
  ProblemInstance inst = make_convex_qp(3, 2, 7);
  const auto& samples = inst.splits[1].samples;
  Mat A = Mat::Zero(3, 3);
  Vec b = Vec::Zero(3);
  for (const auto& s : samples) {
    A += s.x * s.x.transpose();
    b += s.y * s.x;
  }
  Vec witness = A.llt().solve(b);
  // no parameter can reach u = 0 (every constraint floor is 0.25) ...
  EXPECT_LT(feasibility_margin(inst, witness, Vec::Zero(2)), 0.0);
  // ... but a finite relaxation above the slacks at the witness is strict
  Vec u = eval_constraints(inst, witness).array() + 0.5;
  EXPECT_GT(feasibility_margin(inst, witness, u), 0.0);
}

TEST(FeasibilityMargin, SignedSmallestSlack) {
  ProblemInstance inst = testutil::make_sqrt_instance();
  // constraint value at theta = 0.5 is 0.25
  EXPECT_NEAR(feasibility_margin(inst, vec1(0.5), vec1(0.3)), 0.05, 1e-12);
  EXPECT_NEAR(feasibility_margin(inst, vec1(0.5), vec1(0.1)), -0.15, 1e-12);
}

TEST(SvmToys, SeparablePairHasUnitMarginSolution) {
  auto pair = make_svm_separable_toy(10.0);
  const ProblemInstance& inst = pair.first;
  EXPECT_EQ(inst.num_constraints, 2);
  EXPECT_EQ(pair.second.kind, CostKind::linear);
  ResilientSolution sol = resilient_brute_force(inst, pair.second);
  EXPECT_NEAR(sol.theta[0], 1.0, 1e-3);
  EXPECT_LE(sol.u.lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(SvmToys, OverlapPairMustBuyRelaxation) {
  auto pair = make_svm_overlap_toy(1.0);
  // objective is a pure ridge: 0.5 * theta^2
  for (double t : {-1.0, 0.0, 0.7, 2.0})
    EXPECT_NEAR(eval_objective(pair.first, vec1(t)), 0.5 * t * t, 1e-12);
  ResilientSolution sol = resilient_brute_force(pair.first, pair.second);
  EXPECT_NEAR(sol.theta[0], 0.0, 1e-3);
  EXPECT_NEAR(sol.u[0], 1.0, 1e-3);
  EXPECT_NEAR(sol.u[1], 1.0, 1e-3);
  EXPECT_NEAR(sol.value, 2.0, 1e-3);
}

TEST(InvarianceToy, RotationCheaperThanTranslation) {
  ProblemInstance inst = make_invariance_toy(3, 4, true);
  EXPECT_EQ(inst.num_constraints, 2);
  EXPECT_EQ(inst.constraints[0].kind, LossKind::robust_max);
  EXPECT_EQ(inst.constraints[1].kind, LossKind::robust_max);
  EXPECT_EQ(inst.constraints[0].transforms.size(), 4u);
  SolverConfig cfg;
  cfg.eta_theta = 0.1;
  cfg.eta_u = 0.05;
  cfg.eta_lambda = 0.05;
  cfg.max_iters = 3000;
  cfg.batch = BatchMode::full_batch;
  cfg.seed = 1;
  RunResult res = run(inst, quadratic_cost(1.0), cfg);
  EXPECT_EQ(res.stop, StopReason::completed);
  // symmetry the model can absorb needs almost no relaxation; the shift the
  // model cannot absorb buys a visible one
  EXPECT_LE(res.state.u[0], 0.05);
  EXPECT_GE(res.state.u[1], res.state.u[0] + 0.1);
}

TEST(Serialize, InstanceRoundTripPreservesEvaluations) {
  for (ProblemInstance inst :
       {make_convex_qp(2, 2, 3), make_finite_example(50, 4, EvalMode::sampled),
        make_finite_example(2, 0, EvalMode::exact), make_invariance_toy(5, 3, true)}) {
    Json j = to_json(inst);
    ProblemInstance back = instance_from_json(j);
    EXPECT_EQ(back.dim, inst.dim);
    EXPECT_EQ(back.num_constraints, inst.num_constraints);
    EXPECT_EQ(back.exact_eval, inst.exact_eval);
    EXPECT_EQ(back.inner_solve, inst.inner_solve);
    EXPECT_EQ(back.loss_bound, inst.loss_bound);
    Vec theta;
    if (const auto* fin = std::get_if<FiniteHypothesis>(&inst.hypothesis))
      theta = fin->thetas[0];
    else
      theta = init_params(family_of(inst.hypothesis), 17);
    EXPECT_EQ(eval_objective(back, theta), eval_objective(inst, theta));
    EXPECT_EQ((eval_constraints(back, theta) - eval_constraints(inst, theta))
                  .lpNorm<Eigen::Infinity>(),
              0.0);
    // a second hop is byte-stable
    EXPECT_EQ(to_json(back).dump(), j.dump());
  }
}

TEST(Serialize, CostRoundTripAllKinds) {
  std::vector<CostTerm> terms{{1.5, 0.25}, {0.75, 0.0}};
  for (const RelaxationCost& h :
       {quadratic_cost(2.5), linear_cost(vec2(1.0, 3.0)), per_coordinate_cost(terms)}) {
    Json j = to_json(h);
    RelaxationCost back = cost_from_json(j);
    EXPECT_EQ(back.kind, h.kind);
    Vec u = vec2(0.4, 1.3);
    EXPECT_EQ(cost_value(back, u), cost_value(h, u));
    EXPECT_EQ((cost_grad(back, u) - cost_grad(h, u)).lpNorm<Eigen::Infinity>(), 0.0);
  }
}

TEST(Serialize, LossTagsRoundTrip) {
  LossSpec robust;
  robust.kind = LossKind::robust_max;
  robust.inner = LossKind::logistic;
  robust.offset = 0.125;
  Transform t;
  t.a = Mat::Identity(2, 2) * 0.5;
  t.b = vec2(0.1, -0.2);
  robust.transforms = {t};
  for (const LossSpec& l :
       {simple_loss(LossKind::squared, 0.5), simple_loss(LossKind::hinge, 0.0),
        simple_loss(LossKind::logistic, -0.25), simple_loss(LossKind::linear_form, 0.0),
        simple_loss(LossKind::absolute_linear, 0.0), robust}) {
    Json j = to_json(l);
    LossSpec back = loss_from_json(j);
    EXPECT_EQ(back.kind, l.kind);
    EXPECT_EQ(back.offset, l.offset);
    if (l.kind == LossKind::robust_max) {
      EXPECT_EQ(back.inner, l.inner);
      ASSERT_EQ(back.transforms.size(), 1u);
      EXPECT_EQ((back.transforms[0].b - t.b).lpNorm<Eigen::Infinity>(), 0.0);
      EXPECT_EQ(j.at("tag").get<std::string>(), "robust-max");
    }
  }
  Json bad = Json{{"tag", "no-such-loss"}, {"offset", 0.0}};
  EXPECT_THROW(loss_from_json(bad), std::exception);
}

TEST(Serialize, JsonFileRoundTrip) {
  testutil::TempDir dir;
  std::string path = dir.file("inst.json");
  ProblemInstance inst = make_convex_qp(2, 1, 5);
  write_json_file(path, to_json(inst));
  Json j = read_json_file(path);
  ProblemInstance back = instance_from_json(j);
  Vec theta = init_params(family_of(inst.hypothesis), 2);
  EXPECT_EQ(eval_objective(back, theta), eval_objective(inst, theta));
  std::string text = testutil::read_file(path);
  EXPECT_EQ(text.back(), '\n');
}
