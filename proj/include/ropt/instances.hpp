#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "ropt/evaluate.hpp"
#include "ropt/oracle.hpp"
#include "ropt/parallel.hpp"
#include "ropt/random.hpp"
#include "ropt/registry.hpp"
#include "ropt/types.hpp"

namespace ropt {

// ---------------------------------------------------------------------------
// Finite selection example: a 2-D problem over four candidate parameter
// vectors whose three sample splits share one latent draw per index, so the
// empirical constraint slacks of different splits are correlated.
// ---------------------------------------------------------------------------

struct FiniteExampleDraw {
  std::vector<double> tau;    // in [-1/2, 1/2]
  std::vector<double> alpha;  // in [0, 1/4]
  std::vector<int> branch;    // objective-split branch bit
  double tau_bar = 0.0;
};

inline FiniteExampleDraw finite_example_draw(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n: must be >= 1");
  auto g = make_engine(seed);
  FiniteExampleDraw d;
  d.tau.resize(n);
  d.alpha.resize(n);
  d.branch.resize(n);
  for (int i = 0; i < n; ++i) {
    d.tau[i] = uniform_real(g, -0.5, 0.5);
    d.alpha[i] = uniform_real(g, 0.0, 0.25);
    d.branch[i] = static_cast<int>(g() & 1u);
    d.tau_bar += d.tau[i];
  }
  d.tau_bar /= n;
  return d;
}

enum class EvalMode { sampled, exact };

namespace detail {

inline double instance_loss_bound(const ProblemInstance& inst, const std::vector<Vec>& thetas) {
  const ModelFamily& fam = family_of(inst.hypothesis);
  double bound = 0.0;
  for (const auto& theta : thetas) {
    for (const auto& s : inst.splits[0].samples)
      bound = std::max(bound, std::abs(loss_value(inst.objective, fam, theta, s)));
    for (int i = 0; i < inst.num_constraints; ++i)
      for (const auto& s : inst.splits[static_cast<size_t>(i) + 1].samples)
        bound = std::max(bound, std::abs(loss_value(inst.constraints[i], fam, theta, s)));
  }
  return std::max(bound, 1e-9);
}

inline const bool finite_example_registered = [] {
  register_exact_eval("finite-example", [](const ProblemInstance&, const Vec& theta) {
    if (theta.size() != 2) throw std::invalid_argument("theta: expected two parameters");
    ExactMoments mom;
    mom.objective = std::abs(theta[0] - theta[1]) / 8.0 + std::abs(theta[1]) / 16.0;
    mom.constraints = Vec(2);
    mom.constraints << 1.0 - theta[0], theta[1] - 1.0;
    return mom;
  });
  return true;
}();

}  // namespace detail

inline ProblemInstance make_finite_example(int n, std::uint64_t seed,
                                           EvalMode mode = EvalMode::sampled) {
  (void)detail::finite_example_registered;
  FiniteExampleDraw d = finite_example_draw(n, seed);

  ProblemInstance inst;
  inst.dim = 2;
  inst.num_constraints = 2;
  inst.splits.resize(3);
  for (int i = 0; i < n; ++i) {
    Sample s0;
    s0.x = Vec(2);
    if (d.branch[i]) {
      s0.x << 0.0, d.alpha[i];
      s0.y = 1.0;
    } else {
      s0.x << d.tau[i], -d.tau[i];
      s0.y = -1.0;
    }
    inst.splits[0].samples.push_back(std::move(s0));

    Sample s1;
    s1.x = Vec(2);
    s1.x << -1.0, d.tau[i];
    s1.y = 1.0;
    inst.splits[1].samples.push_back(std::move(s1));

    Sample s2;
    s2.x = Vec(2);
    s2.x << -d.tau[i], 1.0;
    s2.y = 1.0;
    inst.splits[2].samples.push_back(std::move(s2));
  }

  inst.objective = simple_loss(LossKind::absolute_linear, 0.0);
  inst.constraints = {simple_loss(LossKind::linear_form, -1.0), simple_loss(LossKind::linear_form, 1.0)};

  FiniteHypothesis fin;
  fin.family = {FamilyKind::linear, 2, 0, 1};
  Vec a(2), b(2), c(2), e(2);
  a << 0.5, 0.5;
  b << 1.0, 1.0;
  c << 1.0, 1.0 / 3.0;
  e << 1.0, 0.0;
  fin.thetas = {a, b, c, e};
  inst.hypothesis = std::move(fin);

  inst.loss_bound = detail::instance_loss_bound(inst, std::get<FiniteHypothesis>(inst.hypothesis).thetas);
  if (mode == EvalMode::exact) inst.exact_eval = "finite-example";
  validate_instance(inst);
  return inst;
}

struct SelectionReport {
  int trials = 0;
  // Frequencies over the enumerated candidates plus a trailing none-feasible
  // bucket; each method's entries sum to 1.
  std::vector<double> ecrm;
  std::vector<double> relaxed;
  std::vector<double> resilient;
  double mean_abs_tau_bar = 0.0;
};

// Per trial: draw a fresh sampled instance, then record the winner under the
// feasible-only rule at u = 0, the feasible-only rule at the policy's u, and
// the relaxation-priced rule.
inline SelectionReport run_selection_trials(
    int n, int trials, std::uint64_t seed, const RelaxationCost& h,
    const std::function<Vec(double)>& relaxed_u_policy = {}) {
  if (trials < 1) throw std::invalid_argument("trials: must be >= 1");
  auto policy = relaxed_u_policy
                    ? relaxed_u_policy
                    : [](double tau_bar) { return Vec::Constant(2, tau_bar + 1.0).eval(); };

  const int K = 4;
  std::vector<int> pick_ecrm(trials, K), pick_relaxed(trials, K), pick_resilient(trials, K);
  std::vector<double> abs_tau(trials, 0.0);

  parallel_for(static_cast<size_t>(trials), [&](size_t t) {
    ProblemInstance inst =
        make_finite_example(n, stream_seed(seed, static_cast<std::uint64_t>(t)), EvalMode::sampled);
    const auto& fin = std::get<FiniteHypothesis>(inst.hypothesis);
    // Recover the shared latent mean from the first constraint split.
    double tau_bar = 0.0;
    for (const auto& s : inst.splits[1].samples) tau_bar += s.x[1];
    tau_bar /= static_cast<double>(inst.splits[1].samples.size());
    abs_tau[t] = std::abs(tau_bar);

    std::vector<double> obj(K);
    std::vector<Vec> con(K);
    for (int k = 0; k < K; ++k) {
      obj[k] = eval_objective(inst, fin.thetas[static_cast<size_t>(k)]);
      con[k] = eval_constraints(inst, fin.thetas[static_cast<size_t>(k)]);
    }
    auto feasible_argmin = [&](const Vec& u) {
      int best = K;
      for (int k = 0; k < K; ++k) {
        if ((con[k].array() > u.array()).any()) continue;
        if (best == K || obj[k] < obj[best]) best = k;
      }
      return best;
    };
    pick_ecrm[t] = feasible_argmin(Vec::Zero(2));
    pick_relaxed[t] = feasible_argmin(policy(tau_bar));
    int best = 0;
    double best_v = obj[0] + cost_value(h, con[0].cwiseMax(0.0));
    for (int k = 1; k < K; ++k) {
      double v = obj[k] + cost_value(h, con[k].cwiseMax(0.0));
      if (v < best_v) {
        best_v = v;
        best = k;
      }
    }
    pick_resilient[t] = best;
  });

  SelectionReport report;
  report.trials = trials;
  report.ecrm.assign(K + 1, 0.0);
  report.relaxed.assign(K + 1, 0.0);
  report.resilient.assign(K + 1, 0.0);
  for (int t = 0; t < trials; ++t) {
    report.ecrm[static_cast<size_t>(pick_ecrm[t])] += 1.0;
    report.relaxed[static_cast<size_t>(pick_relaxed[t])] += 1.0;
    report.resilient[static_cast<size_t>(pick_resilient[t])] += 1.0;
    report.mean_abs_tau_bar += abs_tau[t];
  }
  for (int k = 0; k <= K; ++k) {
    report.ecrm[static_cast<size_t>(k)] /= trials;
    report.relaxed[static_cast<size_t>(k)] /= trials;
    report.resilient[static_cast<size_t>(k)] /= trials;
  }
  report.mean_abs_tau_bar /= trials;
  return report;
}

// ---------------------------------------------------------------------------
// Strictly convex quadratic testbed: linear model, squared losses, constraint
// offsets placed so u = 0 is infeasible while finite relaxations are strictly
// feasible.
// ---------------------------------------------------------------------------

namespace detail {

struct QuadCoeffs {
  double a = 0.0;  // mean x^2
  double b = 0.0;  // mean x y
  double c = 0.0;  // mean y^2
};

inline QuadCoeffs quad_coeffs_1d(const DatasetSplit& split) {
  QuadCoeffs q;
  for (const auto& s : split.samples) {
    q.a += s.x[0] * s.x[0];
    q.b += s.x[0] * s.y;
    q.c += s.y * s.y;
  }
  double n = static_cast<double>(split.samples.size());
  q.a /= n;
  q.b /= n;
  q.c /= n;
  return q;
}

inline const bool qp_interval_registered = [] {
  register_inner_solve("qp-interval", [](const ProblemInstance& inst, const Vec& u) {
    if (inst.dim != 1) throw std::invalid_argument("inner solve: one-dimensional instances only");
    const auto* diff = std::get_if<DifferentiableHypothesis>(&inst.hypothesis);
    if (!diff) throw std::invalid_argument("inner solve: differentiable hypothesis required");
    double lo = diff->box_lo, hi = diff->box_hi;
    for (int i = 0; i < inst.num_constraints; ++i) {
      QuadCoeffs q = quad_coeffs_1d(inst.splits[static_cast<size_t>(i) + 1]);
      // q.a t^2 - 2 q.b t + q.c - offset <= u_i
      double rhs = inst.constraints[static_cast<size_t>(i)].offset + u[i] - q.c;
      double disc = q.b * q.b + q.a * rhs;
      if (disc < 0.0) return InnerSolution{};
      double root = std::sqrt(disc);
      lo = std::max(lo, (q.b - root) / q.a);
      hi = std::min(hi, (q.b + root) / q.a);
    }
    if (lo > hi) return InnerSolution{};
    QuadCoeffs q0 = quad_coeffs_1d(inst.splits[0]);
    double t = std::min(std::max(q0.b / q0.a, lo), hi);
    InnerSolution sol;
    sol.feasible = true;
    sol.theta = Vec::Constant(1, t);
    sol.value = q0.a * t * t - 2.0 * q0.b * t + q0.c - inst.objective.offset;
    return sol;
  });
  return true;
}();

}  // namespace detail

inline ProblemInstance make_convex_qp(int d, int m, std::uint64_t seed) {
  (void)detail::qp_interval_registered;
  if (d < 1 || m < 1) throw std::invalid_argument("d, m: must be >= 1");
  auto g = make_engine(seed);
  const int n = 40;
  const double box = 10.0;

  ProblemInstance inst;
  inst.dim = d;
  inst.num_constraints = m;
  inst.splits.resize(static_cast<size_t>(m) + 1);
  for (int i = 0; i <= m; ++i) {
    Vec w(d);
    for (int j = 0; j < d; ++j) w[j] = uniform_real(g, -1.0, 1.0);
    for (int k = 0; k < n; ++k) {
      Sample s;
      s.x = Vec(d);
      for (int j = 0; j < d; ++j) s.x[j] = normal(g);
      s.y = w.dot(s.x) + 0.3 * normal(g);
      inst.splits[static_cast<size_t>(i)].samples.push_back(std::move(s));
    }
  }

  inst.objective = simple_loss(LossKind::squared, 0.0);
  inst.constraints.assign(static_cast<size_t>(m), simple_loss(LossKind::squared, 0.0));
  // Shift each constraint so its pointwise minimum over theta sits at 0.25,
  // making the unrelaxed problem infeasible by a fixed margin.
  for (int i = 1; i <= m; ++i) {
    const auto& samples = inst.splits[static_cast<size_t>(i)].samples;
    Mat A = Mat::Zero(d, d);
    Vec b = Vec::Zero(d);
    double c = 0.0;
    for (const auto& s : samples) {
      A += s.x * s.x.transpose();
      b += s.y * s.x;
      c += s.y * s.y;
    }
    double nn = static_cast<double>(samples.size());
    A /= nn;
    b /= nn;
    c /= nn;
    double min_val = c - b.dot(A.llt().solve(b));
    inst.constraints[static_cast<size_t>(i) - 1].offset = min_val - 0.25;
  }

  DifferentiableHypothesis diff;
  diff.family = {FamilyKind::linear, d, 0, 1};
  diff.box_lo = -box;
  diff.box_hi = box;
  inst.hypothesis = diff;

  double bound = 0.0;
  for (size_t i = 0; i < inst.splits.size(); ++i) {
    double offset = i == 0 ? inst.objective.offset : inst.constraints[i - 1].offset;
    for (const auto& s : inst.splits[i].samples) {
      double reach = box * s.x.cwiseAbs().sum() + std::abs(s.y);
      bound = std::max(bound, reach * reach + std::abs(offset));
    }
  }
  inst.loss_bound = bound;
  if (d == 1) inst.inner_solve = "qp-interval";
  validate_instance(inst);
  return inst;
}

// Worst slack of u - c(theta): positive means (theta, u) is strictly feasible.
inline double feasibility_margin(const ProblemInstance& inst, const Vec& theta, const Vec& u) {
  Vec c = eval_constraints(inst, theta);
  return (u - c).minCoeff();
}

// ---------------------------------------------------------------------------
// Soft-margin classifier: quadratic regularizer as the objective, one margin
// constraint per point, linear relaxation price gamma per unit of slack.
// ---------------------------------------------------------------------------

inline std::pair<ProblemInstance, RelaxationCost> make_svm(const std::vector<Vec>& points,
                                                           const std::vector<double>& labels,
                                                           double gamma) {
  if (points.empty()) throw std::invalid_argument("points: need at least one");
  if (points.size() != labels.size())
    throw std::invalid_argument("labels: length must match points");
  for (double y : labels)
    if (y != 1.0 && y != -1.0) throw std::invalid_argument("labels: must be +1 or -1");
  if (gamma < 0.0) throw std::invalid_argument("gamma: must be nonnegative");
  const int d = static_cast<int>(points[0].size());
  const int m = static_cast<int>(points.size());
  const double box = 50.0;

  ProblemInstance inst;
  inst.dim = d;
  inst.num_constraints = m;
  inst.splits.resize(static_cast<size_t>(m) + 1);
  // mean of (theta' x_j)^2 over x_j = sqrt(d/2) e_j equals ||theta||^2 / 2
  for (int j = 0; j < d; ++j) {
    Sample s;
    s.x = Vec::Zero(d);
    s.x[j] = std::sqrt(static_cast<double>(d) / 2.0);
    s.y = 0.0;
    inst.splits[0].samples.push_back(std::move(s));
  }
  for (int i = 0; i < m; ++i) {
    if (points[static_cast<size_t>(i)].size() != d)
      throw std::invalid_argument("points: inconsistent dimensions");
    Sample s;
    s.x = points[static_cast<size_t>(i)];
    s.y = -labels[static_cast<size_t>(i)];
    inst.splits[static_cast<size_t>(i) + 1].samples.push_back(std::move(s));
  }

  inst.objective = simple_loss(LossKind::squared, 0.0);
  inst.constraints.assign(static_cast<size_t>(m), simple_loss(LossKind::linear_form, -1.0));

  DifferentiableHypothesis diff;
  diff.family = {FamilyKind::linear, d, 0, 1};
  diff.box_lo = -box;
  diff.box_hi = box;
  inst.hypothesis = diff;

  double bound = box * box * static_cast<double>(d) / 2.0;
  for (const auto& p : points) bound = std::max(bound, 1.0 + box * p.cwiseAbs().sum());
  inst.loss_bound = bound;
  validate_instance(inst);
  return {inst, linear_cost(Vec::Constant(m, gamma))};
}

// Two separable points on the line: both margins reach 1 with no slack spent
// (theta* = 1, u* = 0).
inline std::pair<ProblemInstance, RelaxationCost> make_svm_separable_toy(double gamma = 10.0) {
  return make_svm({Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)}, {1.0, -1.0}, gamma);
}

// Two coincident points with opposite labels: no classifier satisfies both
// margins, so the optimum buys slack (theta* = 0, u* = (1, 1) for gamma >= 1).
inline std::pair<ProblemInstance, RelaxationCost> make_svm_overlap_toy(double gamma = 1.0) {
  return make_svm({Vec::Constant(1, 1.0), Vec::Constant(1, 1.0)}, {1.0, -1.0}, gamma);
}

// ---------------------------------------------------------------------------
// Invariance toy: two Gaussian blobs with a worst-case-over-transforms
// constraint; rotations are mild, the optional translation family is not.
// ---------------------------------------------------------------------------

inline ProblemInstance make_invariance_toy(std::uint64_t seed, int k_transforms,
                                           bool add_translation = false) {
  if (k_transforms < 1) throw std::invalid_argument("k_transforms: must be >= 1");
  auto g = make_engine(seed);
  const int per_class = 60;
  const double box = 5.0;

  std::vector<Sample> data;
  for (int cls = 0; cls < 2; ++cls) {
    double sign = cls == 0 ? 1.0 : -1.0;
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.x = Vec(2);
      s.x << sign * 1.5 + 0.4 * normal(g), sign * 1.5 + 0.4 * normal(g);
      s.y = sign;
      data.push_back(std::move(s));
    }
  }

  auto identity = [] {
    Transform t;
    t.a = Mat::Identity(2, 2);
    t.b = Vec::Zero(2);
    return t;
  };
  LossSpec rotation_constraint;
  rotation_constraint.kind = LossKind::robust_max;
  rotation_constraint.inner = LossKind::logistic;
  rotation_constraint.offset = 0.7;
  rotation_constraint.transforms.push_back(identity());
  for (int k = 1; k < k_transforms; ++k) {
    double angle = uniform_real(g, -0.35, 0.35);
    Transform t;
    t.a = Mat(2, 2);
    t.a << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    t.b = Vec::Zero(2);
    rotation_constraint.transforms.push_back(std::move(t));
  }

  ProblemInstance inst;
  inst.dim = 2;
  inst.num_constraints = add_translation ? 2 : 1;
  inst.splits.resize(static_cast<size_t>(inst.num_constraints) + 1);
  inst.splits[0].samples = data;
  inst.splits[1].samples = data;
  inst.objective = simple_loss(LossKind::logistic, 0.0);
  inst.constraints = {rotation_constraint};

  if (add_translation) {
    LossSpec translation_constraint;
    translation_constraint.kind = LossKind::robust_max;
    translation_constraint.inner = LossKind::logistic;
    translation_constraint.offset = 0.7;
    translation_constraint.transforms.push_back(identity());
    for (int k = 1; k < std::max(2, k_transforms); ++k) {
      Transform t;
      t.a = Mat::Identity(2, 2);
      t.b = Vec(2);
      t.b << (g() & 1u ? 1.0 : -1.0) * uniform_real(g, 2.0, 3.0),
          (g() & 1u ? 1.0 : -1.0) * uniform_real(g, 2.0, 3.0);
      translation_constraint.transforms.push_back(std::move(t));
    }
    inst.splits[2].samples = data;
    inst.constraints.push_back(std::move(translation_constraint));
  }

  DifferentiableHypothesis diff;
  diff.family = {FamilyKind::linear, 2, 0, 1};
  diff.box_lo = -box;
  diff.box_hi = box;
  inst.hypothesis = diff;

  double reach = 0.0;
  for (const auto& s : data) reach = std::max(reach, box * (s.x.cwiseAbs().sum() + 3.0 * 2.0));
  inst.loss_bound = std::log1p(std::exp(0.0)) + reach + 0.7;
  validate_instance(inst);
  return inst;
}

}  // namespace ropt
