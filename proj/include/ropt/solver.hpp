#pragma once

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropt/csv.hpp"
#include "ropt/evaluate.hpp"
#include "ropt/types.hpp"

namespace ropt {

enum class BatchMode { per_sample_pass, full_batch };

struct SolverConfig {
  double eta_theta = 0.01;
  double eta_u = 0.01;
  double eta_lambda = 0.01;
  int max_iters = 1000;
  BatchMode batch = BatchMode::per_sample_pass;
  double tol = 0.0;
  std::uint64_t seed = 0;
  Vec u_init;       // empty -> zeros
  Vec lambda_init;  // empty -> zeros
  Vec theta_init;   // empty -> seeded uniform [-0.1, 0.1]
};

inline void validate_config(const SolverConfig& cfg) {
  if (!(cfg.eta_theta > 0.0)) throw std::invalid_argument("eta_theta: must be > 0");
  if (!(cfg.eta_u > 0.0)) throw std::invalid_argument("eta_u: must be > 0");
  if (!(cfg.eta_lambda > 0.0)) throw std::invalid_argument("eta_lambda: must be > 0");
  if (cfg.max_iters < 1) throw std::invalid_argument("max_iters: must be >= 1");
  if (cfg.tol < 0.0) throw std::invalid_argument("tol: must be >= 0");
  if ((cfg.u_init.array() < 0.0).any()) throw std::invalid_argument("u_init: must be nonnegative");
  if ((cfg.lambda_init.array() < 0.0).any())
    throw std::invalid_argument("lambda_init: must be nonnegative");
}

struct SolverState {
  Vec theta;
  Vec u;
  Vec lambda;
  int t = 0;
};

enum class StopReason { completed, converged, diverged, nonfinite };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::completed: return "completed";
    case StopReason::converged: return "converged";
    case StopReason::diverged: return "diverged";
    case StopReason::nonfinite: return "nonfinite";
  }
  throw std::logic_error("unknown stop reason");
}

struct TrajectoryPoint {
  int t = 0;
  double objective = 0.0;
  Vec constraints;
  Vec u;
  Vec lambda;
  double residual = 0.0;
  double lagrangian = 0.0;
};

struct RunResult {
  std::vector<TrajectoryPoint> trajectory;
  SolverState state;
  StopReason stop = StopReason::completed;
  double wall_seconds = 0.0;
};

namespace detail {

inline void check_state_dims(const ProblemInstance& inst, const SolverState& st) {
  if (st.theta.size() != param_count(family_of(inst.hypothesis)))
    throw std::invalid_argument("theta: length must equal param_count");
  if (st.u.size() != inst.num_constraints)
    throw std::invalid_argument("u: length must equal num_constraints");
  if (st.lambda.size() != inst.num_constraints)
    throw std::invalid_argument("lambda: length must equal num_constraints");
}

inline void clamp_box(const HypothesisSpace& space, Vec& theta) {
  const auto* diff = std::get_if<DifferentiableHypothesis>(&space);
  if (!diff) return;
  if (std::isfinite(diff->box_lo)) theta = theta.cwiseMax(diff->box_lo);
  if (std::isfinite(diff->box_hi)) theta = theta.cwiseMin(diff->box_hi);
}

}  // namespace detail

inline double empirical_lagrangian(const ProblemInstance& inst, const RelaxationCost& h,
                                   const SolverState& st) {
  detail::check_state_dims(inst, st);
  Vec c = eval_constraints(inst, st.theta);
  return cost_value(h, st.u) + eval_objective(inst, st.theta) + st.lambda.dot(c - st.u);
}

inline Vec theta_update(const ProblemInstance& inst, const SolverState& st,
                        const SolverConfig& cfg) {
  if (!std::holds_alternative<DifferentiableHypothesis>(inst.hypothesis))
    throw std::invalid_argument("hypothesis: theta updates need a differentiable space");
  Vec theta = st.theta;
  if (cfg.batch == BatchMode::full_batch) {
    theta -= cfg.eta_theta * full_batch_weighted_grad(inst, theta, st.lambda);
    detail::clamp_box(inst.hypothesis, theta);
    return theta;
  }
  // One sequential pass over the shared sample index; shorter splits cycle.
  size_t n_pass = 0;
  for (const auto& split : inst.splits) n_pass = std::max(n_pass, split.samples.size());
  std::vector<const Sample*> tuple(inst.splits.size());
  for (size_t n = 0; n < n_pass; ++n) {
    for (size_t i = 0; i < inst.splits.size(); ++i)
      tuple[i] = &inst.splits[i].samples[n % inst.splits[i].samples.size()];
    Vec g = grad_weighted_loss(inst, theta, st.lambda, tuple);
    theta -= cfg.eta_theta * g;
    detail::clamp_box(inst.hypothesis, theta);
  }
  return theta;
}

inline Vec u_update(const RelaxationCost& h, const SolverState& st, const SolverConfig& cfg) {
  Vec u = st.u - cfg.eta_u * (cost_grad(h, st.u) - st.lambda);
  return u.cwiseMax(0.0);
}

namespace detail {

inline Vec lambda_step(const Vec& lambda, const Vec& constraints, const Vec& u, double eta) {
  Vec next = lambda + eta * (constraints - u);
  return next.cwiseMax(0.0);
}

}  // namespace detail

inline Vec lambda_update(const ProblemInstance& inst, const SolverState& st,
                         const SolverConfig& cfg) {
  detail::check_state_dims(inst, st);
  return detail::lambda_step(st.lambda, eval_constraints(inst, st.theta), st.u, cfg.eta_lambda);
}

inline double equilibrium_residual(const RelaxationCost& h, const SolverState& st) {
  if (st.u.size() == 0) return 0.0;
  return (cost_grad(h, st.u) - st.lambda).cwiseAbs().maxCoeff();
}

// Alternates the theta pass, the u step, and the lambda step; every update in
// an iteration reads the iteration-start state. The constraint vector is
// evaluated once per theta and carried into the next iteration's lambda step.
inline RunResult run(const ProblemInstance& inst, const RelaxationCost& h,
                     const SolverConfig& cfg) {
  validate_instance(inst);
  validate_config(cfg);
  auto t0 = std::chrono::steady_clock::now();
  const ModelFamily& fam = family_of(inst.hypothesis);
  const int m = inst.num_constraints;

  SolverState st;
  st.theta = cfg.theta_init.size() ? cfg.theta_init : init_params(fam, cfg.seed);
  st.u = cfg.u_init.size() ? cfg.u_init : Vec::Zero(m);
  st.lambda = cfg.lambda_init.size() ? cfg.lambda_init : Vec::Zero(m);
  st.t = 0;
  detail::check_state_dims(inst, st);
  detail::clamp_box(inst.hypothesis, st.theta);

  RunResult result;
  Vec c = eval_constraints(inst, st.theta);
  double objective = eval_objective(inst, st.theta);
  double lagrangian = cost_value(h, st.u) + objective + st.lambda.dot(c - st.u);
  const double guard = 1e6 * (std::abs(lagrangian) + 1.0);

  for (int t = 0; t < cfg.max_iters; ++t) {
    Vec theta_next = theta_update(inst, st, cfg);
    Vec u_next = u_update(h, st, cfg);
    Vec lambda_next = detail::lambda_step(st.lambda, c, st.u, cfg.eta_lambda);

    st.theta = std::move(theta_next);
    st.u = std::move(u_next);
    st.lambda = std::move(lambda_next);
    st.t = t + 1;

    c = eval_constraints(inst, st.theta);
    objective = eval_objective(inst, st.theta);
    double residual = equilibrium_residual(h, st);
    lagrangian = cost_value(h, st.u) + objective + st.lambda.dot(c - st.u);
    result.trajectory.push_back({st.t, objective, c, st.u, st.lambda, residual, lagrangian});

    if (!std::isfinite(lagrangian) || !st.theta.allFinite()) {
      result.stop = StopReason::nonfinite;
      break;
    }
    if (std::abs(lagrangian) > guard) {
      result.stop = StopReason::diverged;
      break;
    }
    if (m > 0 && residual <= cfg.tol && (c.array() <= st.u.array() + cfg.tol).all()) {
      result.stop = StopReason::converged;
      break;
    }
  }
  result.state = st;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<TrajectoryPoint>& trajectory, int m) {
  CsvWriter csv(path);
  std::vector<std::string> cols{"t", "objective"};
  for (int i = 1; i <= m; ++i) cols.push_back("c_" + std::to_string(i));
  for (int i = 1; i <= m; ++i) cols.push_back("u_" + std::to_string(i));
  for (int i = 1; i <= m; ++i) cols.push_back("lambda_" + std::to_string(i));
  cols.push_back("residual");
  cols.push_back("lagrangian");
  csv.header(cols);
  for (const auto& p : trajectory) {
    std::vector<std::string> row{fmt_int(p.t), fmt_double(p.objective)};
    for (int i = 0; i < m; ++i) row.push_back(fmt_double(p.constraints[i]));
    for (int i = 0; i < m; ++i) row.push_back(fmt_double(p.u[i]));
    for (int i = 0; i < m; ++i) row.push_back(fmt_double(p.lambda[i]));
    row.push_back(fmt_double(p.residual));
    row.push_back(fmt_double(p.lagrangian));
    csv.line(row);
  }
}

}  // namespace ropt
