#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropt/csv.hpp"
#include "ropt/evaluate.hpp"
#include "ropt/parallel.hpp"
#include "ropt/random.hpp"
#include "ropt/registry.hpp"
#include "ropt/types.hpp"

namespace ropt {

struct PerturbationValue {
  bool feasible = false;
  double value = 0.0;
  int index = -1;  // enumeration index of the argmin (lowest on ties)
};

// Minimum objective over the enumerated hypotheses whose constraint vector is
// componentwise <= u.
inline PerturbationValue perturbation_value_finite(const ProblemInstance& inst, const Vec& u) {
  const auto* fin = std::get_if<FiniteHypothesis>(&inst.hypothesis);
  if (!fin) throw std::invalid_argument("hypothesis: finite enumeration required");
  if (u.size() != inst.num_constraints)
    throw std::invalid_argument("u: length must equal num_constraints");
  PerturbationValue best;
  for (size_t k = 0; k < fin->thetas.size(); ++k) {
    Vec c = eval_constraints(inst, fin->thetas[k]);
    if ((c.array() > u.array()).any()) continue;
    double v = eval_objective(inst, fin->thetas[k]);
    if (!best.feasible || v < best.value) {
      best.feasible = true;
      best.value = v;
      best.index = static_cast<int>(k);
    }
  }
  return best;
}

struct PerturbationGrid {
  std::vector<std::vector<double>> axes;  // one sorted ascending axis per constraint
  std::vector<int> shape;                 // axis sizes; last axis varies fastest
  std::vector<double> values;             // flat tensor of minimum objectives
  std::vector<char> feasible;             // flat tensor of feasibility flags
  std::vector<std::vector<double>> subgrad;  // per axis: central differences, NaN where undefined

  size_t cell_count() const {
    size_t n = 1;
    for (int s : shape) n *= static_cast<size_t>(s);
    return n;
  }

  std::vector<int> coords(size_t flat) const {
    std::vector<int> c(shape.size());
    for (size_t j = shape.size(); j-- > 0;) {
      c[j] = static_cast<int>(flat % static_cast<size_t>(shape[j]));
      flat /= static_cast<size_t>(shape[j]);
    }
    return c;
  }

  size_t flat(const std::vector<int>& c) const {
    size_t f = 0;
    for (size_t j = 0; j < shape.size(); ++j) f = f * static_cast<size_t>(shape[j]) + static_cast<size_t>(c[j]);
    return f;
  }

  Vec point(size_t flat_index) const {
    auto c = coords(flat_index);
    Vec u(static_cast<Eigen::Index>(axes.size()));
    for (size_t j = 0; j < axes.size(); ++j) u[static_cast<Eigen::Index>(j)] = axes[j][static_cast<size_t>(c[j])];
    return u;
  }
};

inline PerturbationGrid build_perturbation_grid(const ProblemInstance& inst,
                                                const std::vector<std::vector<double>>& axes) {
  if (axes.size() != static_cast<size_t>(inst.num_constraints))
    throw std::invalid_argument("axes: need one axis per constraint");
  for (const auto& axis : axes) {
    if (axis.empty()) throw std::invalid_argument("axes: empty axis");
    for (size_t k = 1; k < axis.size(); ++k)
      if (!(axis[k] > axis[k - 1])) throw std::invalid_argument("axes: must be sorted ascending");
  }
  const bool finite_space = std::holds_alternative<FiniteHypothesis>(inst.hypothesis);
  if (!finite_space && inst.inner_solve.empty())
    throw std::invalid_argument("hypothesis: grid needs a finite space or a registered inner solve");
  const InnerSolveFn* solve = finite_space ? nullptr : &find_inner_solve(inst.inner_solve);

  PerturbationGrid grid;
  grid.axes = axes;
  for (const auto& axis : axes) grid.shape.push_back(static_cast<int>(axis.size()));
  size_t n = grid.cell_count();
  grid.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  grid.feasible.assign(n, 0);

  parallel_for(n, [&](size_t cell) {
    Vec u = grid.point(cell);
    if (finite_space) {
      PerturbationValue pv = perturbation_value_finite(inst, u);
      grid.feasible[cell] = pv.feasible ? 1 : 0;
      if (pv.feasible) grid.values[cell] = pv.value;
    } else {
      InnerSolution sol = (*solve)(inst, u);
      grid.feasible[cell] = sol.feasible ? 1 : 0;
      if (sol.feasible) grid.values[cell] = sol.value;
    }
  });

  grid.subgrad.assign(axes.size(), std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
  for (size_t cell = 0; cell < n; ++cell) {
    if (!grid.feasible[cell]) continue;
    auto c = grid.coords(cell);
    for (size_t j = 0; j < axes.size(); ++j) {
      if (c[j] == 0 || c[j] + 1 >= grid.shape[j]) continue;
      auto lo = c, hi = c;
      --lo[j];
      ++hi[j];
      size_t fl = grid.flat(lo), fh = grid.flat(hi);
      if (!grid.feasible[fl] || !grid.feasible[fh]) continue;
      double dx = axes[j][static_cast<size_t>(c[j]) + 1] - axes[j][static_cast<size_t>(c[j]) - 1];
      grid.subgrad[j][cell] = (grid.values[fh] - grid.values[fl]) / dx;
    }
  }
  return grid;
}

// Central finite-difference estimate at a grid point with finite neighbors.
inline Vec fd_subgradient(const PerturbationGrid& grid, const Vec& u) {
  if (u.size() != static_cast<Eigen::Index>(grid.axes.size()))
    throw std::invalid_argument("u: length must match grid axes");
  std::vector<int> c(grid.axes.size());
  for (size_t j = 0; j < grid.axes.size(); ++j) {
    const auto& axis = grid.axes[j];
    int found = -1;
    for (size_t k = 0; k < axis.size(); ++k)
      if (std::abs(axis[k] - u[static_cast<Eigen::Index>(j)]) <= 1e-12) {
        found = static_cast<int>(k);
        break;
      }
    if (found < 0) throw std::invalid_argument("u: not a grid point");
    if (found == 0 || found + 1 >= grid.shape[j])
      throw std::invalid_argument("u: boundary grid point");
    c[j] = found;
  }
  size_t cell = grid.flat(c);
  Vec g(static_cast<Eigen::Index>(grid.axes.size()));
  for (size_t j = 0; j < grid.axes.size(); ++j) {
    double v = grid.subgrad[j][cell];
    if (std::isnan(v)) throw std::invalid_argument("u: neighbors along an axis are infeasible");
    g[static_cast<Eigen::Index>(j)] = v;
  }
  return g;
}

// Objective plus relaxation price of the positive constraint parts: for
// separable componentwise-increasing h the inner minimum over u is closed-form.
inline double resilient_value_finite(const ProblemInstance& inst, const RelaxationCost& h,
                                     const Vec& theta) {
  Vec c = eval_constraints(inst, theta);
  return eval_objective(inst, theta) + cost_value(h, c.cwiseMax(0.0));
}

struct ResilientSolution {
  Vec theta;
  Vec u;
  double value = 0.0;
  int index = -1;  // finite spaces only
};

namespace detail {

inline ResilientSolution resilient_scan_1d(const ProblemInstance& inst, const RelaxationCost& h) {
  const auto& diff = std::get<DifferentiableHypothesis>(inst.hypothesis);
  if (param_count(diff.family) != 1)
    throw std::invalid_argument("hypothesis: differentiable brute force supports one parameter");
  if (!std::isfinite(diff.box_lo) || !std::isfinite(diff.box_hi))
    throw std::invalid_argument("hypothesis: brute force needs finite box bounds");
  auto value_at = [&](double t) {
    return resilient_value_finite(inst, h, Vec::Constant(1, t));
  };
  const int steps = 4000;
  double lo = diff.box_lo, hi = diff.box_hi;
  double best_t = lo, best_v = value_at(lo);
  for (int k = 1; k <= steps; ++k) {
    double t = lo + (hi - lo) * static_cast<double>(k) / steps;
    double v = value_at(t);
    if (v < best_v) {
      best_v = v;
      best_t = t;
    }
  }
  double span = (hi - lo) / steps;
  double a = std::max(lo, best_t - span), b = std::min(hi, best_t + span);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = value_at(x1), f2 = value_at(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = value_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = value_at(x2);
    }
  }
  double t_star = f1 <= f2 ? x1 : x2;
  ResilientSolution sol;
  sol.theta = Vec::Constant(1, t_star);
  sol.u = eval_constraints(inst, sol.theta).cwiseMax(0.0);
  sol.value = resilient_value_finite(inst, h, sol.theta);
  return sol;
}

}  // namespace detail

inline ResilientSolution resilient_brute_force(const ProblemInstance& inst,
                                               const RelaxationCost& h) {
  if (const auto* fin = std::get_if<FiniteHypothesis>(&inst.hypothesis)) {
    ResilientSolution best;
    for (size_t k = 0; k < fin->thetas.size(); ++k) {
      double v = resilient_value_finite(inst, h, fin->thetas[k]);
      if (best.index < 0 || v < best.value) {
        best.value = v;
        best.index = static_cast<int>(k);
        best.theta = fin->thetas[k];
      }
    }
    best.u = eval_constraints(inst, best.theta).cwiseMax(0.0);
    return best;
  }
  return detail::resilient_scan_1d(inst, h);
}

// Full-batch adaptive-step descent on objective + gamma' constraints.
inline Vec penalty_reference_solve(const ProblemInstance& inst, const Vec& gamma, int steps,
                                   std::uint64_t seed) {
  if (!std::holds_alternative<DifferentiableHypothesis>(inst.hypothesis))
    throw std::invalid_argument("hypothesis: penalty reference needs a differentiable space");
  if ((gamma.array() < 0.0).any()) throw std::invalid_argument("gamma: must be nonnegative");
  const ModelFamily& fam = family_of(inst.hypothesis);
  Vec theta = init_params(fam, seed);
  auto value_at = [&](const Vec& t) {
    return eval_objective(inst, t) + gamma.dot(eval_constraints(inst, t));
  };
  double value = value_at(theta);
  const double guard = 1e6 * (std::abs(value) + 1.0);
  double step = 0.1;
  for (int k = 0; k < steps; ++k) {
    Vec g = full_batch_weighted_grad(inst, theta, gamma);
    Vec trial = theta - step * g;
    const auto& diff = std::get<DifferentiableHypothesis>(inst.hypothesis);
    if (std::isfinite(diff.box_lo)) trial = trial.cwiseMax(diff.box_lo);
    if (std::isfinite(diff.box_hi)) trial = trial.cwiseMin(diff.box_hi);
    double trial_value = value_at(trial);
    if (!std::isfinite(trial_value) || std::abs(trial_value) > guard)
      throw std::runtime_error("penalty_reference_solve: diverged");
    if (trial_value <= value + 1e-12) {
      theta = std::move(trial);
      value = trial_value;
      step *= 1.05;
    } else {
      step *= 0.5;
      if (step < 1e-14) break;
    }
  }
  return theta;
}

struct GapBoundInputs {
  Vec lambda_star;
  Vec u;
  double L_eps = 0.0;
  RelaxationCost h;
};

struct GapBounds {
  double d_rsl = 0.0;
  double d_csl = 0.0;
};

inline GapBounds gap_bounds(const GapBoundInputs& in) {
  if (in.lambda_star.size() != in.u.size())
    throw std::invalid_argument("lambda_star: length must match u");
  if (!(in.L_eps > 0.0)) throw std::invalid_argument("L_eps: must be > 0");
  Vec shifted = in.u.array() + in.L_eps;
  Vec grad = cost_grad(in.h, shifted);
  if ((grad - in.lambda_star).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("lambda_star: must equal the cost gradient at u + L_eps");
  GapBounds out;
  out.d_csl = in.lambda_star.lpNorm<1>() * in.L_eps + in.L_eps;
  out.d_rsl = cost_value(in.h, shifted) - cost_value(in.h, in.u) + in.L_eps;
  return out;
}

struct GapBoundSweep {
  int draws = 0;
  int ordering_violations = 0;         // d_rsl > d_csl
  int quadratic_margin_violations = 0; // d_csl - d_rsl < mu * L_eps^2 on quadratic costs
};

// Randomized stress of the two gap bounds across cost kinds and dimensions.
inline GapBoundSweep run_gap_bound_draws(int draws, std::uint64_t seed) {
  GapBoundSweep sweep;
  sweep.draws = draws;
  for (int k = 0; k < draws; ++k) {
    auto g = make_engine(stream_seed(seed, static_cast<std::uint64_t>(k)));
    int m = 1 + static_cast<int>(g() % 4);
    RelaxationCost h;
    switch (k % 3) {
      case 0:
        h = quadratic_cost(uniform_real(g, 0.05, 3.0));
        break;
      case 1: {
        Vec gamma(m);
        for (int i = 0; i < m; ++i) gamma[i] = uniform_real(g, 0.0, 2.0);
        h = linear_cost(gamma);
        break;
      }
      default: {
        std::vector<CostTerm> terms;
        for (int i = 0; i < m; ++i)
          terms.push_back({uniform_real(g, 0.05, 2.0), uniform_real(g, 0.0, 1.0)});
        h = per_coordinate_cost(terms);
        break;
      }
    }
    GapBoundInputs in;
    in.h = h;
    in.u = Vec(m);
    for (int i = 0; i < m; ++i) in.u[i] = uniform_real(g, 0.0, 2.0);
    in.L_eps = uniform_real(g, 0.01, 1.5);
    in.lambda_star = cost_grad(h, Vec(in.u.array() + in.L_eps));
    GapBounds b = gap_bounds(in);
    if (b.d_rsl > b.d_csl + 1e-12) ++sweep.ordering_violations;
    if (h.kind == CostKind::quadratic) {
      double mu = cost_strong_convexity(h);
      if (b.d_csl - b.d_rsl + 1e-9 < mu * in.L_eps * in.L_eps)
        ++sweep.quadratic_margin_violations;
    }
  }
  return sweep;
}

struct NestedMinimum {
  double value = 0.0;
  Vec u;
};

// min over grid points of grid value + h(u): the two-level reading of the
// relaxed problem, compared against the joint solve in tests.
inline NestedMinimum nested_grid_minimum(const PerturbationGrid& grid, const RelaxationCost& h) {
  NestedMinimum best;
  bool found = false;
  for (size_t cell = 0; cell < grid.cell_count(); ++cell) {
    if (!grid.feasible[cell]) continue;
    Vec u = grid.point(cell);
    double v = grid.values[cell] + cost_value(h, u);
    if (!found || v < best.value) {
      found = true;
      best.value = v;
      best.u = u;
    }
  }
  if (!found) throw std::runtime_error("grid: no feasible cell");
  return best;
}

inline void write_grid_csv(const std::string& path, const PerturbationGrid& grid) {
  CsvWriter csv(path);
  const size_t m = grid.axes.size();
  std::vector<std::string> cols;
  for (size_t j = 1; j <= m; ++j) cols.push_back("u_" + std::to_string(j));
  cols.push_back("value");
  cols.push_back("feasible");
  for (size_t j = 1; j <= m; ++j) cols.push_back("subgrad_" + std::to_string(j));
  csv.header(cols);
  for (size_t cell = 0; cell < grid.cell_count(); ++cell) {
    Vec u = grid.point(cell);
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < u.size(); ++j) row.push_back(fmt_double(u[j]));
    row.push_back(grid.feasible[cell] ? fmt_double(grid.values[cell]) : "inf");
    row.push_back(grid.feasible[cell] ? "1" : "0");
    for (size_t j = 0; j < m; ++j) {
      double s = grid.subgrad[j][cell];
      row.push_back(std::isnan(s) ? "" : fmt_double(s));
    }
    csv.line(row);
  }
}

}  // namespace ropt
