#pragma once

#include <functional>
#include <map>
#include <string>

#include "ropt/types.hpp"

namespace ropt {

// Closed-form population means for instances that have them.
struct ExactMoments {
  double objective = 0.0;
  Vec constraints;
};

using ExactEvalFn = std::function<ExactMoments(const ProblemInstance&, const Vec&)>;

// Exact solve of: min objective(theta) s.t. constraints(theta) <= u,
// available for low-dimensional instances with closed-form structure.
struct InnerSolution {
  bool feasible = false;
  double value = 0.0;
  Vec theta;
};

using InnerSolveFn = std::function<InnerSolution(const ProblemInstance&, const Vec&)>;

inline std::map<std::string, ExactEvalFn>& exact_eval_registry() {
  static std::map<std::string, ExactEvalFn> reg;
  return reg;
}

inline std::map<std::string, InnerSolveFn>& inner_solve_registry() {
  static std::map<std::string, InnerSolveFn> reg;
  return reg;
}

inline void register_exact_eval(const std::string& tag, ExactEvalFn fn) {
  exact_eval_registry()[tag] = std::move(fn);
}

inline void register_inner_solve(const std::string& tag, InnerSolveFn fn) {
  inner_solve_registry()[tag] = std::move(fn);
}

inline const ExactEvalFn& find_exact_eval(const std::string& tag) {
  auto& reg = exact_eval_registry();
  auto it = reg.find(tag);
  if (it == reg.end()) throw std::runtime_error("exact_eval: unknown tag '" + tag + "'");
  return it->second;
}

inline const InnerSolveFn& find_inner_solve(const std::string& tag) {
  auto& reg = inner_solve_registry();
  auto it = reg.find(tag);
  if (it == reg.end()) throw std::runtime_error("inner_solve: unknown tag '" + tag + "'");
  return it->second;
}

}  // namespace ropt
