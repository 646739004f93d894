#pragma once

#include <Eigen/Core>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ropt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Sample {
  Vec x;
  double y = 0.0;  // regression target, margin label, or class index
};

struct DatasetSplit {
  std::vector<Sample> samples;
};

enum class LossKind { squared, hinge, logistic, linear_form, absolute_linear, robust_max };

// Input map x -> a*x + b applied before prediction.
struct Transform {
  Mat a;
  Vec b;
};

struct LossSpec {
  LossKind kind = LossKind::squared;
  double offset = 0.0;  // evaluated loss is raw(kind) - offset
  LossKind inner = LossKind::logistic;    // robust_max only
  std::vector<Transform> transforms;      // robust_max only, at least one
};

inline LossSpec simple_loss(LossKind kind, double offset) {
  LossSpec l;
  l.kind = kind;
  l.offset = offset;
  return l;
}

enum class FamilyKind { linear, affine, mlp_tanh };

struct ModelFamily {
  FamilyKind kind = FamilyKind::linear;
  int input_dim = 1;
  int hidden_dim = 0;  // mlp_tanh only
  int output_dim = 1;
};

inline int param_count(const ModelFamily& f) {
  switch (f.kind) {
    case FamilyKind::linear:
      return f.output_dim * f.input_dim;
    case FamilyKind::affine:
      return f.output_dim * f.input_dim + f.output_dim;
    case FamilyKind::mlp_tanh:
      return f.hidden_dim * f.input_dim + f.hidden_dim +
             f.output_dim * f.hidden_dim + f.output_dim;
  }
  throw std::logic_error("unknown model family");
}

struct FiniteHypothesis {
  ModelFamily family;
  std::vector<Vec> thetas;
};

struct DifferentiableHypothesis {
  ModelFamily family;
  double box_lo = -std::numeric_limits<double>::infinity();
  double box_hi = std::numeric_limits<double>::infinity();
};

using HypothesisSpace = std::variant<FiniteHypothesis, DifferentiableHypothesis>;

inline const ModelFamily& family_of(const HypothesisSpace& space) {
  if (const auto* f = std::get_if<FiniteHypothesis>(&space)) return f->family;
  return std::get<DifferentiableHypothesis>(space).family;
}

// Candidate list of a finite hypothesis space, in declaration order.
inline const std::vector<Vec>& enumerate_finite(const HypothesisSpace& space) {
  const auto* f = std::get_if<FiniteHypothesis>(&space);
  if (f == nullptr) throw std::invalid_argument("hypothesis: not a finite space");
  return f->thetas;
}

// Relaxation price h(u): convex, differentiable, h(0)=0, nondecreasing
// componentwise on the nonnegative orthant.
enum class CostKind { quadratic, linear, per_coordinate };

struct CostTerm {
  double quad = 0.0;  // contributes quad*u^2
  double lin = 0.0;   // contributes lin*u
};

struct RelaxationCost {
  CostKind kind = CostKind::quadratic;
  double alpha = 1.0;           // quadratic: alpha*||u||^2
  Vec gamma;                    // linear: gamma'u
  std::vector<CostTerm> terms;  // per_coordinate: sum_i quad_i*u_i^2 + lin_i*u_i
};

inline RelaxationCost quadratic_cost(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha: must be > 0");
  RelaxationCost h;
  h.kind = CostKind::quadratic;
  h.alpha = alpha;
  return h;
}

inline RelaxationCost linear_cost(Vec gamma) {
  if ((gamma.array() < 0.0).any()) throw std::invalid_argument("gamma: must be nonnegative");
  RelaxationCost h;
  h.kind = CostKind::linear;
  h.gamma = std::move(gamma);
  return h;
}

inline RelaxationCost per_coordinate_cost(std::vector<CostTerm> terms) {
  for (const auto& t : terms)
    if (t.quad < 0.0 || t.lin < 0.0)
      throw std::invalid_argument("terms: coefficients must be nonnegative");
  RelaxationCost h;
  h.kind = CostKind::per_coordinate;
  h.terms = std::move(terms);
  return h;
}

inline void check_cost_dim(const RelaxationCost& h, const Vec& u) {
  if ((u.array() < 0.0).any())
    throw std::invalid_argument("u: components must be nonnegative");
  if (h.kind == CostKind::linear && u.size() != h.gamma.size())
    throw std::invalid_argument("u: length must match gamma");
  if (h.kind == CostKind::per_coordinate && static_cast<size_t>(u.size()) != h.terms.size())
    throw std::invalid_argument("u: length must match terms");
}

inline double cost_value(const RelaxationCost& h, const Vec& u) {
  check_cost_dim(h, u);
  switch (h.kind) {
    case CostKind::quadratic:
      return h.alpha * u.squaredNorm();
    case CostKind::linear:
      return h.gamma.dot(u);
    case CostKind::per_coordinate: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < u.size(); ++i)
        s += h.terms[i].quad * u[i] * u[i] + h.terms[i].lin * u[i];
      return s;
    }
  }
  throw std::logic_error("unknown cost kind");
}

inline Vec cost_grad(const RelaxationCost& h, const Vec& u) {
  check_cost_dim(h, u);
  switch (h.kind) {
    case CostKind::quadratic:
      return 2.0 * h.alpha * u;
    case CostKind::linear:
      return h.gamma;
    case CostKind::per_coordinate: {
      Vec g(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i)
        g[i] = 2.0 * h.terms[i].quad * u[i] + h.terms[i].lin;
      return g;
    }
  }
  throw std::logic_error("unknown cost kind");
}

// Largest mu with h(v) >= h(u) + grad(u)'(v-u) + mu*||v-u||^2.
inline double cost_strong_convexity(const RelaxationCost& h) {
  switch (h.kind) {
    case CostKind::quadratic:
      return h.alpha;
    case CostKind::linear:
      return 0.0;
    case CostKind::per_coordinate: {
      double mu = std::numeric_limits<double>::infinity();
      for (const auto& t : h.terms) mu = std::min(mu, t.quad);
      return h.terms.empty() ? 0.0 : mu;
    }
  }
  throw std::logic_error("unknown cost kind");
}

struct ProblemInstance {
  int dim = 1;              // feature dimension d
  int num_constraints = 0;  // m
  std::vector<DatasetSplit> splits;  // m+1 splits; index 0 is the objective
  LossSpec objective;
  std::vector<LossSpec> constraints;  // length m
  HypothesisSpace hypothesis;
  double loss_bound = 1.0;  // declared bound B on every per-sample loss
  std::string exact_eval;   // registry tag: closed-form expectations (optional)
  std::string inner_solve;  // registry tag: low-dimensional relaxed solve (optional)
};

inline void validate_instance(const ProblemInstance& inst) {
  if (inst.dim < 1) throw std::invalid_argument("dim: must be >= 1");
  if (inst.num_constraints < 0) throw std::invalid_argument("num_constraints: must be >= 0");
  if (inst.splits.size() != static_cast<size_t>(inst.num_constraints) + 1)
    throw std::invalid_argument("splits: need one split per constraint plus the objective");
  if (inst.constraints.size() != static_cast<size_t>(inst.num_constraints))
    throw std::invalid_argument("constraints: length must equal num_constraints");
  if (!(inst.loss_bound > 0.0)) throw std::invalid_argument("loss_bound: must be > 0");
  for (size_t i = 0; i < inst.splits.size(); ++i) {
    if (inst.splits[i].samples.empty())
      throw std::invalid_argument("splits: split " + std::to_string(i) + " is empty");
    for (const auto& s : inst.splits[i].samples)
      if (s.x.size() != inst.dim)
        throw std::invalid_argument("splits: sample dimension mismatch in split " +
                                    std::to_string(i));
  }
  auto check_loss = [](const LossSpec& l) {
    if (l.kind == LossKind::robust_max && l.transforms.empty())
      throw std::invalid_argument("transforms: robust-max needs at least one");
  };
  check_loss(inst.objective);
  for (const auto& c : inst.constraints) check_loss(c);
  const ModelFamily& fam = family_of(inst.hypothesis);
  if (fam.input_dim != inst.dim)
    throw std::invalid_argument("hypothesis: family input_dim must equal dim");
  if (const auto* fin = std::get_if<FiniteHypothesis>(&inst.hypothesis)) {
    if (fin->thetas.empty()) throw std::invalid_argument("hypothesis: finite set is empty");
    for (const auto& t : fin->thetas)
      if (t.size() != param_count(fam))
        throw std::invalid_argument("hypothesis: parameter vector length mismatch");
  }
}

}  // namespace ropt
