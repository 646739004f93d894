#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ropt/model.hpp"
#include "ropt/registry.hpp"
#include "ropt/types.hpp"

namespace ropt {

namespace detail {

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline void require_scalar_output(const Vec& pred) {
  if (pred.size() != 1)
    throw std::invalid_argument("loss: scalar losses need output dimension 1");
}

// Raw loss before the offset is subtracted; robust-max handled by callers.
inline double raw_loss(LossKind kind, const Vec& pred, double y) {
  switch (kind) {
    case LossKind::squared:
      require_scalar_output(pred);
      return (pred[0] - y) * (pred[0] - y);
    case LossKind::hinge:
      require_scalar_output(pred);
      return std::max(0.0, 1.0 - y * pred[0]);
    case LossKind::logistic: {
      if (pred.size() == 1) return softplus(-y * pred[0]);
      const auto k = static_cast<Eigen::Index>(y);
      if (k < 0 || k >= pred.size()) throw std::invalid_argument("label: class index out of range");
      double mx = pred.maxCoeff();
      double lse = std::log((pred.array() - mx).exp().sum()) + mx;
      return lse - pred[k];
    }
    case LossKind::linear_form:
      require_scalar_output(pred);
      return y * pred[0];
    case LossKind::absolute_linear:
      require_scalar_output(pred);
      return std::abs(pred[0]);
    case LossKind::robust_max:
      throw std::logic_error("raw_loss: robust-max resolved by its caller");
  }
  throw std::logic_error("unknown loss kind");
}

// d(raw_loss)/d(pred); the hinge kink at margin 1 and the absolute-value kink
// at 0 both take the zero branch.
inline Vec raw_loss_grad(LossKind kind, const Vec& pred, double y) {
  switch (kind) {
    case LossKind::squared:
      require_scalar_output(pred);
      return Vec::Constant(1, 2.0 * (pred[0] - y));
    case LossKind::hinge:
      require_scalar_output(pred);
      return Vec::Constant(1, 1.0 - y * pred[0] > 0.0 ? -y : 0.0);
    case LossKind::logistic: {
      if (pred.size() == 1) return Vec::Constant(1, -y * sigmoid(-y * pred[0]));
      const auto k = static_cast<Eigen::Index>(y);
      if (k < 0 || k >= pred.size()) throw std::invalid_argument("label: class index out of range");
      double mx = pred.maxCoeff();
      Vec p = (pred.array() - mx).exp();
      p /= p.sum();
      p[k] -= 1.0;
      return p;
    }
    case LossKind::linear_form:
      require_scalar_output(pred);
      return Vec::Constant(1, y);
    case LossKind::absolute_linear:
      require_scalar_output(pred);
      return Vec::Constant(1, pred[0] > 0.0 ? 1.0 : (pred[0] < 0.0 ? -1.0 : 0.0));
    case LossKind::robust_max:
      throw std::logic_error("raw_loss_grad: robust-max resolved by its caller");
  }
  throw std::logic_error("unknown loss kind");
}

inline Vec apply_transform(const Transform& t, const Vec& x) {
  Vec out = t.a * x;
  if (t.b.size() > 0) out += t.b;
  return out;
}

// Index of the transform maximizing the inner raw loss (lowest index on ties).
inline size_t robust_argmax(const LossSpec& l, const ModelFamily& f, const Vec& theta,
                            const Sample& s) {
  size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (size_t g = 0; g < l.transforms.size(); ++g) {
    double v = raw_loss(l.inner, predict(f, theta, apply_transform(l.transforms[g], s.x)), s.y);
    if (v > best_val) {
      best_val = v;
      best = g;
    }
  }
  return best;
}

}  // namespace detail

inline double loss_value(const LossSpec& l, const ModelFamily& f, const Vec& theta,
                         const Sample& s) {
  if (l.kind == LossKind::robust_max) {
    if (l.transforms.empty()) throw std::invalid_argument("transforms: robust-max needs at least one");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& t : l.transforms)
      best = std::max(best,
                      detail::raw_loss(l.inner, predict(f, theta, detail::apply_transform(t, s.x)), s.y));
    return best - l.offset;
  }
  return detail::raw_loss(l.kind, predict(f, theta, s.x), s.y) - l.offset;
}

// Accumulates w * d(loss)/d(theta) into g; offsets do not affect gradients.
inline void accumulate_loss_grad(const LossSpec& l, const ModelFamily& f, const Vec& theta,
                                 const Sample& s, double w, Vec& g) {
  if (l.kind == LossKind::robust_max) {
    if (l.transforms.empty()) throw std::invalid_argument("transforms: robust-max needs at least one");
    Vec xt = detail::apply_transform(l.transforms[detail::robust_argmax(l, f, theta, s)], s.x);
    Vec df = detail::raw_loss_grad(l.inner, predict(f, theta, xt), s.y);
    accumulate_param_grad(f, theta, xt, df, w, g);
    return;
  }
  Vec df = detail::raw_loss_grad(l.kind, predict(f, theta, s.x), s.y);
  accumulate_param_grad(f, theta, s.x, df, w, g);
}

inline double mean_loss(const LossSpec& l, const ModelFamily& f, const Vec& theta,
                        const std::vector<Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("samples: mean over an empty set");
  double s = 0.0;
  for (const auto& smp : samples) s += loss_value(l, f, theta, smp);
  return s / static_cast<double>(samples.size());
}

inline double eval_objective(const ProblemInstance& inst, const Vec& theta) {
  if (!inst.exact_eval.empty()) return find_exact_eval(inst.exact_eval)(inst, theta).objective;
  const ModelFamily& fam = family_of(inst.hypothesis);
  const auto& samples = inst.splits[0].samples;
  double s = 0.0;
  for (const auto& smp : samples) s += loss_value(inst.objective, fam, theta, smp);
  return s / static_cast<double>(samples.size());
}

inline Vec eval_constraints(const ProblemInstance& inst, const Vec& theta) {
  if (!inst.exact_eval.empty()) {
    Vec c = find_exact_eval(inst.exact_eval)(inst, theta).constraints;
    if (c.size() != inst.num_constraints)
      throw std::runtime_error("exact_eval: constraint vector length mismatch");
    return c;
  }
  const ModelFamily& fam = family_of(inst.hypothesis);
  Vec c(inst.num_constraints);
  for (int i = 0; i < inst.num_constraints; ++i) {
    const auto& samples = inst.splits[static_cast<size_t>(i) + 1].samples;
    double s = 0.0;
    for (const auto& smp : samples) s += loss_value(inst.constraints[i], fam, theta, smp);
    c[i] = s / static_cast<double>(samples.size());
  }
  return c;
}

// Gradient of eval_objective + w' eval_constraints (per-split means).
inline Vec full_batch_weighted_grad(const ProblemInstance& inst, const Vec& theta, const Vec& w) {
  if (w.size() != inst.num_constraints)
    throw std::invalid_argument("weights: length must equal num_constraints");
  const ModelFamily& fam = family_of(inst.hypothesis);
  Vec g = Vec::Zero(param_count(fam));
  const auto& obj_samples = inst.splits[0].samples;
  double w0 = 1.0 / static_cast<double>(obj_samples.size());
  for (const auto& s : obj_samples) accumulate_loss_grad(inst.objective, fam, theta, s, w0, g);
  for (int i = 0; i < inst.num_constraints; ++i) {
    if (w[i] == 0.0) continue;
    const auto& samples = inst.splits[static_cast<size_t>(i) + 1].samples;
    double wi = w[i] / static_cast<double>(samples.size());
    for (const auto& s : samples) accumulate_loss_grad(inst.constraints[i], fam, theta, s, wi, g);
  }
  return g;
}

// Gradient of ell_0 + sum_i lambda_i ell_i at one sample per split.
inline Vec grad_weighted_loss(const ProblemInstance& inst, const Vec& theta, const Vec& lambda,
                              const std::vector<const Sample*>& tuple) {
  if (lambda.size() != inst.num_constraints)
    throw std::invalid_argument("lambda: length must equal num_constraints");
  if (tuple.size() != inst.splits.size())
    throw std::invalid_argument("tuple: need one sample per split");
  const ModelFamily& fam = family_of(inst.hypothesis);
  Vec g = Vec::Zero(param_count(fam));
  accumulate_loss_grad(inst.objective, fam, theta, *tuple[0], 1.0, g);
  for (int i = 0; i < inst.num_constraints; ++i)
    accumulate_loss_grad(inst.constraints[i], fam, theta, *tuple[static_cast<size_t>(i) + 1],
                         lambda[i], g);
  return g;
}

}  // namespace ropt
