#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ropt/types.hpp"

namespace ropt {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const Json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Mat mat_from_json(const Json& rows) {
  if (rows.empty()) return Mat(0, 0);
  Mat m(rows.size(), rows[0].size());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != static_cast<size_t>(m.cols()))
      throw std::runtime_error("matrix: ragged rows");
    for (size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline std::string loss_tag(LossKind k) {
  switch (k) {
    case LossKind::squared: return "squared";
    case LossKind::hinge: return "hinge";
    case LossKind::logistic: return "logistic";
    case LossKind::linear_form: return "linear-form";
    case LossKind::absolute_linear: return "absolute-linear";
    case LossKind::robust_max: return "robust-max";
  }
  throw std::logic_error("unknown loss kind");
}

inline LossKind loss_kind_from_tag(const std::string& tag) {
  if (tag == "squared") return LossKind::squared;
  if (tag == "hinge") return LossKind::hinge;
  if (tag == "logistic") return LossKind::logistic;
  if (tag == "linear-form") return LossKind::linear_form;
  if (tag == "absolute-linear") return LossKind::absolute_linear;
  if (tag == "robust-max") return LossKind::robust_max;
  throw std::runtime_error("tag: unknown loss kind '" + tag + "'");
}

inline std::string family_tag(FamilyKind k) {
  switch (k) {
    case FamilyKind::linear: return "linear";
    case FamilyKind::affine: return "affine";
    case FamilyKind::mlp_tanh: return "mlp-tanh";
  }
  throw std::logic_error("unknown family kind");
}

inline FamilyKind family_kind_from_tag(const std::string& tag) {
  if (tag == "linear") return FamilyKind::linear;
  if (tag == "affine") return FamilyKind::affine;
  if (tag == "mlp-tanh") return FamilyKind::mlp_tanh;
  throw std::runtime_error("family: unknown kind '" + tag + "'");
}

inline Json to_json(const LossSpec& l) {
  Json j;
  j["tag"] = loss_tag(l.kind);
  j["offset"] = l.offset;
  if (l.kind == LossKind::robust_max) {
    j["inner"] = loss_tag(l.inner);
    Json ts = Json::array();
    for (const auto& t : l.transforms) {
      Json tj;
      tj["a"] = detail::mat_to_json(t.a);
      tj["b"] = detail::vec_to_json(t.b);
      ts.push_back(tj);
    }
    j["transforms"] = ts;
  }
  return j;
}

inline LossSpec loss_from_json(const Json& j) {
  LossSpec l;
  l.kind = loss_kind_from_tag(j.at("tag").get<std::string>());
  l.offset = j.value("offset", 0.0);
  if (l.kind == LossKind::robust_max) {
    l.inner = loss_kind_from_tag(j.at("inner").get<std::string>());
    for (const auto& tj : j.at("transforms")) {
      Transform t;
      t.a = detail::mat_from_json(tj.at("a"));
      t.b = detail::vec_from_json(tj.at("b"));
      l.transforms.push_back(std::move(t));
    }
  }
  return l;
}

inline Json to_json(const ModelFamily& f) {
  Json j;
  j["kind"] = family_tag(f.kind);
  j["input_dim"] = f.input_dim;
  j["hidden_dim"] = f.hidden_dim;
  j["output_dim"] = f.output_dim;
  return j;
}

inline ModelFamily family_from_json(const Json& j) {
  ModelFamily f;
  f.kind = family_kind_from_tag(j.at("kind").get<std::string>());
  f.input_dim = j.at("input_dim").get<int>();
  f.hidden_dim = j.value("hidden_dim", 0);
  f.output_dim = j.value("output_dim", 1);
  return f;
}

inline Json to_json(const HypothesisSpace& h) {
  Json j;
  if (const auto* fin = std::get_if<FiniteHypothesis>(&h)) {
    j["kind"] = "finite";
    j["family"] = to_json(fin->family);
    Json ts = Json::array();
    for (const auto& t : fin->thetas) ts.push_back(detail::vec_to_json(t));
    j["thetas"] = ts;
  } else {
    const auto& diff = std::get<DifferentiableHypothesis>(h);
    j["kind"] = "differentiable";
    j["family"] = to_json(diff.family);
    j["box_lo"] = diff.box_lo;
    j["box_hi"] = diff.box_hi;
  }
  return j;
}

inline HypothesisSpace hypothesis_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "finite") {
    FiniteHypothesis fin;
    fin.family = family_from_json(j.at("family"));
    for (const auto& t : j.at("thetas")) fin.thetas.push_back(detail::vec_from_json(t));
    return fin;
  }
  if (kind == "differentiable") {
    DifferentiableHypothesis diff;
    diff.family = family_from_json(j.at("family"));
    diff.box_lo = j.value("box_lo", -std::numeric_limits<double>::infinity());
    diff.box_hi = j.value("box_hi", std::numeric_limits<double>::infinity());
    return diff;
  }
  throw std::runtime_error("hypothesis: unknown kind '" + kind + "'");
}

inline Json to_json(const RelaxationCost& h) {
  Json j;
  switch (h.kind) {
    case CostKind::quadratic:
      j["kind"] = "quadratic";
      j["alpha"] = h.alpha;
      break;
    case CostKind::linear:
      j["kind"] = "linear";
      j["gamma"] = detail::vec_to_json(h.gamma);
      break;
    case CostKind::per_coordinate: {
      j["kind"] = "per-coordinate";
      Json ts = Json::array();
      for (const auto& t : h.terms) {
        Json tj;
        tj["quad"] = t.quad;
        tj["lin"] = t.lin;
        ts.push_back(tj);
      }
      j["terms"] = ts;
      break;
    }
  }
  return j;
}

inline RelaxationCost cost_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "quadratic") return quadratic_cost(j.at("alpha").get<double>());
  if (kind == "linear") return linear_cost(detail::vec_from_json(j.at("gamma")));
  if (kind == "per-coordinate") {
    std::vector<CostTerm> terms;
    for (const auto& tj : j.at("terms"))
      terms.push_back({tj.at("quad").get<double>(), tj.at("lin").get<double>()});
    return per_coordinate_cost(std::move(terms));
  }
  throw std::runtime_error("cost: unknown kind '" + kind + "'");
}

inline Json to_json(const ProblemInstance& inst) {
  Json j;
  j["d"] = inst.dim;
  j["m"] = inst.num_constraints;
  j["loss_bound"] = inst.loss_bound;
  j["objective"] = to_json(inst.objective);
  Json cs = Json::array();
  for (const auto& c : inst.constraints) cs.push_back(to_json(c));
  j["constraints"] = cs;
  j["hypothesis"] = to_json(inst.hypothesis);
  Json splits = Json::array();
  for (const auto& split : inst.splits) {
    Json rows = Json::array();
    for (const auto& s : split.samples) {
      Json sj;
      sj["features"] = detail::vec_to_json(s.x);
      sj["label"] = s.y;
      rows.push_back(sj);
    }
    splits.push_back(rows);
  }
  j["splits"] = splits;
  j["exact_eval"] = inst.exact_eval;
  j["inner_solve"] = inst.inner_solve;
  return j;
}

inline ProblemInstance instance_from_json(const Json& j) {
  ProblemInstance inst;
  inst.dim = j.at("d").get<int>();
  inst.num_constraints = j.at("m").get<int>();
  inst.loss_bound = j.at("loss_bound").get<double>();
  inst.objective = loss_from_json(j.at("objective"));
  for (const auto& cj : j.at("constraints")) inst.constraints.push_back(loss_from_json(cj));
  inst.hypothesis = hypothesis_from_json(j.at("hypothesis"));
  for (const auto& rows : j.at("splits")) {
    DatasetSplit split;
    for (const auto& sj : rows) {
      Sample s;
      s.x = detail::vec_from_json(sj.at("features"));
      s.y = sj.at("label").get<double>();
      split.samples.push_back(std::move(s));
    }
    inst.splits.push_back(std::move(split));
  }
  inst.exact_eval = j.value("exact_eval", std::string{});
  inst.inner_solve = j.value("inner_solve", std::string{});
  validate_instance(inst);
  return inst;
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("json: cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("json: cannot open '" + path + "'");
  return Json::parse(in);
}

}  // namespace ropt
