// Shared helpers for the test suite: temporary directories, CLI invocation,
// finite-difference oracles, and a tiny 1-D instance whose relaxed value
// curve has a closed form.
#pragma once

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ropt/evaluate.hpp"
#include "ropt/types.hpp"

namespace testutil {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ropt-test-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    char* got = mkdtemp(buf.data());
    if (got == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = got;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return (std::filesystem::path(path_) / name).string(); }

 private:
  std::string path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string first_line(const std::string& text) {
  auto pos = text.find('\n');
  return pos == std::string::npos ? text : text.substr(0, pos);
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

#ifdef RESILIENT_OPT_CLI_PATH
// Runs the installed CLI binary with the given argument string, capturing
// stdout/stderr through redirect files inside `dir`.
inline CliResult run_cli(const TempDir& dir, const std::string& args,
                         const std::string& env_prefix = "") {
  std::string out_path = dir.file("stdout.txt");
  std::string err_path = dir.file("stderr.txt");
  std::string cmd = env_prefix + " \"" RESILIENT_OPT_CLI_PATH "\" " + args + " > \"" + out_path +
                    "\" 2> \"" + err_path + "\"";
  int raw = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}
#endif

// Central finite difference of a per-sample loss with respect to theta.
inline ropt::Vec fd_loss_grad(const ropt::LossSpec& l, const ropt::ModelFamily& f,
                              const ropt::Vec& theta, const ropt::Sample& s,
                              double eps = 1e-6) {
  ropt::Vec g(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    ropt::Vec hi = theta, lo = theta;
    hi[j] += eps;
    lo[j] -= eps;
    g[j] = (ropt::loss_value(l, f, hi, s) - ropt::loss_value(l, f, lo, s)) / (2.0 * eps);
  }
  return g;
}

// Central finite difference of a relaxation cost.
inline ropt::Vec fd_cost_grad(const ropt::RelaxationCost& h, const ropt::Vec& u,
                              double eps = 1e-6) {
  ropt::Vec g(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    ropt::Vec hi = u, lo = u;
    hi[j] += eps;
    lo[j] = std::max(0.0, lo[j] - eps);
    g[j] = (ropt::cost_value(h, hi) - ropt::cost_value(h, lo)) / (hi[j] - lo[j]);
  }
  return g;
}

// One objective sample (theta - 1)^2 and one constraint sample theta^2 <= u,
// both through a 1-D linear model. The minimum objective at relaxation u is
// (1 - sqrt(u))^2 for u <= 1 and 0 beyond, so every grid quantity has a
// closed form to compare against.
inline ropt::ProblemInstance make_sqrt_instance() {
  using namespace ropt;
  ProblemInstance inst;
  inst.dim = 1;
  inst.num_constraints = 1;
  inst.hypothesis.emplace<DifferentiableHypothesis>(
      DifferentiableHypothesis{ModelFamily{FamilyKind::linear, 1, 0, 1}, -10.0, 10.0});
  inst.objective = simple_loss(LossKind::squared, 0.0);
  inst.constraints = {simple_loss(LossKind::squared, 0.0)};
  Sample obj_s;
  obj_s.x = Vec::Ones(1);
  obj_s.y = 1.0;
  Sample con_s;
  con_s.x = Vec::Ones(1);
  con_s.y = 0.0;
  inst.splits.resize(2);
  inst.splits[0].samples = {obj_s};
  inst.splits[1].samples = {con_s};
  inst.inner_solve = "qp-interval";
  validate_instance(inst);
  return inst;
}

inline double sqrt_instance_value(double u) {
  if (u >= 1.0) return 0.0;
  double r = 1.0 - std::sqrt(std::max(0.0, u));
  return r * r;
}

inline double sqrt_instance_derivative(double u) {
  if (u >= 1.0) return 0.0;
  return 1.0 - 1.0 / std::sqrt(u);
}

inline ropt::Vec vec2(double a, double b) {
  ropt::Vec v(2);
  v << a, b;
  return v;
}

inline ropt::Vec vec1(double a) {
  ropt::Vec v(1);
  v << a;
  return v;
}

}  // namespace testutil
