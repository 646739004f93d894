#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "ropt/csv.hpp"
#include "ropt/federated.hpp"
#include "ropt/instances.hpp"
#include "ropt/oracle.hpp"
#include "ropt/serialize.hpp"
#include "ropt/solver.hpp"

#ifndef RESILIENT_OPT_VERSION
#define RESILIENT_OPT_VERSION "0.0.0"
#endif

namespace ropt {

// Bad or missing configuration: exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cli_detail {

inline std::string timestamp_utc() {
  std::time_t tt = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

inline void check_keys(const Json& j, const std::vector<std::string>& allowed,
                       const std::string& where) {
  if (j.is_null()) return;
  if (!j.is_object())
    throw ConfigError("config: " + (where.empty() ? std::string("top level") : where) +
                      " must be a JSON object");
  for (const auto& item : j.items())
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError("unknown key: " + (where.empty() ? item.key() : where + "." + item.key()));
}

template <typename T>
T get_as(const Json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError("type mismatch: " + key);
  }
}

inline Vec vec_from_list(const Json& j, const std::string& key) {
  std::vector<double> v = get_as<std::vector<double>>(j, key, {});
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

inline std::vector<double> linspace(double lo, double hi, int pts) {
  std::vector<double> v(static_cast<size_t>(pts));
  for (int i = 0; i < pts; ++i)
    v[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (pts - 1);
  return v;
}

// Paths are registered as they are handed out so the manifest can list every
// emitted file; the directory appears on first write.
struct RunContext {
  std::string command;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  Json config = Json::object();
  std::vector<std::string> files;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  std::string path(const std::string& name) {
    std::filesystem::create_directories(out_dir);
    files.push_back((out_dir / name).string());
    return files.back();
  }
};

inline RunContext open_run(const std::string& command, std::uint64_t seed,
                           const std::string& out_override) {
  RunContext ctx;
  ctx.command = command;
  ctx.seed = seed;
  ctx.out_dir = out_override.empty() ? std::filesystem::path(command + "-" + std::to_string(seed) +
                                                             "-" + timestamp_utc())
                                     : std::filesystem::path(out_override);
  return ctx;
}

inline void close_run(RunContext& ctx) {
  write_json_file(ctx.path("config.json"), ctx.config);
  Json manifest = Json::object();
  manifest["command"] = ctx.command;
  manifest["versions"] =
      Json{{"resilient_opt", RESILIENT_OPT_VERSION},
           {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                         "." + std::to_string(EIGEN_MINOR_VERSION)}};
  manifest["seed"] = ctx.seed;
  manifest["out_dir"] = ctx.out_dir.string();
  manifest["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.t0).count();
  manifest["config"] = ctx.config;
  std::string manifest_path = ctx.path("manifest.json");
  manifest["files"] = ctx.files;
  write_json_file(manifest_path, manifest);
}

struct InstanceSpec {
  ProblemInstance inst;
  std::optional<RelaxationCost> implied_cost;  // set by constructors that fix h
  Json normalized = Json::object();
};

inline InstanceSpec instance_from_spec(const Json& spec) {
  check_keys(spec, {"path", "builtin", "d", "m", "seed", "n", "mode", "gamma", "k_transforms",
                    "translation"},
             "instance");
  InstanceSpec out;
  if (spec.contains("path")) {
    std::string p = get_as<std::string>(spec, "path", "");
    if (!std::filesystem::exists(p)) throw ConfigError("instance.path: file not found: " + p);
    out.inst = instance_from_json(read_json_file(p));
    out.normalized = Json{{"path", p}};
    return out;
  }
  std::string name = get_as<std::string>(spec, "builtin", "qp");
  if (name == "qp") {
    int d = get_as<int>(spec, "d", 2);
    int m = get_as<int>(spec, "m", 2);
    auto s = get_as<std::uint64_t>(spec, "seed", 0);
    out.inst = make_convex_qp(d, m, s);
    out.normalized = Json{{"builtin", name}, {"d", d}, {"m", m}, {"seed", s}};
  } else if (name == "finite-example") {
    int n = get_as<int>(spec, "n", 1000);
    auto s = get_as<std::uint64_t>(spec, "seed", 0);
    std::string mode = get_as<std::string>(spec, "mode", "sampled");
    if (mode != "sampled" && mode != "exact")
      throw ConfigError("instance.mode: must be sampled or exact");
    out.inst = make_finite_example(n, s, mode == "exact" ? EvalMode::exact : EvalMode::sampled);
    out.normalized = Json{{"builtin", name}, {"n", n}, {"seed", s}, {"mode", mode}};
  } else if (name == "svm-separable" || name == "svm-overlap") {
    double gamma = get_as<double>(spec, "gamma", 1.0);
    auto pair = name == "svm-separable" ? make_svm_separable_toy(gamma) : make_svm_overlap_toy(gamma);
    out.inst = std::move(pair.first);
    out.implied_cost = std::move(pair.second);
    out.normalized = Json{{"builtin", name}, {"gamma", gamma}};
  } else if (name == "invariance") {
    auto s = get_as<std::uint64_t>(spec, "seed", 0);
    int k = get_as<int>(spec, "k_transforms", 4);
    bool tr = get_as<bool>(spec, "translation", false);
    out.inst = make_invariance_toy(s, k, tr);
    out.normalized = Json{{"builtin", name}, {"seed", s}, {"k_transforms", k}, {"translation", tr}};
  } else {
    throw ConfigError("instance.builtin: unknown constructor: " + name);
  }
  return out;
}

inline RelaxationCost cost_from_spec(const Json& spec, const std::optional<RelaxationCost>& implied,
                                     Json& normalized) {
  if (spec.is_null() || (spec.is_object() && spec.empty())) {
    RelaxationCost h = implied ? *implied : quadratic_cost(1.0);
    normalized = to_json(h);
    return h;
  }
  std::string kind = get_as<std::string>(spec, "kind", "");
  if (kind == "quadratic")
    check_keys(spec, {"kind", "alpha"}, "cost");
  else if (kind == "linear")
    check_keys(spec, {"kind", "gamma"}, "cost");
  else if (kind == "per-coordinate")
    check_keys(spec, {"kind", "terms"}, "cost");
  else
    throw ConfigError("cost.kind: must be quadratic, linear, or per-coordinate");
  RelaxationCost h = cost_from_json(spec);
  normalized = to_json(h);
  return h;
}

inline SolverConfig solver_from_spec(const Json& spec, std::uint64_t default_seed,
                                     Json& normalized) {
  check_keys(spec,
             {"eta_theta", "eta_u", "eta_lambda", "iters", "tol", "batch", "seed", "theta0", "u0",
              "lambda0"},
             "solver");
  SolverConfig cfg;
  cfg.eta_theta = get_as<double>(spec, "eta_theta", 0.01);
  cfg.eta_u = get_as<double>(spec, "eta_u", 0.01);
  cfg.eta_lambda = get_as<double>(spec, "eta_lambda", 0.01);
  cfg.max_iters = get_as<int>(spec, "iters", 1000);
  cfg.tol = get_as<double>(spec, "tol", 0.0);
  std::string batch = get_as<std::string>(spec, "batch", "full-batch");
  if (batch == "full-batch")
    cfg.batch = BatchMode::full_batch;
  else if (batch == "per-sample-pass")
    cfg.batch = BatchMode::per_sample_pass;
  else
    throw ConfigError("solver.batch: must be full-batch or per-sample-pass");
  cfg.seed = get_as<std::uint64_t>(spec, "seed", default_seed);
  cfg.theta_init = vec_from_list(spec, "theta0");
  cfg.u_init = vec_from_list(spec, "u0");
  cfg.lambda_init = vec_from_list(spec, "lambda0");
  validate_config(cfg);
  normalized = Json{{"eta_theta", cfg.eta_theta},
                    {"eta_u", cfg.eta_u},
                    {"eta_lambda", cfg.eta_lambda},
                    {"iters", cfg.max_iters},
                    {"tol", cfg.tol},
                    {"batch", batch},
                    {"seed", cfg.seed}};
  if (cfg.theta_init.size()) normalized["theta0"] = detail::vec_to_json(cfg.theta_init);
  if (cfg.u_init.size()) normalized["u0"] = detail::vec_to_json(cfg.u_init);
  if (cfg.lambda_init.size()) normalized["lambda0"] = detail::vec_to_json(cfg.lambda_init);
  return cfg;
}

inline Json final_state_summary(const ProblemInstance& inst, const RelaxationCost& h,
                                const RunResult& res) {
  Json s = Json::object();
  s["stop"] = to_string(res.stop);
  s["iterations"] = res.state.t;
  s["theta"] = detail::vec_to_json(res.state.theta);
  s["u"] = detail::vec_to_json(res.state.u);
  s["lambda"] = detail::vec_to_json(res.state.lambda);
  if (res.state.theta.allFinite()) {
    s["objective"] = eval_objective(inst, res.state.theta);
    s["constraints"] = detail::vec_to_json(eval_constraints(inst, res.state.theta));
    s["residual"] = equilibrium_residual(h, res.state);
    s["lagrangian"] = empirical_lagrangian(inst, h, res.state);
  }
  return s;
}

inline int exit_for(const RunResult& res) {
  if (res.stop == StopReason::diverged || res.stop == StopReason::nonfinite) {
    std::cerr << "error: numerical divergence (" << to_string(res.stop) << ")\n";
    return 3;
  }
  return 0;
}

// --- command handlers -------------------------------------------------------

inline int handle_solve(RunContext& ctx, const Json& cfg) {
  check_keys(cfg, {"command", "seed", "out", "instance", "cost", "solver"}, "");
  InstanceSpec spec = instance_from_spec(cfg.value("instance", Json::object()));
  Json cost_norm, solver_norm;
  RelaxationCost h = cost_from_spec(cfg.value("cost", Json()), spec.implied_cost, cost_norm);
  SolverConfig scfg = solver_from_spec(cfg.value("solver", Json::object()), ctx.seed, solver_norm);
  ctx.config = Json{{"command", ctx.command},
                    {"seed", ctx.seed},
                    {"instance", spec.normalized},
                    {"cost", cost_norm},
                    {"solver", solver_norm}};
  RunResult res = run(spec.inst, h, scfg);
  write_trajectory_csv(ctx.path("trajectory.csv"), res.trajectory, spec.inst.num_constraints);
  write_json_file(ctx.path("summary.json"), final_state_summary(spec.inst, h, res));
  close_run(ctx);
  return exit_for(res);
}

inline int handle_oracle_grid(RunContext& ctx, const Json& cfg) {
  check_keys(cfg, {"command", "seed", "out", "instance", "cost", "grid"}, "");
  InstanceSpec spec = instance_from_spec(cfg.value("instance", Json::object()));
  Json cost_norm;
  RelaxationCost h = cost_from_spec(cfg.value("cost", Json()), spec.implied_cost, cost_norm);
  Json gspec = cfg.value("grid", Json::object());
  check_keys(gspec, {"min", "max", "points", "axes"}, "grid");
  std::vector<std::vector<double>> axes;
  if (gspec.contains("axes")) {
    axes = get_as<std::vector<std::vector<double>>>(gspec, "axes", {});
  } else {
    double lo = get_as<double>(gspec, "min", 0.0);
    double hi = get_as<double>(gspec, "max", 2.0);
    int pts = get_as<int>(gspec, "points", 21);
    if (pts < 2 || !(hi > lo)) throw ConfigError("grid: need points >= 2 and max > min");
    axes.assign(static_cast<size_t>(spec.inst.num_constraints), linspace(lo, hi, pts));
  }
  ctx.config = Json{{"command", ctx.command},
                    {"seed", ctx.seed},
                    {"instance", spec.normalized},
                    {"cost", cost_norm},
                    {"grid", Json{{"axes", axes}}}};
  PerturbationGrid grid = build_perturbation_grid(spec.inst, axes);
  write_grid_csv(ctx.path("grid.csv"), grid);
  NestedMinimum nested = nested_grid_minimum(grid, h);
  Json summary = Json{{"nested_value", nested.value}, {"nested_u", detail::vec_to_json(nested.u)}};
  write_json_file(ctx.path("oracle_summary.json"), summary);
  close_run(ctx);
  return 0;
}

inline int handle_finite_example(RunContext& ctx, const Json& cfg) {
  check_keys(cfg, {"command", "seed", "out", "n", "trials", "alpha"}, "");
  int n = get_as<int>(cfg, "n", 1000);
  int trials = get_as<int>(cfg, "trials", 200);
  double alpha = get_as<double>(cfg, "alpha", 0.5);
  ctx.config = Json{
      {"command", ctx.command}, {"seed", ctx.seed}, {"n", n}, {"trials", trials}, {"alpha", alpha}};
  SelectionReport rep = run_selection_trials(n, trials, ctx.seed, quadratic_cost(alpha));
  Json summary = Json::object();
  summary["n"] = n;
  summary["trials"] = rep.trials;
  summary["alpha"] = alpha;
  summary["seed"] = ctx.seed;
  summary["mean_abs_tau_bar"] = rep.mean_abs_tau_bar;
  Json cands = Json::array();
  const ProblemInstance reference_instance = make_finite_example(2, 0);
  for (const Vec& th : enumerate_finite(reference_instance.hypothesis))
    cands.push_back(detail::vec_to_json(th));
  cands.push_back("none-feasible");
  summary["candidates"] = cands;
  summary["ecrm"] = rep.ecrm;
  summary["relaxed"] = rep.relaxed;
  summary["resilient"] = rep.resilient;
  write_json_file(ctx.path("selection.json"), summary);
  close_run(ctx);
  return 0;
}

inline int handle_fl_sim(RunContext& ctx, const Json& cfg) {
  check_keys(cfg,
             {"command", "seed", "out", "clients", "eps", "rounds", "epochs", "beta", "rho", "mode",
              "eta_u", "eta_lambda", "local_step", "alpha", "minority_classes", "train_per_class",
              "test_per_class"},
             "");
  FlConfig f;
  f.clients = get_as<int>(cfg, "clients", 10);
  f.eps = get_as<double>(cfg, "eps", 0.1);
  f.rounds = get_as<int>(cfg, "rounds", 100);
  f.epochs = get_as<int>(cfg, "epochs", 1);
  f.beta = get_as<double>(cfg, "beta", 0.3);
  f.rho = get_as<double>(cfg, "rho", 0.1);
  f.eta_u = get_as<double>(cfg, "eta_u", 0.1);
  f.eta_lambda = get_as<double>(cfg, "eta_lambda", 0.1);
  f.local_step = get_as<double>(cfg, "local_step", 0.1);
  double alpha = get_as<double>(cfg, "alpha", 1.0);
  f.client_costs = {quadratic_cost(alpha)};
  f.minority_classes = get_as<std::vector<int>>(cfg, "minority_classes", {0, 1, 2});
  std::string mode = get_as<std::string>(cfg, "mode", "resilient");
  if (mode == "resilient")
    f.mode = FlMode::resilient;
  else if (mode == "constrained")
    f.mode = FlMode::constrained;
  else
    throw ConfigError("mode: must be resilient or constrained");
  int train_per_class = get_as<int>(cfg, "train_per_class", 200);
  int test_per_class = get_as<int>(cfg, "test_per_class", 50);
  f.seed = ctx.seed;
  validate_fl_config(f);
  ctx.config = Json{{"command", ctx.command},
                    {"seed", ctx.seed},
                    {"clients", f.clients},
                    {"eps", f.eps},
                    {"rounds", f.rounds},
                    {"epochs", f.epochs},
                    {"beta", f.beta},
                    {"rho", f.rho},
                    {"mode", mode},
                    {"eta_u", f.eta_u},
                    {"eta_lambda", f.eta_lambda},
                    {"local_step", f.local_step},
                    {"alpha", alpha},
                    {"minority_classes", f.minority_classes},
                    {"train_per_class", train_per_class},
                    {"test_per_class", test_per_class}};
  LabeledDataset ds = make_fl_dataset(train_per_class, test_per_class, stream_seed(ctx.seed, 0xDA7A));
  FlMetrics mx = run_fl(ds, f);
  write_fl_metrics_csv(ctx.path("fl_metrics.csv"), mx);
  Json summary = Json::object();
  summary["spearman_u_minority"] = mx.spearman_u_minority;
  summary["max_lambda"] = mx.max_lambda;
  summary["infeasible_train_shifted"] = mx.infeasible_train_shifted;
  summary["infeasible_test_shifted"] = mx.infeasible_test_shifted;
  summary["infeasible_train_unshifted"] = mx.infeasible_train_unshifted;
  summary["infeasible_test_unshifted"] = mx.infeasible_test_unshifted;
  summary["final_lambda"] = detail::vec_to_json(mx.final_world.lambda);
  summary["final_u"] = detail::vec_to_json(mx.final_world.u);
  summary["minority_fraction"] = mx.minority_fraction;
  summary["config"] = ctx.config;
  write_json_file(ctx.path("fl_summary.json"), summary);
  close_run(ctx);
  return 0;
}

inline int handle_sweep_alpha(RunContext& ctx, const Json& cfg) {
  check_keys(cfg, {"command", "seed", "out", "alphas", "d", "m", "instance_seed", "solver"}, "");
  std::vector<double> alphas = get_as<std::vector<double>>(cfg, "alphas", {0.1, 1.0, 10.0});
  if (alphas.empty()) throw ConfigError("alphas: need at least one value");
  for (double a : alphas)
    if (!(a > 0.0)) throw ConfigError("alphas: values must be > 0");
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  int d = get_as<int>(cfg, "d", 2);
  int m = get_as<int>(cfg, "m", 2);
  auto iseed = get_as<std::uint64_t>(cfg, "instance_seed", 0);
  Json solver_norm;
  SolverConfig scfg = solver_from_spec(cfg.value("solver", Json::object()), ctx.seed, solver_norm);
  ctx.config = Json{{"command", ctx.command}, {"seed", ctx.seed},       {"alphas", alphas},
                    {"d", d},                 {"m", m},                 {"instance_seed", iseed},
                    {"solver", solver_norm}};
  ProblemInstance inst = make_convex_qp(d, m, iseed);
  std::vector<RunResult> results(alphas.size());
  parallel_for(alphas.size(), [&](size_t i) {
    results[i] = run(inst, quadratic_cost(alphas[i]), scfg);
  });
  CsvWriter csv(ctx.path("sweep_alpha.csv"));
  csv.header({"alpha", "final_u_norm", "objective", "residual", "lagrangian"});
  bool bad = false;
  for (size_t i = 0; i < alphas.size(); ++i) {
    const RunResult& res = results[i];
    RelaxationCost h = quadratic_cost(alphas[i]);
    double obj = res.state.theta.allFinite() ? eval_objective(inst, res.state.theta)
                                             : std::numeric_limits<double>::quiet_NaN();
    csv.line({fmt_double(alphas[i]), fmt_double(res.state.u.norm()), fmt_double(obj),
              fmt_double(equilibrium_residual(h, res.state)),
              fmt_double(res.state.theta.allFinite() ? empirical_lagrangian(inst, h, res.state)
                                                     : std::numeric_limits<double>::quiet_NaN())});
    write_trajectory_csv(ctx.path("trajectory-alpha-" + fmt_double(alphas[i]) + ".csv"),
                         res.trajectory, inst.num_constraints);
    if (res.stop == StopReason::diverged || res.stop == StopReason::nonfinite) bad = true;
  }
  csv.close();
  close_run(ctx);
  if (bad) {
    std::cerr << "error: numerical divergence in at least one sweep point\n";
    return 3;
  }
  return 0;
}

inline int handle_gap_bounds(RunContext& ctx, const Json& cfg) {
  check_keys(cfg, {"command", "seed", "out", "draws"}, "");
  int draws = get_as<int>(cfg, "draws", 1000);
  if (draws < 1) throw ConfigError("draws: must be >= 1");
  ctx.config = Json{{"command", ctx.command}, {"seed", ctx.seed}, {"draws", draws}};
  GapBoundSweep sweep = run_gap_bound_draws(draws, ctx.seed);
  Json summary = Json{{"draws", sweep.draws},
                      {"ordering_violations", sweep.ordering_violations},
                      {"quadratic_margin_violations", sweep.quadratic_margin_violations},
                      {"violations", sweep.ordering_violations + sweep.quadratic_margin_violations}};
  write_json_file(ctx.path("gap_bounds.json"), summary);
  close_run(ctx);
  return 0;
}

inline int handle_svm(RunContext& ctx, const Json& cfg) {
  check_keys(cfg, {"command", "seed", "out", "toy", "gamma", "solver"}, "");
  std::string toy = get_as<std::string>(cfg, "toy", "separable");
  if (toy != "separable" && toy != "overlap")
    throw ConfigError("toy: must be separable or overlap");
  double gamma = get_as<double>(cfg, "gamma", toy == "separable" ? 10.0 : 1.0);
  auto pair = toy == "separable" ? make_svm_separable_toy(gamma) : make_svm_overlap_toy(gamma);
  Json sspec = cfg.value("solver", Json::object());
  const Json svm_defaults{
      {"eta_theta", 0.05}, {"eta_u", 0.05}, {"eta_lambda", 0.05}, {"iters", 20000}};
  for (const auto& item : svm_defaults.items())
    if (!sspec.contains(item.key())) sspec[item.key()] = item.value();
  Json solver_norm;
  SolverConfig scfg = solver_from_spec(sspec, ctx.seed, solver_norm);
  ctx.config = Json{{"command", ctx.command},
                    {"seed", ctx.seed},
                    {"toy", toy},
                    {"gamma", gamma},
                    {"solver", solver_norm}};
  RunResult res = run(pair.first, pair.second, scfg);
  write_trajectory_csv(ctx.path("trajectory.csv"), res.trajectory, pair.first.num_constraints);
  Json summary = final_state_summary(pair.first, pair.second, res);
  if (res.state.theta.allFinite()) {
    Json margins = Json::array();
    for (int i = 0; i < pair.first.num_constraints; ++i) {
      const Sample& s = pair.first.splits[static_cast<size_t>(i) + 1].samples[0];
      margins.push_back(-s.y * predict(family_of(pair.first.hypothesis), res.state.theta, s.x)[0]);
    }
    summary["margins"] = margins;
  }
  write_json_file(ctx.path("svm_summary.json"), summary);
  close_run(ctx);
  return exit_for(res);
}

template <typename T>
void bind_opt(CLI::App* cmd, Json* overlay, const std::string& flag, std::vector<std::string> path,
              const std::string& desc) {
  cmd->add_option_function<T>(
      flag,
      [overlay, path = std::move(path)](const T& v) {
        Json* node = overlay;
        for (size_t i = 0; i + 1 < path.size(); ++i) node = &((*node)[path[i]]);
        (*node)[path.back()] = v;
      },
      desc);
}

inline void bind_flag(CLI::App* cmd, Json* overlay, const std::string& flag,
                      std::vector<std::string> path, const std::string& desc) {
  cmd->add_flag_function(
      flag,
      [overlay, path = std::move(path)](std::int64_t count) {
        Json* node = overlay;
        for (size_t i = 0; i + 1 < path.size(); ++i) node = &((*node)[path[i]]);
        (*node)[path.back()] = count > 0;
      },
      desc);
}

inline void bind_instance_opts(CLI::App* cmd, Json* overlay) {
  bind_opt<std::string>(cmd, overlay, "--instance", {"instance", "path"},
                        "Problem instance JSON file");
  bind_opt<std::string>(cmd, overlay, "--builtin", {"instance", "builtin"},
                        "Named constructor: qp, finite-example, svm-separable, svm-overlap, "
                        "invariance");
  bind_opt<int>(cmd, overlay, "--d", {"instance", "d"}, "Parameter dimension (qp)");
  bind_opt<int>(cmd, overlay, "--m", {"instance", "m"}, "Constraint count (qp)");
  bind_opt<std::uint64_t>(cmd, overlay, "--instance-seed", {"instance", "seed"},
                          "Instance construction seed");
  bind_opt<int>(cmd, overlay, "--n", {"instance", "n"}, "Samples per split (finite-example)");
  bind_opt<std::string>(cmd, overlay, "--mode", {"instance", "mode"},
                        "finite-example evaluation: sampled or exact");
  bind_opt<double>(cmd, overlay, "--gamma", {"instance", "gamma"}, "Slack price (svm builtins)");
  bind_opt<int>(cmd, overlay, "--k-transforms", {"instance", "k_transforms"},
                "Transform count (invariance)");
  bind_flag(cmd, overlay, "--translation", {"instance", "translation"},
            "Add the translation constraint (invariance)");
}

inline void bind_cost_opts(CLI::App* cmd, Json* overlay) {
  bind_opt<std::string>(cmd, overlay, "--cost-kind", {"cost", "kind"},
                        "Relaxation price: quadratic, linear, or per-coordinate");
  bind_opt<double>(cmd, overlay, "--alpha", {"cost", "alpha"}, "Quadratic price coefficient");
}

inline void bind_solver_opts(CLI::App* cmd, Json* overlay) {
  bind_opt<double>(cmd, overlay, "--eta-theta", {"solver", "eta_theta"}, "Model step size");
  bind_opt<double>(cmd, overlay, "--eta-u", {"solver", "eta_u"}, "Relaxation step size");
  bind_opt<double>(cmd, overlay, "--eta-lambda", {"solver", "eta_lambda"}, "Dual step size");
  bind_opt<int>(cmd, overlay, "--iters", {"solver", "iters"}, "Iteration budget");
  bind_opt<double>(cmd, overlay, "--tol", {"solver", "tol"}, "Early-stop tolerance (0 disables)");
  bind_opt<std::string>(cmd, overlay, "--batch", {"solver", "batch"},
                        "full-batch or per-sample-pass");
}

}  // namespace cli_detail

inline int cli_main(int argc, char** argv) {
  using cli_detail::bind_flag;
  using cli_detail::bind_opt;

  CLI::App app{"Primal-dual constrained learning with automatically priced constraint relaxation"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file; flags override file fields");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Base RNG seed (default 0)");
  app.add_option("--out", out_dir, "Output directory (default <command>-<seed>-<timestamp>)");

  Json overlay = Json::object();

  CLI::App* solve = app.add_subcommand("solve", "Run the primal-dual solver on an instance");
  solve->fallthrough();
  cli_detail::bind_instance_opts(solve, &overlay);
  cli_detail::bind_cost_opts(solve, &overlay);
  cli_detail::bind_solver_opts(solve, &overlay);

  CLI::App* grid_cmd =
      app.add_subcommand("oracle-grid", "Tabulate the exact perturbed optimal value on a slack grid");
  grid_cmd->fallthrough();
  cli_detail::bind_instance_opts(grid_cmd, &overlay);
  cli_detail::bind_cost_opts(grid_cmd, &overlay);
  bind_opt<double>(grid_cmd, &overlay, "--grid-min", {"grid", "min"}, "Axis start");
  bind_opt<double>(grid_cmd, &overlay, "--grid-max", {"grid", "max"}, "Axis end");
  bind_opt<int>(grid_cmd, &overlay, "--grid-points", {"grid", "points"}, "Points per axis");

  CLI::App* finite =
      app.add_subcommand("finite-example", "Monte Carlo candidate-selection study on the worked "
                                           "four-candidate example");
  finite->fallthrough();
  bind_opt<int>(finite, &overlay, "--n", {"n"}, "Samples per split");
  bind_opt<int>(finite, &overlay, "--trials", {"trials"}, "Independent trials");
  bind_opt<double>(finite, &overlay, "--alpha", {"alpha"}, "Quadratic price coefficient");

  CLI::App* fl = app.add_subcommand("fl-sim", "Resilient federated-learning simulation");
  fl->fallthrough();
  bind_opt<int>(fl, &overlay, "--clients", {"clients"}, "Client count");
  bind_opt<double>(fl, &overlay, "--eps", {"eps"}, "Proximity tolerance");
  bind_opt<int>(fl, &overlay, "--rounds", {"rounds"}, "Communication rounds");
  bind_opt<int>(fl, &overlay, "--epochs", {"epochs"}, "Local full-batch steps per round");
  bind_opt<double>(fl, &overlay, "--beta", {"beta"}, "Class-prior concentration");
  bind_opt<double>(fl, &overlay, "--rho", {"rho"}, "Minority keep-fraction");
  bind_opt<std::string>(fl, &overlay, "--mode", {"mode"}, "resilient or constrained");
  bind_opt<double>(fl, &overlay, "--eta-u", {"eta_u"}, "Relaxation step size");
  bind_opt<double>(fl, &overlay, "--eta-lambda", {"eta_lambda"}, "Dual step size");
  bind_opt<double>(fl, &overlay, "--local-step", {"local_step"}, "Client gradient step size");
  bind_opt<double>(fl, &overlay, "--alpha", {"alpha"}, "Quadratic slack price per client");
  fl->add_option_function<std::vector<int>>(
        "--minority",
        [&overlay](const std::vector<int>& v) { overlay["minority_classes"] = v; },
        "Minority class ids")
      ->delimiter(',');
  bind_opt<int>(fl, &overlay, "--train-per-class", {"train_per_class"}, "Train samples per class");
  bind_opt<int>(fl, &overlay, "--test-per-class", {"test_per_class"}, "Test samples per class");

  CLI::App* sweep = app.add_subcommand("sweep-alpha", "Solve the convex testbed across relaxation "
                                                      "prices and tabulate the trade-off");
  sweep->fallthrough();
  sweep
      ->add_option_function<std::vector<double>>(
          "--alphas", [&overlay](const std::vector<double>& v) { overlay["alphas"] = v; },
          "Quadratic price coefficients")
      ->delimiter(',');
  bind_opt<int>(sweep, &overlay, "--d", {"d"}, "Parameter dimension");
  bind_opt<int>(sweep, &overlay, "--m", {"m"}, "Constraint count");
  bind_opt<std::uint64_t>(sweep, &overlay, "--instance-seed", {"instance_seed"},
                          "Instance construction seed");
  cli_detail::bind_solver_opts(sweep, &overlay);

  CLI::App* gaps = app.add_subcommand("gap-bounds", "Randomized check of the relaxation-gap bounds");
  gaps->fallthrough();
  bind_opt<int>(gaps, &overlay, "--draws", {"draws"}, "Random problem draws");

  CLI::App* svm = app.add_subcommand("svm", "Soft-margin toy classifiers");
  svm->fallthrough();
  bind_opt<std::string>(svm, &overlay, "--toy", {"toy"}, "separable or overlap");
  bind_opt<double>(svm, &overlay, "--gamma", {"gamma"}, "Slack price per margin");
  cli_detail::bind_solver_opts(svm, &overlay);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Json cfg = Json::object();
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path))
        throw ConfigError("config: file not found: " + config_path);
      cfg = read_json_file(config_path);
      if (!cfg.is_object()) throw ConfigError("config: top level must be a JSON object");
    }
    cfg.update(overlay, true);

    std::uint64_t run_seed =
        seed_opt->count() ? seed : cli_detail::get_as<std::uint64_t>(cfg, "seed", 0);
    std::string out =
        !out_dir.empty() ? out_dir : cli_detail::get_as<std::string>(cfg, "out", "");
    const std::string command = app.get_subcommands().front()->get_name();
    if (cfg.contains("command") && cfg.at("command") != command)
      throw ConfigError("command: config file names a different command");

    cli_detail::RunContext ctx = cli_detail::open_run(command, run_seed, out);
    if (command == "solve") return cli_detail::handle_solve(ctx, cfg);
    if (command == "oracle-grid") return cli_detail::handle_oracle_grid(ctx, cfg);
    if (command == "finite-example") return cli_detail::handle_finite_example(ctx, cfg);
    if (command == "fl-sim") return cli_detail::handle_fl_sim(ctx, cfg);
    if (command == "sweep-alpha") return cli_detail::handle_sweep_alpha(ctx, cfg);
    if (command == "gap-bounds") return cli_detail::handle_gap_bounds(ctx, cfg);
    if (command == "svm") return cli_detail::handle_svm(ctx, cfg);
    throw std::logic_error("unreachable command dispatch");
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    return msg.find("diverged") != std::string::npos ? 3 : 2;
  }
}

}  // namespace ropt
