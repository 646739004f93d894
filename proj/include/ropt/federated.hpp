#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropt/csv.hpp"
#include "ropt/evaluate.hpp"
#include "ropt/parallel.hpp"
#include "ropt/random.hpp"
#include "ropt/stats.hpp"
#include "ropt/types.hpp"

namespace ropt {

struct LabeledDataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
  int num_classes = 0;
  int dim = 0;
};

// Gaussian-blob multiclass task: one random center per class, isotropic noise.
inline LabeledDataset make_fl_dataset(int train_per_class, int test_per_class,
                                      std::uint64_t seed, int num_classes = 10, int dim = 20) {
  if (train_per_class < 1 || test_per_class < 1)
    throw std::invalid_argument("per-class counts: must be >= 1");
  auto g = make_engine(seed);
  std::vector<Vec> centers;
  for (int c = 0; c < num_classes; ++c) {
    Vec mu(dim);
    for (int j = 0; j < dim; ++j) mu[j] = normal(g);
    centers.push_back(std::move(mu));
  }
  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.dim = dim;
  auto emit = [&](std::vector<Sample>& out, int per_class) {
    for (int c = 0; c < num_classes; ++c)
      for (int i = 0; i < per_class; ++i) {
        Sample s;
        s.x = centers[static_cast<size_t>(c)];
        for (int j = 0; j < dim; ++j) s.x[j] += normal(g);
        s.y = static_cast<double>(c);
        out.push_back(std::move(s));
      }
  };
  emit(ds.train, train_per_class);
  emit(ds.test, test_per_class);
  return ds;
}

struct ClientShard {
  int id = 0;
  std::vector<Sample> train;
  std::vector<Sample> test;
  Vec class_fractions;            // train shard class proportions
  double minority_fraction = 0.0; // share of train samples in minority classes
};

enum class FlMode { constrained, resilient };

struct FlConfig {
  int clients = 10;
  double eps = 0.1;
  // Price of each client's scalar slack. Empty: quadratic(alpha = 1) for every
  // client; one entry: shared by all clients; otherwise one entry per client.
  std::vector<RelaxationCost> client_costs;
  double eta_u = 0.1;
  double eta_lambda = 0.1;
  int rounds = 100;
  int epochs = 1;          // full-batch local steps per round
  double local_step = 0.1;
  double beta = 0.3;       // concentration of the per-client class prior
  std::vector<int> minority_classes;
  double rho = 1.0;        // keep-fraction for minority-class train samples
  std::uint64_t seed = 0;
  FlMode mode = FlMode::resilient;
  LossSpec local_loss = simple_loss(LossKind::logistic, 0.0);
  ModelFamily family{FamilyKind::linear, 20, 0, 10};
};

inline void validate_fl_config(const FlConfig& cfg) {
  if (cfg.clients < 1) throw std::invalid_argument("clients: must be >= 1");
  if (cfg.eps < 0.0) throw std::invalid_argument("eps: must be >= 0");
  if (!(cfg.eta_u > 0.0)) throw std::invalid_argument("eta_u: must be > 0");
  if (!(cfg.eta_lambda > 0.0)) throw std::invalid_argument("eta_lambda: must be > 0");
  if (cfg.rounds < 1) throw std::invalid_argument("rounds: must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs: must be >= 0");
  if (!(cfg.local_step > 0.0)) throw std::invalid_argument("local_step: must be > 0");
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("beta: must be > 0");
  if (!(cfg.rho > 0.0) || cfg.rho > 1.0) throw std::invalid_argument("rho: must be in (0, 1]");
  if (cfg.client_costs.size() > 1 && cfg.client_costs.size() != static_cast<size_t>(cfg.clients))
    throw std::invalid_argument("client_costs: need one entry, one per client, or none");
}

inline RelaxationCost client_cost_of(const FlConfig& cfg, int client) {
  if (cfg.client_costs.empty()) return quadratic_cost(1.0);
  if (cfg.client_costs.size() == 1) return cfg.client_costs.front();
  return cfg.client_costs[static_cast<size_t>(client)];
}

// Disjoint train shards drawn without replacement from per-class pools using
// per-client class priors; minority-class pools are pre-thinned to rho. Each
// client's prior is apportioned into integer per-class quotas (largest
// remainder), capped by pool availability with the shortfall redistributed to
// the remaining pools by prior mass, so concentration priors give near-exact
// class balance. Test shards mirror each client's train class balance and are
// drawn from a pool that resets between clients.
inline std::vector<ClientShard> dirichlet_partition(const LabeledDataset& ds,
                                                    const FlConfig& cfg) {
  validate_fl_config(cfg);
  if (static_cast<int>(ds.train.size()) < cfg.clients)
    throw std::invalid_argument("dataset: need at least one train sample per client");
  auto g = make_engine(stream_seed(cfg.seed, 0xD1));
  const int C = cfg.clients;
  const int classes = ds.num_classes;

  std::vector<std::vector<size_t>> pools(static_cast<size_t>(classes));
  for (size_t i = 0; i < ds.train.size(); ++i)
    pools[static_cast<size_t>(ds.train[i].y)].push_back(i);
  for (auto& pool : pools) std::shuffle(pool.begin(), pool.end(), g);
  for (int c : cfg.minority_classes) {
    if (c < 0 || c >= classes) throw std::invalid_argument("minority_classes: class out of range");
    auto& pool = pools[static_cast<size_t>(c)];
    pool.resize(static_cast<size_t>(std::floor(cfg.rho * static_cast<double>(pool.size()))));
  }
  size_t total = 0;
  for (const auto& pool : pools) total += pool.size();

  std::vector<size_t> slots(static_cast<size_t>(C), total / static_cast<size_t>(C));
  for (size_t i = 0; i < total % static_cast<size_t>(C); ++i) ++slots[i];

  std::gamma_distribution<double> gamma_draw(cfg.beta, 1.0);
  std::vector<ClientShard> shards(static_cast<size_t>(C));
  for (int i = 0; i < C; ++i) {
    ClientShard& shard = shards[static_cast<size_t>(i)];
    shard.id = i;
    const size_t budget = slots[static_cast<size_t>(i)];
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 10)
        throw std::runtime_error("partition: client " + std::to_string(i) +
                                 " received zero samples");
      Vec prior(classes);
      for (int c = 0; c < classes; ++c) prior[c] = gamma_draw(g);
      prior /= prior.sum();
      if (budget == 0) continue;  // re-draw cannot help; fail after 10

      // Integer quotas: floor of the prior shares, then largest remainders.
      std::vector<size_t> want(static_cast<size_t>(classes), 0);
      std::vector<std::pair<double, int>> remainder;
      size_t assigned = 0;
      for (int c = 0; c < classes; ++c) {
        double target = prior[c] * static_cast<double>(budget);
        want[static_cast<size_t>(c)] = static_cast<size_t>(std::floor(target));
        assigned += want[static_cast<size_t>(c)];
        remainder.push_back({target - std::floor(target), c});
      }
      std::stable_sort(remainder.begin(), remainder.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (size_t k = 0; assigned < budget; k = (k + 1) % remainder.size(), ++assigned)
        ++want[static_cast<size_t>(remainder[k].second)];

      // Cap by availability; hand the shortfall to pools with spare samples,
      // largest prior mass first.
      size_t got = 0;
      for (int c = 0; c < classes; ++c) {
        want[static_cast<size_t>(c)] = std::min(want[static_cast<size_t>(c)],
                                                pools[static_cast<size_t>(c)].size());
        got += want[static_cast<size_t>(c)];
      }
      while (got < budget) {
        int best = -1;
        for (int c = 0; c < classes; ++c) {
          if (want[static_cast<size_t>(c)] >= pools[static_cast<size_t>(c)].size()) continue;
          if (best < 0 || prior[c] > prior[best]) best = c;
        }
        if (best < 0) break;  // every pool drained; cannot happen while samples remain
        ++want[static_cast<size_t>(best)];
        ++got;
      }

      for (int c = 0; c < classes; ++c) {
        auto& pool = pools[static_cast<size_t>(c)];
        for (size_t k = 0; k < want[static_cast<size_t>(c)]; ++k) {
          shard.train.push_back(ds.train[pool.back()]);
          pool.pop_back();
        }
      }
      break;
    }

    Vec counts = Vec::Zero(classes);
    for (const auto& s : shard.train) counts[static_cast<Eigen::Index>(s.y)] += 1.0;
    shard.class_fractions = counts / static_cast<double>(shard.train.size());
    double minority = 0.0;
    for (int c : cfg.minority_classes) minority += counts[c];
    shard.minority_fraction = minority / static_cast<double>(shard.train.size());

    // test pool resets for every client (shards may overlap across clients)
    std::vector<std::vector<size_t>> test_pools(static_cast<size_t>(classes));
    for (size_t k = 0; k < ds.test.size(); ++k)
      test_pools[static_cast<size_t>(ds.test[k].y)].push_back(k);
    for (auto& pool : test_pools) std::shuffle(pool.begin(), pool.end(), g);
    for (int c = 0; c < classes; ++c) {
      size_t want = std::min(static_cast<size_t>(counts[c]), test_pools[static_cast<size_t>(c)].size());
      for (size_t k = 0; k < want; ++k)
        shard.test.push_back(ds.test[test_pools[static_cast<size_t>(c)][k]]);
    }
  }
  return shards;
}

struct FlWorld {
  Vec theta;
  Vec u;
  Vec lambda;
  Vec risks;              // latest client reports, evaluated at their broadcast theta
  double risk_bar = 0.0;  // mean of risks
  double lambda_bar = 0.0;
  int round = 0;
};

inline Vec compute_weights(const FlWorld& world) {
  double mean = world.lambda.size() ? world.lambda.mean() : 0.0;
  return Vec(1.0 + world.lambda.array() - mean);
}

// E full-batch steps on weight x (mean local loss), from the broadcast theta.
inline Vec client_update(const ClientShard& shard, const ModelFamily& family,
                         const LossSpec& loss, const Vec& theta, double weight, int epochs,
                         double step) {
  if (!std::isfinite(weight)) throw std::invalid_argument("weight: must be finite");
  if (shard.train.empty()) throw std::invalid_argument("shard: no train samples");
  Vec th = theta;
  if (epochs == 0 || weight == 0.0) return th;
  double scale = weight / static_cast<double>(shard.train.size());
  for (int e = 0; e < epochs; ++e) {
    Vec g = Vec::Zero(th.size());
    for (const auto& s : shard.train) accumulate_loss_grad(loss, family, th, s, scale, g);
    th -= step * g;
    if (!th.allFinite() || th.cwiseAbs().maxCoeff() > 1e9)
      throw std::runtime_error("client_update: diverged");
  }
  return th;
}

inline FlWorld init_fl_world(const std::vector<ClientShard>& shards, const FlConfig& cfg) {
  FlWorld w;
  const int C = static_cast<int>(shards.size());
  w.theta = init_params(cfg.family, stream_seed(cfg.seed, 0xF0));
  w.u = Vec::Zero(C);
  w.lambda = Vec::Zero(C);
  w.risks = Vec(C);
  for (int i = 0; i < C; ++i)
    w.risks[i] = mean_loss(cfg.local_loss, cfg.family, w.theta, shards[static_cast<size_t>(i)].train);
  w.risk_bar = w.risks.mean();
  w.lambda_bar = 0.0;
  w.round = 0;
  return w;
}

// One communication round: broadcast (theta, lambda_bar, risk_bar), concurrent
// client updates and fresh risk reports at the broadcast theta, shard-size
// weighted aggregation, then each client's local slack and dual steps.
inline FlWorld server_round(const FlWorld& world, const std::vector<ClientShard>& shards,
                            const FlConfig& cfg) {
  const int C = static_cast<int>(shards.size());
  const double lambda_bar = world.lambda.mean();
  const double risk_bar = world.risk_bar;

  Vec weights = compute_weights(world);
  std::vector<Vec> locals(static_cast<size_t>(C));
  Vec fresh(C);
  parallel_for(static_cast<size_t>(C), [&](size_t i) {
    locals[i] = client_update(shards[i], cfg.family, cfg.local_loss, world.theta, weights[static_cast<Eigen::Index>(i)],
                              cfg.epochs, cfg.local_step);
    fresh[static_cast<Eigen::Index>(i)] =
        mean_loss(cfg.local_loss, cfg.family, world.theta, shards[i].train);
  });

  double total = 0.0;
  for (const auto& shard : shards) total += static_cast<double>(shard.train.size());
  Vec theta_next = Vec::Zero(world.theta.size());
  for (int i = 0; i < C; ++i)
    theta_next += (static_cast<double>(shards[static_cast<size_t>(i)].train.size()) / total) *
                  locals[static_cast<size_t>(i)];

  FlWorld next;
  next.theta = std::move(theta_next);
  next.u = Vec(C);
  next.lambda = Vec(C);
  for (int i = 0; i < C; ++i) {
    double u_i = 0.0;
    if (cfg.mode == FlMode::resilient) {
      Vec u_vec = Vec::Constant(1, world.u[i]);
      double grad = cost_grad(client_cost_of(cfg, i), u_vec)[0];
      u_i = std::max(0.0, world.u[i] - cfg.eta_u * (grad - world.lambda[i]));
    }
    next.u[i] = u_i;
    next.lambda[i] =
        std::max(0.0, world.lambda[i] + cfg.eta_lambda * (fresh[i] - risk_bar - cfg.eps - u_i));
  }
  next.risks = std::move(fresh);
  next.risk_bar = next.risks.mean();
  next.lambda_bar = lambda_bar;
  next.round = world.round + 1;
  return next;
}

struct FlRoundRow {
  int round = 0;
  int client = 0;
  double lambda = 0.0;
  double u = 0.0;
  double risk = 0.0;
  int violation_train = 0;  // risk - mean risk - eps > u, same-round values
  int violation_test = 0;
};

struct FlMetrics {
  std::vector<FlRoundRow> rows;
  FlWorld final_world;
  std::vector<double> minority_fraction;
  double spearman_u_minority = 0.0;
  double max_lambda = 0.0;
  double infeasible_train_shifted = 0.0;
  double infeasible_test_shifted = 0.0;
  double infeasible_train_unshifted = 0.0;
  double infeasible_test_unshifted = 0.0;
  double wall_seconds = 0.0;
};

inline FlMetrics run_fl(const LabeledDataset& ds, const FlConfig& cfg) {
  validate_fl_config(cfg);
  auto t0 = std::chrono::steady_clock::now();
  std::vector<ClientShard> shards = dirichlet_partition(ds, cfg);
  const int C = static_cast<int>(shards.size());
  FlWorld world = init_fl_world(shards, cfg);

  FlMetrics metrics;
  for (const auto& shard : shards) metrics.minority_fraction.push_back(shard.minority_fraction);

  for (int t = 0; t < cfg.rounds; ++t) {
    Vec broadcast_theta = world.theta;
    world = server_round(world, shards, cfg);

    Vec test_risks(C);
    parallel_for(static_cast<size_t>(C), [&](size_t i) {
      test_risks[static_cast<Eigen::Index>(i)] =
          shards[i].test.empty()
              ? 0.0
              : mean_loss(cfg.local_loss, cfg.family, broadcast_theta, shards[i].test);
    });
    double train_bar = world.risks.mean();
    double test_bar = test_risks.mean();

    int viol_train_shifted = 0, viol_test_shifted = 0;
    int viol_train_plain = 0, viol_test_plain = 0;
    for (int i = 0; i < C; ++i) {
      FlRoundRow row;
      row.round = world.round;
      row.client = i;
      row.lambda = world.lambda[i];
      row.u = world.u[i];
      row.risk = world.risks[i];
      row.violation_train = world.risks[i] - train_bar - cfg.eps > world.u[i] ? 1 : 0;
      row.violation_test = test_risks[i] - test_bar - cfg.eps > world.u[i] ? 1 : 0;
      viol_train_shifted += row.violation_train;
      viol_test_shifted += row.violation_test;
      viol_train_plain += world.risks[i] - train_bar - cfg.eps > 0.0 ? 1 : 0;
      viol_test_plain += test_risks[i] - test_bar - cfg.eps > 0.0 ? 1 : 0;
      metrics.rows.push_back(row);
    }
    if (t + 1 == cfg.rounds) {
      metrics.infeasible_train_shifted = static_cast<double>(viol_train_shifted) / C;
      metrics.infeasible_test_shifted = static_cast<double>(viol_test_shifted) / C;
      metrics.infeasible_train_unshifted = static_cast<double>(viol_train_plain) / C;
      metrics.infeasible_test_unshifted = static_cast<double>(viol_test_plain) / C;
    }
  }

  metrics.final_world = world;
  metrics.max_lambda = world.lambda.size() ? world.lambda.maxCoeff() : 0.0;
  std::vector<double> u_vals(world.u.data(), world.u.data() + world.u.size());
  metrics.spearman_u_minority =
      C >= 2 ? spearman(u_vals, metrics.minority_fraction) : 0.0;
  metrics.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return metrics;
}

inline void write_fl_metrics_csv(const std::string& path, const FlMetrics& metrics) {
  CsvWriter csv(path);
  csv.header({"round", "client", "lambda", "u", "risk", "violation_train", "violation_test"});
  for (const auto& row : metrics.rows)
    csv.line({fmt_int(row.round), fmt_int(row.client), fmt_double(row.lambda), fmt_double(row.u),
              fmt_double(row.risk), fmt_int(row.violation_train), fmt_int(row.violation_test)});
}

}  // namespace ropt
