#include "mrgs/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "mrgs/error.hpp"
#include "mrgs/log.hpp"

namespace mrgs {

std::string to_string(TrainExamples mode) { return mode == TrainExamples::kLast ? "last" : "random_prefix"; }

TrainExamples parse_train_examples(const std::string& text) {
  if (text == "last") return TrainExamples::kLast;
  if (text == "random_prefix") return TrainExamples::kRandomPrefix;
  throw ParseError("unknown train examples mode '" + text + "'");
}

void Hyperparams::validate() const {
  model.validate();
  weights.validate();
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  if (max_epochs < 0) throw DataError("max_epochs must be >= 0");
  if (patience < 1) throw DataError("patience must be >= 1");
  if (negatives < 0) throw DataError("negatives must be >= 0");
  if (!(adam.learning_rate >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw DataError("invalid Adam settings");
  }
}

std::vector<Index> sample_negatives(const std::vector<Index>& user_items, Index n_items, Index size,
                                    std::mt19937_64& rng) {
  std::vector<std::uint8_t> taken(static_cast<std::size_t>(n_items), 0);
  for (Index i : user_items) taken[static_cast<std::size_t>(i)] = 1;
  const Index complement = n_items - static_cast<Index>(std::count(taken.begin(), taken.end(), 1));
  if (size > complement) {
    warn("negative sample resized from " + std::to_string(size) + " to " + std::to_string(complement) +
         " (complement of the user's items is too small)");
    size = complement;
  }
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(size));
  if (size <= 0) return out;
  if (2 * size <= complement) {
    // Rejection sampling; at most half the complement is consumed.
    std::uniform_int_distribution<Index> pick(0, n_items - 1);
    while (static_cast<Index>(out.size()) < size) {
      const Index i = pick(rng);
      if (taken[static_cast<std::size_t>(i)]) continue;
      taken[static_cast<std::size_t>(i)] = 1;
      out.push_back(i);
    }
    return out;
  }
  std::vector<Index> pool;
  pool.reserve(static_cast<std::size_t>(complement));
  for (Index i = 0; i < n_items; ++i) {
    if (!taken[static_cast<std::size_t>(i)]) pool.push_back(i);
  }
  // Partial Fisher-Yates.
  for (Index k = 0; k < size; ++k) {
    std::uniform_int_distribution<Index> pick(k, complement - 1);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
    out.push_back(pool[static_cast<std::size_t>(k)]);
  }
  return out;
}

AdamOptimizer::AdamOptimizer(const ModelParams& like)
    : first_(map_blocks<Matrix>(like, [](const std::string&, const Matrix& m) {
        return Matrix(Matrix::Zero(m.rows(), m.cols()));
      })),
      second_(first_) {}

void AdamOptimizer::step(ModelParams& params, const ModelParams& grads, const AdamConfig& c) {
  ++steps_;
  const double correct1 = 1.0 - std::pow(c.beta1, static_cast<double>(steps_));
  const double correct2 = 1.0 - std::pow(c.beta2, static_cast<double>(steps_));
  std::vector<Matrix*> p, m, v;
  std::vector<const Matrix*> g;
  for_each_block(params, [&](const std::string&, Matrix& x) { p.push_back(&x); });
  for_each_block(first_, [&](const std::string&, Matrix& x) { m.push_back(&x); });
  for_each_block(second_, [&](const std::string&, Matrix& x) { v.push_back(&x); });
  for_each_block(grads, [&](const std::string&, const Matrix& x) { g.push_back(&x); });
  if (p.size() != g.size() || p.size() != m.size()) throw NumericError("optimizer: parameter layout changed");
  for (std::size_t b = 0; b < p.size(); ++b) {
    auto pa = p[b]->array();
    auto ma = m[b]->array();
    auto va = v[b]->array();
    const auto ga = g[b]->array();
    ma = c.beta1 * ma + (1.0 - c.beta1) * ga;
    va = c.beta2 * va + (1.0 - c.beta2) * ga.square();
    pa -= c.learning_rate * (ma / correct1) / ((va / correct2).sqrt() + c.eps);
  }
}

StepResult train_step(const TrainBatch& batch, ModelParams& params, const NormalizedAdjacency& adjacency,
                      const Hyperparams& hyper, AdamOptimizer& optimizer, std::mt19937_64& dropout_rng) {
  Tape tape;
  const ModelVars vars = bind(tape, params, true);
  const LossGraph g = build_losses(vars, hyper.model, hyper.weights, batch, &adjacency, &dropout_rng);
  StepResult result{loss_values(g.parts, g.total)};
  if (!std::isfinite(result.losses.total)) {
    throw NumericError("non-finite total loss (local=" + std::to_string(result.losses.local) +
                       " global=" + std::to_string(result.losses.global) + " fused=" +
                       std::to_string(result.losses.fused) + " contrastive=" +
                       std::to_string(result.losses.contrastive) + ")");
  }
  tape.backward(g.total);
  ModelParams grads = gradients(tape, vars);
  grads.embedding.items.bottomRows(1).setZero();
  optimizer.step(params, grads, hyper.adam);
  bool finite = true;
  for_each_block(params, [&](const std::string&, const Matrix& m) { finite = finite && m.allFinite(); });
  if (!finite) throw NumericError("parameters became non-finite after the optimizer step");
  return result;
}

std::vector<Index> trainable_users(const SplitDataset& data) {
  std::vector<Index> users;
  for (std::size_t u = 0; u < data.users.size(); ++u) {
    if (data.users[u].train.size() >= 2) users.push_back(static_cast<Index>(u));
  }
  return users;
}

FitResult fit(const SplitDataset& data, Hyperparams hyper, const EpochCallback& on_epoch,
              const NormalizedAdjacency* adjacency_override) {
  hyper.model.n_users = data.n_users;
  hyper.model.n_items = data.n_items;
  hyper.validate();

  const GraphData graph = build_adjacency(data);
  const NormalizedAdjacency& adjacency = adjacency_override ? *adjacency_override : graph.adjacency;
  if (graph.adjacency.isolated_nodes > 0) {
    warn(std::to_string(graph.adjacency.isolated_nodes) + " graph nodes have no training interactions");
  }

  FitResult result;
  result.initial = init_model(hyper.model, hyper.seed);
  result.best = result.initial;
  ModelParams params = result.initial;
  AdamOptimizer optimizer(params);

  std::mt19937_64 order_rng(hyper.seed + 1);
  std::mt19937_64 negative_rng(hyper.seed + 2);
  std::mt19937_64 dropout_rng(hyper.seed + 3);
  std::mt19937_64 target_rng(hyper.seed + 4);
  std::vector<Index> users = trainable_users(data);
  if (users.empty()) throw DataError("no user has at least two training items");
  const bool need_negatives = hyper.weights.beta > 0.0 || hyper.weights.gamma > 0.0;

  Index flat_epochs = 0;
  for (Index epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(users.begin(), users.end(), order_rng);
    LossValues sum;
    Index steps = 0;
    for (std::size_t lo = 0; lo < users.size(); lo += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t hi = std::min(users.size(), lo + static_cast<std::size_t>(hyper.batch_size));
      const std::vector<Index> batch_users(users.begin() + static_cast<std::ptrdiff_t>(lo),
                                           users.begin() + static_cast<std::ptrdiff_t>(hi));
      std::vector<std::vector<Index>> negatives(batch_users.size());
      if (need_negatives) {
        for (std::size_t b = 0; b < batch_users.size(); ++b) {
          negatives[b] = sample_negatives(data.users[static_cast<std::size_t>(batch_users[b])].train,
                                          data.n_items, hyper.negatives, negative_rng);
        }
      }
      std::vector<Index> targets;
      if (hyper.examples == TrainExamples::kRandomPrefix) {
        for (Index u : batch_users) {
          const auto n = static_cast<Index>(data.users[static_cast<std::size_t>(u)].train.size());
          targets.push_back(std::uniform_int_distribution<Index>(1, n - 1)(target_rng));
        }
      }
      const TrainBatch batch =
          make_train_batch(data, batch_users, hyper.model.window, std::move(negatives), targets);
      const StepResult step = train_step(batch, params, adjacency, hyper, optimizer, dropout_rng);
      sum.local += step.losses.local;
      sum.global += step.losses.global;
      sum.fused += step.losses.fused;
      sum.contrastive += step.losses.contrastive;
      sum.total += step.losses.total;
      ++steps;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    const double n = static_cast<double>(std::max<Index>(steps, 1));
    rec.losses = LossValues{sum.local / n, sum.global / n, sum.fused / n, sum.contrastive / n, sum.total / n};
    rec.validation = evaluate(params, hyper.model, data, adjacency, Split::kValidation, hyper.eval);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.validation.ndcg10 > result.best_ndcg10) {
      result.best_ndcg10 = rec.validation.ndcg10;
      result.best_epoch = epoch;
      result.best = params;
      flat_epochs = 0;
    } else if (++flat_epochs >= hyper.patience) {
      break;
    }
  }
  return result;
}

}  // namespace mrgs
