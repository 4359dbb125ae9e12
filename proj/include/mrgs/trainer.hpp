#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrgs/data.hpp"
#include "mrgs/evaluation.hpp"
#include "mrgs/graph_encoder.hpp"
#include "mrgs/model.hpp"
#include "mrgs/objectives.hpp"
#include "mrgs/params.hpp"

namespace mrgs {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Which training item serves as the per-user target in an epoch.
//   last          - always the last training item
//   random_prefix - a uniformly drawn training position >= 1, redrawn every
//                   epoch (the input is the items before it)
enum class TrainExamples { kLast, kRandomPrefix };

std::string to_string(TrainExamples mode);
TrainExamples parse_train_examples(const std::string& text);

struct Hyperparams {
  ModelConfig model;  // n_users / n_items are filled from the dataset by fit()
  LossWeights weights;
  AdamConfig adam;
  Index batch_size = 256;
  Index max_epochs = 200;
  Index patience = 10;
  Index negatives = 100;
  TrainExamples examples = TrainExamples::kLast;
  std::uint64_t seed = 42;
  EvalOptions eval;

  void validate() const;
};

// Uniform draw without replacement from the items the user never touched
// (`user_items` may contain duplicates). Returns fewer than `size` ids, with
// a warning, when the complement is too small.
std::vector<Index> sample_negatives(const std::vector<Index>& user_items, Index n_items, Index size,
                                    std::mt19937_64& rng);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(const ModelParams& like);

  void step(ModelParams& params, const ModelParams& grads, const AdamConfig& config);
  std::int64_t steps() const noexcept { return steps_; }

 private:
  ModelParams first_;
  ModelParams second_;
  std::int64_t steps_ = 0;
};

struct StepResult {
  LossValues losses;
};

// One Adam step on the total loss. The item padding row never moves.
StepResult train_step(const TrainBatch& batch, ModelParams& params, const NormalizedAdjacency& adjacency,
                      const Hyperparams& hyper, AdamOptimizer& optimizer, std::mt19937_64& dropout_rng);

struct EpochRecord {
  Index epoch = 0;
  LossValues losses;  // mean over the epoch's steps
  MetricsReport validation;
  double wall_seconds = 0.0;
};

struct FitResult {
  ModelParams best;
  ModelParams initial;
  Index best_epoch = 0;  // 0 when no epoch ran
  double best_ndcg10 = -1.0;
  std::vector<EpochRecord> log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Users whose train sequence has fewer than two items produce no training
// example (nothing to feed the encoder); they still shape the graph and are
// evaluated.
std::vector<Index> trainable_users(const SplitDataset& data);

// Trains until max_epochs or `patience` epochs without a strict improvement
// of validation NDCG@10; returns the best parameters seen.
FitResult fit(const SplitDataset& data, Hyperparams hyper, const EpochCallback& on_epoch = {},
              const NormalizedAdjacency* adjacency_override = nullptr);

}  // namespace mrgs
