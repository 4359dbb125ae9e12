#pragma once

// Train-then-evaluate drivers shared by the CLI and the acceptance suite.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mrgs/config.hpp"
#include "mrgs/trainer.hpp"

namespace mrgs {

struct RunOutput {
  FitResult fit;
  MetricsReport validation;  // best parameters
  MetricsReport test;
};

// fit() followed by validation and test evaluation of the best parameters.
// Reports carry `fingerprint` and the configured head.
RunOutput train_and_evaluate(const SplitDataset& data, const Hyperparams& hyper, const std::string& fingerprint,
                             const EpochCallback& on_epoch = {},
                             const NormalizedAdjacency* adjacency_override = nullptr);

// One JSON object per epoch: losses, validation metrics, wall time,
// fingerprint and seed.
std::string epoch_log_line(const EpochRecord& record, const std::string& fingerprint, std::uint64_t seed);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  Index best_epoch = 0;
  std::uint64_t data_fingerprint = 0;
  MetricsReport validation;
  MetricsReport test;
};

struct AblationResult {
  std::vector<AblationRow> rows;

  // Mean NDCG@10 over the seeds of one variant (NaN if absent).
  double mean_ndcg10(const std::string& variant, Split split = Split::kTest) const;
};

using AblationProgress = std::function<void(const AblationRow&)>;

// Trains every configured variant for every seed on the same data.
AblationResult run_ablation(const SplitDataset& data, const RunConfig& config,
                            const AblationProgress& progress = {});

// Tab-separated validation and test rows per (variant, seed), followed by
// per-variant means.
std::string ablation_table(const AblationResult& result);

}  // namespace mrgs
