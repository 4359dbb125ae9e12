#pragma once

// Leave-one-out, full-catalog ranking evaluation with HR@{5,10} and
// NDCG@{5,10}.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mrgs/data.hpp"
#include "mrgs/embedding.hpp"
#include "mrgs/graph_encoder.hpp"
#include "mrgs/model.hpp"

namespace mrgs {

enum class Split { kValidation, kTest };

std::string to_string(Split split);
Split parse_split(const std::string& text);

// 1 + number of non-excluded items ranked ahead of the target: strictly
// higher score, or equal score and smaller id.
Index rank_target(std::span<const double> scores, Index target, std::span<const std::uint8_t> excluded);

double hr_at_k(Index rank, Index k);
double ndcg_at_k(Index rank, Index k);

struct MetricsReport {
  std::string split;
  double hr5 = 0.0;
  double hr10 = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  Index n_users = 0;
  bool exclude_seen = true;
  std::string head;
  std::string config_fingerprint;

  // Bounds and monotonicity; throws ProtocolError on violation.
  void check_invariants() const;
};

// Key-value records, one per line.
void write_report(std::ostream& out, const MetricsReport& report);
// Tab-separated header / row for cross-run tables.
std::string report_table_header();
std::string report_table_row(const MetricsReport& report);

struct EvalOptions {
  bool exclude_seen = true;
  Index batch_size = 512;
  unsigned threads = 1;
};

// Per-user evaluation input: the chronological prefix strictly before the
// target event (train for validation, train + validation item for test).
struct EvalCase {
  Index user = 0;
  std::vector<Index> history;
  Index target = 0;
};

std::vector<EvalCase> build_eval_cases(const SplitDataset& data, Split split);

// Fails with ProtocolError unless every case's history is exactly the prefix
// before its target event (so a test input never contains the test event).
void check_eval_inputs(const SplitDataset& data, Split split, const std::vector<EvalCase>& cases);

// scorer(batch) -> batch.size() x N scores.
using Scorer = std::function<Matrix(const SequenceBatch& batch)>;

MetricsReport evaluate_with_scorer(const SplitDataset& data, Split split, Index window, const Scorer& scorer,
                                   const EvalOptions& options);

MetricsReport evaluate(const ModelParams& params, const ModelConfig& config, const SplitDataset& data,
                       const NormalizedAdjacency& adjacency, Split split, const EvalOptions& options);

}  // namespace mrgs
