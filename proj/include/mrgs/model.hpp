#pragma once

// Wires the embedding tables, both encoders, the fusion block and the four
// objectives into one forward pass.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mrgs/data.hpp"
#include "mrgs/embedding.hpp"
#include "mrgs/fusion.hpp"
#include "mrgs/graph_encoder.hpp"
#include "mrgs/objectives.hpp"
#include "mrgs/params.hpp"
#include "mrgs/sequential_encoder.hpp"

namespace mrgs {

// Embedding scored against the item catalog at inference.
// kSequential: e_l against I_e. kGraph: e_g against the propagated item rows
// (what the BPR objective trains). kFused: e_f against I_e.
enum class ScoringHead { kFused, kSequential, kGraph };

struct ModelConfig {
  Index n_users = 0;
  Index n_items = 0;
  Index window = 50;
  Index dim = 64;
  Index graph_layers = 2;
  GraphReadout readout = GraphReadout::kLast;
  SeqEncoderConfig encoder;  // encoder.dim is kept equal to dim
  ScoringHead head = ScoringHead::kFused;
  double init_stddev = kInitStddev;
  FusionInit fusion_init = FusionInit::kRandom;

  void validate() const;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardNeeds {
  bool sequential = true;
  bool graph = true;
  bool fused = true;

  static ForwardNeeds for_training(const LossWeights& w, ScoringHead head);
  static ForwardNeeds for_scoring(ScoringHead head);
};

struct ForwardPass {
  SeqEncoderOutput local;
  Var graph_nodes;  // (M + N) x d after propagation/readout
  GraphEncoderOutput global;
  Var fused;
};

// graph_nodes may be supplied (already propagated) to skip propagation.
ForwardPass forward(const ModelVars& vars, const ModelConfig& config, const SequenceBatch& batch,
                    const NormalizedAdjacency* adjacency, ForwardNeeds needs, std::mt19937_64* dropout_rng,
                    Var graph_nodes = {});

struct TrainBatch {
  SequenceBatch inputs;
  std::vector<Index> next_items;  // per window slot; -1 at padding
  std::vector<Index> positives;   // training target per row
  std::vector<std::vector<Index>> negatives;
};

// One example per user: input = train items before the target, target = train
// item at position targets[k] (default: the last one). Users need at least two
// training items.
TrainBatch make_train_batch(const SplitDataset& data, const std::vector<Index>& users, Index window,
                            std::vector<std::vector<Index>> negatives, const std::vector<Index>& targets = {});

struct LossGraph {
  LossComponents parts;  // zero-weight components are not built
  Var total;
};

LossGraph build_losses(const ModelVars& vars, const ModelConfig& config, const LossWeights& weights,
                       const TrainBatch& batch, const NormalizedAdjacency* adjacency, std::mt19937_64* dropout_rng);

// Propagated node embeddings for inference (untaped).
Matrix graph_nodes(const ModelParams& params, const ModelConfig& config, const NormalizedAdjacency& adjacency);

// B x N full-catalog scores for the configured head. nodes must come from
// graph_nodes() when the head needs the graph.
Matrix score_batch(const ModelParams& params, const ModelConfig& config, const SequenceBatch& batch,
                   const Matrix* nodes);

std::string to_string(ScoringHead head);
ScoringHead parse_scoring_head(const std::string& text);

}  // namespace mrgs
