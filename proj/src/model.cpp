#include "mrgs/model.hpp"

#include <cmath>

#include "mrgs/error.hpp"

namespace mrgs {

void ModelConfig::validate() const {
  if (n_users < 1 || n_items < 1) throw DataError("model: empty user or item set");
  if (window < 1 || dim < 1) throw DataError("model: window and dim must be >= 1");
  if (graph_layers < 0) throw DataError("model: graph_layers must be >= 0");
  if (encoder.dim != dim) throw DataError("model: encoder width must equal the embedding size");
  encoder.validate();
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.embedding = init_tables(config.n_users, config.n_items, config.window, config.dim, seed, config.init_stddev);
  // Projections use Xavier-scale normals; a 0.02 scale on both fusion
  // matrices would start the product near a saddle.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double d = static_cast<double>(config.dim);
  p.encoder = init_seq_encoder(config.encoder, rng, std::sqrt(1.0 / d));
  p.fusion = init_fusion(config.dim, rng, std::sqrt(2.0 / (6.0 * d)), config.fusion_init);
  return p;
}

ForwardNeeds ForwardNeeds::for_training(const LossWeights& w, ScoringHead head) {
  ForwardNeeds n = for_scoring(head);
  n.fused = n.fused || w.gamma > 0.0;
  n.sequential = n.sequential || w.alpha > 0.0 || w.delta > 0.0 || n.fused;
  n.graph = n.graph || w.beta > 0.0 || w.delta > 0.0 || n.fused;
  return n;
}

ForwardNeeds ForwardNeeds::for_scoring(ScoringHead head) {
  ForwardNeeds n;
  n.fused = head == ScoringHead::kFused;
  n.sequential = head != ScoringHead::kGraph;
  n.graph = head != ScoringHead::kSequential;
  return n;
}

ForwardPass forward(const ModelVars& vars, const ModelConfig& config, const SequenceBatch& batch,
                    const NormalizedAdjacency* adjacency, ForwardNeeds needs, std::mt19937_64* dropout_rng,
                    Var graph_nodes) {
  ForwardPass out;
  if (needs.sequential) {
    const SequenceEmbeddings emb = embed_sequence(batch, vars.embedding);
    out.local = seq_encode(emb, batch.valid_lengths, batch.window, vars.encoder, config.encoder, dropout_rng);
  }
  if (needs.graph) {
    if (!graph_nodes.valid()) {
      if (adjacency == nullptr) throw NumericError("forward: graph path requested without adjacency");
      graph_nodes = graph_embeddings(vars.embedding, *adjacency, config.graph_layers, config.readout);
    }
    out.graph_nodes = graph_nodes;
    out.global = graph_gather(graph_nodes, config.n_users, batch);
  }
  if (needs.fused) out.fused = fuse(out.local.user_state, out.global.user_state, vars.fusion);
  return out;
}

TrainBatch make_train_batch(const SplitDataset& data, const std::vector<Index>& users, Index window,
                            std::vector<std::vector<Index>> negatives, const std::vector<Index>& targets) {
  if (negatives.size() != users.size()) throw NumericError("make_train_batch: one negative list per user");
  if (!targets.empty() && targets.size() != users.size()) {
    throw NumericError("make_train_batch: one target position per user");
  }
  TrainBatch tb;
  tb.inputs.window = window;
  tb.inputs.pad_id = data.n_items;
  tb.negatives = std::move(negatives);
  for (std::size_t k = 0; k < users.size(); ++k) {
    const Index u = users[k];
    const auto& train = data.users.at(static_cast<std::size_t>(u)).train;
    if (train.size() < 2) throw DataError("make_train_batch: user needs at least two training items");
    const Index at = targets.empty() ? static_cast<Index>(train.size()) - 1 : targets[k];
    if (at < 1 || at >= static_cast<Index>(train.size())) {
      throw DataError("make_train_batch: target position out of range");
    }
    const Index target = train[static_cast<std::size_t>(at)];
    const std::vector<Index> prefix(train.begin(), train.begin() + at);
    const Window w = truncate_window(prefix, window, data.n_items);
    tb.inputs.add(u, w);
    const Index b = tb.inputs.size() - 1;
    for (Index t = 0; t < window; ++t) {
      if (tb.inputs.is_padding(b, t)) {
        tb.next_items.push_back(-1);
      } else {
        tb.next_items.push_back(t + 1 < window ? w.items[static_cast<std::size_t>(t + 1)] : target);
      }
    }
    tb.positives.push_back(target);
  }
  return tb;
}

LossGraph build_losses(const ModelVars& vars, const ModelConfig& config, const LossWeights& weights,
                       const TrainBatch& batch, const NormalizedAdjacency* adjacency, std::mt19937_64* dropout_rng) {
  Tape& tape = *vars.embedding.users.tape();
  const ForwardNeeds needs = ForwardNeeds::for_training(weights, config.head);
  const ForwardPass fp = forward(vars, config, batch.inputs, adjacency, needs, dropout_rng);
  const Index B = batch.inputs.size();
  const Index N = config.n_items;
  const Index M = config.n_users;
  const double divisor = static_cast<double>(B);
  const Var items = slice_rows(vars.embedding.items, 0, N);

  LossGraph g;
  if (weights.alpha > 0.0) g.parts.local = local_loss(fp.local.items, batch.next_items, items);
  if (weights.beta > 0.0) {
    std::vector<Index> rows, pos_nodes, neg_nodes, users, pos_items, neg_items;
    for (Index b = 0; b < B; ++b) {
      const auto& negs = batch.negatives[static_cast<std::size_t>(b)];
      if (negs.empty()) continue;
      rows.push_back(b);
      pos_nodes.push_back(M + batch.positives[static_cast<std::size_t>(b)]);
      neg_nodes.push_back(M + negs.front());
      users.push_back(batch.inputs.user_ids[static_cast<std::size_t>(b)]);
      pos_items.push_back(batch.positives[static_cast<std::size_t>(b)]);
      neg_items.push_back(negs.front());
    }
    const Var ego = concat_rows(gather_rows(vars.embedding.users, users),
                                concat_rows(gather_rows(items, pos_items), gather_rows(items, neg_items)));
    g.parts.global = global_loss(gather_rows(fp.global.user_state, rows), gather_rows(fp.graph_nodes, pos_nodes),
                                 gather_rows(fp.graph_nodes, neg_nodes), ego, weights.lambda_reg);
  }
  if (weights.gamma > 0.0) g.parts.fused = fused_loss(fp.fused, items, batch.positives, batch.negatives, divisor);
  if (weights.delta > 0.0) {
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(B * batch.inputs.window));
    for (Index b = 0; b < B; ++b) {
      for (Index t = 0; t < batch.inputs.window; ++t) {
        valid[static_cast<std::size_t>(b * batch.inputs.window + t)] = batch.inputs.is_padding(b, t) ? 0 : 1;
      }
    }
    g.parts.contrastive = contrastive_loss(fp.local.items, fp.global.items, valid, batch.inputs.window, divisor);
  }
  g.total = total_loss(tape, g.parts, weights);
  return g;
}

Matrix graph_nodes(const ModelParams& params, const ModelConfig& config, const NormalizedAdjacency& adjacency) {
  Tape tape;
  const ModelVars vars = bind(tape, params, false);
  return graph_embeddings(vars.embedding, adjacency, config.graph_layers, config.readout).value();
}

Matrix score_batch(const ModelParams& params, const ModelConfig& config, const SequenceBatch& batch,
                   const Matrix* nodes) {
  Tape tape;
  const ModelVars vars = bind(tape, params, false);
  const ForwardNeeds needs = ForwardNeeds::for_scoring(config.head);
  Var node_var;
  if (needs.graph) {
    if (nodes == nullptr) throw NumericError("score_batch: graph head needs propagated node embeddings");
    node_var = tape.constant(*nodes);
  }
  const ForwardPass fp = forward(vars, config, batch, nullptr, needs, nullptr, node_var);
  const Index N = config.n_items;
  switch (config.head) {
    case ScoringHead::kSequential:
      return score_items(fp.local.user_state.value(), params.embedding.items.topRows(N));
    case ScoringHead::kGraph:
      return score_items(fp.global.user_state.value(), nodes->bottomRows(N));
    case ScoringHead::kFused:
      break;
  }
  return score_items(fp.fused.value(), params.embedding.items.topRows(N));
}

std::string to_string(ScoringHead head) {
  switch (head) {
    case ScoringHead::kFused: return "fused";
    case ScoringHead::kSequential: return "sequential";
    case ScoringHead::kGraph: return "graph";
  }
  return "fused";
}

ScoringHead parse_scoring_head(const std::string& text) {
  if (text == "fused") return ScoringHead::kFused;
  if (text == "sequential") return ScoringHead::kSequential;
  if (text == "graph") return ScoringHead::kGraph;
  throw ParseError("unknown scoring head '" + text + "'");
}

}  // namespace mrgs
