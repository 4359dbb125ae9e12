#pragma once

// Parameter layout shared by stored values (Matrix) and their taped handles
// (Var). Block names and visiting order are canonical: checkpoints, the
// optimizer and the gradient checker all rely on them.

#include <string>
#include <utility>
#include <vector>

#include "mrgs/numerics.hpp"

namespace mrgs {

template <class T>
struct EmbeddingBlocks {
  T users;      // M x d
  T items;      // (N + 1) x d, row N is padding
  T positions;  // c x d
};

template <class T>
struct EncoderLayerBlocks {
  T ln1_gain, ln1_bias;  // 1 x d
  T wq, wk, wv, wo;      // d x d, applied as x * W^T
  T ln2_gain, ln2_bias;  // 1 x d
  T ff1_w;               // d_ff x d
  T ff1_b;               // 1 x d_ff
  T ff2_w;               // d x d_ff
  T ff2_b;               // 1 x d
};

template <class T>
struct FusionBlocks {
  T w1;  // 4d x 2d
  T w2;  // d x 4d
};

template <class T>
struct ModelBlocks {
  EmbeddingBlocks<T> embedding;
  std::vector<EncoderLayerBlocks<T>> encoder;
  FusionBlocks<T> fusion;
};

using EmbeddingTables = EmbeddingBlocks<Matrix>;
using EncoderLayerParams = EncoderLayerBlocks<Matrix>;
using FusionParams = FusionBlocks<Matrix>;
using ModelParams = ModelBlocks<Matrix>;
using ModelVars = ModelBlocks<Var>;

template <class Layer, class F>
void for_each_layer_block(Layer& l, const std::string& prefix, F&& f) {
  f(prefix + "ln1_gain", l.ln1_gain);
  f(prefix + "ln1_bias", l.ln1_bias);
  f(prefix + "wq", l.wq);
  f(prefix + "wk", l.wk);
  f(prefix + "wv", l.wv);
  f(prefix + "wo", l.wo);
  f(prefix + "ln2_gain", l.ln2_gain);
  f(prefix + "ln2_bias", l.ln2_bias);
  f(prefix + "ff1_w", l.ff1_w);
  f(prefix + "ff1_b", l.ff1_b);
  f(prefix + "ff2_w", l.ff2_w);
  f(prefix + "ff2_b", l.ff2_b);
}

// Visits (name, block) for every learnable block in canonical order.
template <class Model, class F>
void for_each_block(Model& m, F&& f) {
  f(std::string("user_table"), m.embedding.users);
  f(std::string("item_table"), m.embedding.items);
  f(std::string("positional_table"), m.embedding.positions);
  for (std::size_t i = 0; i < m.encoder.size(); ++i) {
    for_each_layer_block(m.encoder[i], "encoder" + std::to_string(i) + ".", f);
  }
  f(std::string("fusion.w1"), m.fusion.w1);
  f(std::string("fusion.w2"), m.fusion.w2);
}

// Same-shaped structure with each block replaced by g(name, block).
template <class Out, class In, class G>
ModelBlocks<Out> map_blocks(In& in, G&& g) {
  ModelBlocks<Out> out;
  out.encoder.resize(in.encoder.size());
  std::vector<Out*> slots;
  for_each_block(out, [&](const std::string&, Out& o) { slots.push_back(&o); });
  std::size_t i = 0;
  for_each_block(in, [&](const std::string& name, auto& block) { *slots[i++] = g(name, block); });
  return out;
}

// Binds stored values onto a tape, as leaves when trainable, else constants.
inline ModelVars bind(Tape& tape, const ModelParams& params, bool trainable) {
  return map_blocks<Var>(params, [&](const std::string&, const Matrix& m) {
    return trainable ? tape.leaf(m) : tape.constant(m);
  });
}

// Reads gradients for every bound block after tape.backward().
inline ModelParams gradients(Tape& tape, const ModelVars& vars) {
  return map_blocks<Matrix>(vars, [&](const std::string&, const Var& v) { return tape.grad(v); });
}

}  // namespace mrgs
