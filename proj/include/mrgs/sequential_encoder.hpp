#pragma once

// Transformer encoder over the user token followed by the item window
// (length c + 1). Pre-layer-norm residual blocks, no final norm, so zero
// layers is the identity map.
//
// Masking (causal mode): item slot i sees the user token and real item slots
// up to i; the user token sees only itself, so the first output row never
// mixes in item content. Padding slots neither see nor are seen.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mrgs/embedding.hpp"
#include "mrgs/numerics.hpp"
#include "mrgs/params.hpp"

namespace mrgs {

enum class AttentionMode { kCausal, kBidirectional };

// Which output row becomes the local user state e_l: the user-token row, or
// the most recent item slot (SASRec convention).
enum class UserState { kFirst, kLast };

struct SeqEncoderConfig {
  Index n_layers = 2;
  Index n_heads = 2;
  Index dim = 64;
  Index d_ff = 256;
  double dropout = 0.2;
  AttentionMode attention = AttentionMode::kCausal;
  UserState user_state = UserState::kFirst;

  void validate() const;
};

std::vector<EncoderLayerParams> init_seq_encoder(const SeqEncoderConfig& config, std::mt19937_64& rng,
                                                 double stddev);

// allowed[b][i][j] over length c + 1 (position 0 = user token), flattened.
std::vector<std::uint8_t> attention_mask(Index window, const std::vector<Index>& valid_lengths,
                                         AttentionMode mode);

struct SeqEncoderOutput {
  Var user_state;  // B x d, e_l
  Var items;       // (B * c) x d, E_l
  Var tokens;      // (B * (c + 1)) x d, full encoder output
};

// dropout_rng == nullptr means inference mode (no dropout).
SeqEncoderOutput seq_encode(const SequenceEmbeddings& input, const std::vector<Index>& valid_lengths,
                            Index window, const std::vector<EncoderLayerBlocks<Var>>& layers,
                            const SeqEncoderConfig& config, std::mt19937_64* dropout_rng);

std::string to_string(AttentionMode mode);
std::string to_string(UserState state);
AttentionMode parse_attention_mode(const std::string& text);
UserState parse_user_state(const std::string& text);

}  // namespace mrgs
