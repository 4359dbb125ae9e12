#include "mrgs/sequential_encoder.hpp"

#include "mrgs/error.hpp"

namespace mrgs {

void SeqEncoderConfig::validate() const {
  if (n_layers < 0) throw DataError("encoder: n_layers must be >= 0");
  if (n_heads < 1 || dim < 1 || dim % n_heads != 0) throw DataError("encoder: dim must be divisible by n_heads");
  if (d_ff < 1) throw DataError("encoder: d_ff must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("encoder: dropout must lie in [0, 1)");
}

std::vector<EncoderLayerParams> init_seq_encoder(const SeqEncoderConfig& config, std::mt19937_64& rng,
                                                 double stddev) {
  config.validate();
  std::normal_distribution<double> normal(0.0, stddev);
  const auto draw = [&](Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  const Index d = config.dim;
  std::vector<EncoderLayerParams> layers;
  for (Index l = 0; l < config.n_layers; ++l) {
    EncoderLayerParams p;
    p.ln1_gain = Matrix::Ones(1, d);
    p.ln1_bias = Matrix::Zero(1, d);
    p.wq = draw(d, d);
    p.wk = draw(d, d);
    p.wv = draw(d, d);
    p.wo = draw(d, d);
    p.ln2_gain = Matrix::Ones(1, d);
    p.ln2_bias = Matrix::Zero(1, d);
    p.ff1_w = draw(config.d_ff, d);
    p.ff1_b = Matrix::Zero(1, config.d_ff);
    p.ff2_w = draw(d, config.d_ff);
    p.ff2_b = Matrix::Zero(1, d);
    layers.push_back(std::move(p));
  }
  return layers;
}

std::vector<std::uint8_t> attention_mask(Index window, const std::vector<Index>& valid_lengths,
                                         AttentionMode mode) {
  const Index L = window + 1;
  std::vector<std::uint8_t> mask(valid_lengths.size() * static_cast<std::size_t>(L * L), 0);
  for (std::size_t b = 0; b < valid_lengths.size(); ++b) {
    if (valid_lengths[b] < 0 || valid_lengths[b] > window) throw DataError("attention_mask: length exceeds window");
    const Index first_real = 1 + window - valid_lengths[b];  // token index of the first real item
    std::uint8_t* m = mask.data() + b * static_cast<std::size_t>(L * L);
    const auto visible = [&](Index j) { return j == 0 || j >= first_real; };
    for (Index i = 0; i < L; ++i) {
      if (!visible(i)) continue;
      for (Index j = 0; j < L; ++j) {
        if (!visible(j)) continue;
        bool ok = true;
        if (mode == AttentionMode::kCausal) ok = (i == 0) ? (j == 0) : (j <= i);
        m[i * L + j] = ok ? 1 : 0;
      }
    }
  }
  return mask;
}

SeqEncoderOutput seq_encode(const SequenceEmbeddings& input, const std::vector<Index>& valid_lengths,
                            Index window, const std::vector<EncoderLayerBlocks<Var>>& layers,
                            const SeqEncoderConfig& config, std::mt19937_64* dropout_rng) {
  const Index B = input.users.rows();
  const Index c = window;
  const Index L = c + 1;
  const Index d = input.users.cols();
  if (input.items.rows() != B * c || input.items.cols() != d || static_cast<Index>(valid_lengths.size()) != B) {
    throw NumericError("dimension error in seq_encode: input shapes disagree with window/batch");
  }
  if (d % config.n_heads != 0) throw NumericError("dimension error in seq_encode: width not divisible by heads");

  // Interleave [user_b, items_b...] into stacked rows of length c + 1.
  std::vector<Index> order(static_cast<std::size_t>(B * L));
  for (Index b = 0; b < B; ++b) {
    order[static_cast<std::size_t>(b * L)] = b;
    for (Index t = 0; t < c; ++t) order[static_cast<std::size_t>(b * L + 1 + t)] = B + b * c + t;
  }
  Var x = gather_rows(concat_rows(input.users, input.items), order);

  auto mask = std::make_shared<const std::vector<std::uint8_t>>(attention_mask(c, valid_lengths, config.attention));
  const AttentionLayout layout{B, L, config.n_heads};
  const double rate = dropout_rng ? config.dropout : 0.0;
  std::mt19937_64 unused;
  std::mt19937_64& rng = dropout_rng ? *dropout_rng : unused;

  for (const auto& p : layers) {
    const Var h = layer_norm(x, p.ln1_gain, p.ln1_bias);
    const Var attn = masked_attention(matmul_nt(h, p.wq), matmul_nt(h, p.wk), matmul_nt(h, p.wv), layout, mask);
    x = add(x, dropout(matmul_nt(attn, p.wo), rate, rng));
    const Var h2 = layer_norm(x, p.ln2_gain, p.ln2_bias);
    const Var ff = add_row(matmul_nt(relu(add_row(matmul_nt(h2, p.ff1_w), p.ff1_b)), p.ff2_w), p.ff2_b);
    x = add(x, dropout(ff, rate, rng));
  }

  std::vector<Index> state_rows(static_cast<std::size_t>(B));
  std::vector<Index> item_rows(static_cast<std::size_t>(B * c));
  for (Index b = 0; b < B; ++b) {
    state_rows[static_cast<std::size_t>(b)] = config.user_state == UserState::kFirst ? b * L : b * L + c;
    for (Index t = 0; t < c; ++t) item_rows[static_cast<std::size_t>(b * c + t)] = b * L + 1 + t;
  }
  return SeqEncoderOutput{gather_rows(x, state_rows), gather_rows(x, item_rows), x};
}

std::string to_string(AttentionMode mode) { return mode == AttentionMode::kCausal ? "causal" : "bidirectional"; }
std::string to_string(UserState state) { return state == UserState::kFirst ? "first" : "last"; }

AttentionMode parse_attention_mode(const std::string& text) {
  if (text == "causal") return AttentionMode::kCausal;
  if (text == "bidirectional") return AttentionMode::kBidirectional;
  throw ParseError("unknown attention mode '" + text + "'");
}

UserState parse_user_state(const std::string& text) {
  if (text == "first") return UserState::kFirst;
  if (text == "last") return UserState::kLast;
  throw ParseError("unknown user_state '" + text + "'");
}

}  // namespace mrgs
