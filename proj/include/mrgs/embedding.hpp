#pragma once

#include <cstdint>
#include <vector>

#include "mrgs/numerics.hpp"
#include "mrgs/params.hpp"

namespace mrgs {

inline constexpr double kInitStddev = 0.02;

// N(0, stddev^2) entries, deterministic under seed; the item padding row
// (index N) is zero.
EmbeddingTables init_tables(Index n_users, Index n_items, Index window, Index dim,
                            std::uint64_t seed, double stddev = kInitStddev);

inline Index padding_id(const EmbeddingTables& t) { return t.items.rows() - 1; }

struct Window {
  std::vector<Index> items;  // length c, left padded with pad_id
  Index length = 0;          // number of real items, right aligned
};

// Keeps the last min(|sequence|, c) items right-aligned in a length-c window.
// An empty sequence is rejected unless allow_empty is set.
Window truncate_window(const std::vector<Index>& sequence, Index window, Index pad_id,
                       bool allow_empty = false);

struct SequenceBatch {
  Index window = 0;
  Index pad_id = 0;
  std::vector<Index> user_ids;
  std::vector<Index> items;          // size() * window, row-major
  std::vector<Index> valid_lengths;

  Index size() const noexcept { return static_cast<Index>(user_ids.size()); }
  bool is_padding(Index row, Index slot) const noexcept { return slot < window - valid_lengths[row]; }
  void add(Index user, const Window& w);
};

struct SequenceEmbeddings {
  Var users;  // B x d, e^u
  Var items;  // (B * c) x d, E^u with positions added at real slots
};

SequenceEmbeddings embed_sequence(const SequenceBatch& batch, const EmbeddingBlocks<Var>& tables);

}  // namespace mrgs
