#include "mrgs/embedding.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "mrgs/error.hpp"

namespace mrgs {

EmbeddingTables init_tables(Index n_users, Index n_items, Index window, Index dim,
                            std::uint64_t seed, double stddev) {
  if (n_users < 1 || n_items < 1 || window < 1 || dim < 1) {
    throw DataError("init_tables: all dimensions must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  const auto draw = [&](Index rows) {
    Matrix m(rows, dim);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  EmbeddingTables t;
  t.users = draw(n_users);
  t.items = draw(n_items + 1);
  t.items.row(n_items).setZero();
  t.positions = draw(window);
  return t;
}

Window truncate_window(const std::vector<Index>& sequence, Index window, Index pad_id, bool allow_empty) {
  if (window < 1) throw DataError("truncate_window: window length must be >= 1");
  if (sequence.empty() && !allow_empty) throw DataError("truncate_window: empty sequence");
  Window w;
  w.length = std::min<Index>(window, static_cast<Index>(sequence.size()));
  w.items.assign(static_cast<std::size_t>(window), pad_id);
  const auto first = sequence.end() - w.length;
  std::copy(first, sequence.end(), w.items.end() - w.length);
  return w;
}

void SequenceBatch::add(Index user, const Window& w) {
  if (static_cast<Index>(w.items.size()) != window) throw NumericError("dimension error: window size");
  user_ids.push_back(user);
  items.insert(items.end(), w.items.begin(), w.items.end());
  valid_lengths.push_back(w.length);
}

SequenceEmbeddings embed_sequence(const SequenceBatch& batch, const EmbeddingBlocks<Var>& tables) {
  const Index c = batch.window;
  if (tables.positions.rows() != c) throw NumericError("dimension error: positional table rows != window");
  const Index pad = tables.items.rows() - 1;
  std::vector<Index> item_ids(batch.items.size());
  std::vector<Index> pos_ids(batch.items.size());
  for (Index b = 0; b < batch.size(); ++b) {
    for (Index t = 0; t < c; ++t) {
      const std::size_t k = static_cast<std::size_t>(b * c + t);
      const bool pad_slot = batch.is_padding(b, t);
      const Index id = batch.items[k];
      if (!pad_slot && (id < 0 || id >= pad)) {
        throw DataError("index error: item id " + std::to_string(id) + " outside catalog");
      }
      item_ids[k] = pad_slot ? pad : id;
      pos_ids[k] = pad_slot ? -1 : t;
    }
  }
  SequenceEmbeddings out;
  out.users = gather_rows(tables.users, batch.user_ids);
  out.items = add(gather_rows(tables.items, item_ids, pad), gather_rows(tables.positions, pos_ids));
  return out;
}

}  // namespace mrgs
