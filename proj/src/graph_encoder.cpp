#include "mrgs/graph_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mrgs/error.hpp"

namespace mrgs {

bool InteractionMatrix::contains(Index user, Index item) const {
  const auto first = col_indices.begin() + row_offsets[static_cast<std::size_t>(user)];
  const auto last = col_indices.begin() + row_offsets[static_cast<std::size_t>(user) + 1];
  return std::binary_search(first, last, item);
}

InteractionMatrix build_interaction_matrix(const SplitDataset& split) {
  InteractionMatrix r;
  r.n_users = split.n_users;
  r.n_items = split.n_items;
  r.row_offsets.reserve(static_cast<std::size_t>(r.n_users) + 1);
  r.row_offsets.push_back(0);
  for (const auto& u : split.users) {
    std::vector<Index> row = u.train;
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (Index i : row) {
      if (i < 0 || i >= r.n_items) throw DataError("index error: item id outside catalog in train split");
    }
    r.col_indices.insert(r.col_indices.end(), row.begin(), row.end());
    r.row_offsets.push_back(static_cast<Index>(r.col_indices.size()));
  }
  if (r.nnz() == 0) throw DataError("empty graph: no training interactions");
  return r;
}

NormalizedAdjacency normalize_adjacency(const InteractionMatrix& r) {
  const Index M = r.n_users;
  const Index N = r.n_items;
  if (r.nnz() == 0) throw DataError("empty graph: no training interactions");

  NormalizedAdjacency adj;
  adj.n_users = M;
  adj.n_items = N;
  adj.degrees.assign(static_cast<std::size_t>(M + N), 0.0);
  std::vector<std::vector<Index>> item_users(static_cast<std::size_t>(N));
  for (Index u = 0; u < M; ++u) {
    for (Index p = r.row_offsets[u]; p < r.row_offsets[u + 1]; ++p) {
      const Index i = r.col_indices[p];
      adj.degrees[u] += 1.0;
      adj.degrees[M + i] += 1.0;
      item_users[i].push_back(u);  // ascending in u
    }
  }
  // Only called for edges, so both degrees are positive.
  const auto weight = [&](Index a, Index b) {
    return 1.0 / std::sqrt(adj.degrees[a] * adj.degrees[b]);
  };

  auto m = std::make_shared<CsrMatrix>();
  m->rows = M + N;
  m->cols = M + N;
  m->row_offsets.push_back(0);
  for (Index u = 0; u < M; ++u) {
    for (Index p = r.row_offsets[u]; p < r.row_offsets[u + 1]; ++p) {
      const Index node = M + r.col_indices[p];
      m->col_indices.push_back(node);
      m->values.push_back(weight(u, node));
    }
    m->row_offsets.push_back(m->nnz());
  }
  for (Index i = 0; i < N; ++i) {
    for (Index u : item_users[i]) {
      m->col_indices.push_back(u);
      m->values.push_back(weight(u, M + i));
    }
    m->row_offsets.push_back(m->nnz());
  }
  adj.isolated_nodes = std::count(adj.degrees.begin(), adj.degrees.end(), 0.0);
  adj.matrix = std::move(m);
  return adj;
}

GraphData build_adjacency(const SplitDataset& split) {
  GraphData g;
  g.interactions = build_interaction_matrix(split);
  g.adjacency = normalize_adjacency(g.interactions);
  return g;
}

Matrix propagate(const Matrix& embeddings, const NormalizedAdjacency& adjacency) {
  if (embeddings.rows() != adjacency.n_nodes()) throw NumericError("dimension error in propagate");
  return sparse_dense_product(*adjacency.matrix, embeddings);
}

Var propagate(Var embeddings, const NormalizedAdjacency& adjacency) {
  if (embeddings.rows() != adjacency.n_nodes()) throw NumericError("dimension error in propagate");
  return sparse_matmul(adjacency.matrix, embeddings);
}

Var graph_embeddings(const EmbeddingBlocks<Var>& tables, const NormalizedAdjacency& adjacency, Index layers,
                     GraphReadout readout) {
  if (layers < 0) throw DataError("graph encoder: layer count must be >= 0");
  const Index n_items = tables.items.rows() - 1;
  if (tables.users.rows() != adjacency.n_users || n_items != adjacency.n_items) {
    throw NumericError("dimension error: embedding tables do not match the graph");
  }
  Var e = concat_rows(tables.users, slice_rows(tables.items, 0, n_items));
  Var total = e;
  for (Index k = 0; k < layers; ++k) {
    e = propagate(e, adjacency);
    if (readout == GraphReadout::kMean) total = add(total, e);
  }
  if (readout == GraphReadout::kMean) return scale(total, 1.0 / static_cast<double>(layers + 1));
  return e;
}

GraphEncoderOutput graph_gather(Var node_embeddings, Index n_users, const SequenceBatch& batch) {
  const Index c = batch.window;
  const Index n_items = node_embeddings.rows() - n_users;
  std::vector<Index> item_rows(batch.items.size());
  for (Index b = 0; b < batch.size(); ++b) {
    const Index u = batch.user_ids[static_cast<std::size_t>(b)];
    if (u < 0 || u >= n_users) throw DataError("index error: user id outside graph");
    for (Index t = 0; t < c; ++t) {
      const std::size_t k = static_cast<std::size_t>(b * c + t);
      if (batch.is_padding(b, t)) {
        item_rows[k] = -1;
        continue;
      }
      const Index i = batch.items[k];
      if (i < 0 || i >= n_items) throw DataError("index error: item id outside graph");
      item_rows[k] = n_users + i;
    }
  }
  return GraphEncoderOutput{gather_rows(node_embeddings, batch.user_ids), gather_rows(node_embeddings, item_rows)};
}

void write_adjacency(std::ostream& out, const NormalizedAdjacency& adjacency) {
  const CsrMatrix& m = *adjacency.matrix;
  char buf[64];
  for (Index r = 0; r < m.rows; ++r) {
    for (Index p = m.row_offsets[r]; p < m.row_offsets[r + 1]; ++p) {
      std::snprintf(buf, sizeof buf, "%.17g", m.values[p]);
      out << r << ' ' << m.col_indices[p] << ' ' << buf << '\n';
    }
  }
}

std::string to_string(GraphReadout readout) { return readout == GraphReadout::kLast ? "last" : "mean"; }

GraphReadout parse_graph_readout(const std::string& text) {
  if (text == "last") return GraphReadout::kLast;
  if (text == "mean") return GraphReadout::kMean;
  throw ParseError("unknown graph readout '" + text + "'");
}

}  // namespace mrgs
