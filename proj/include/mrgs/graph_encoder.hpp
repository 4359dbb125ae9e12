#pragma once

// Bipartite user-item graph: binary interaction matrix R from training
// sequences, A = [[0, R], [R^T, 0]] over M + N nodes (users first), and the
// symmetric normalisation D^{-1/2} A D^{-1/2}. Zero-degree nodes get a zero
// row (0^{-1/2} := 0).

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mrgs/data.hpp"
#include "mrgs/embedding.hpp"
#include "mrgs/numerics.hpp"

namespace mrgs {

struct InteractionMatrix {
  Index n_users = 0;
  Index n_items = 0;
  std::vector<Index> row_offsets;  // n_users + 1
  std::vector<Index> col_indices;  // sorted, deduplicated per row

  Index nnz() const noexcept { return static_cast<Index>(col_indices.size()); }
  bool contains(Index user, Index item) const;
};

struct NormalizedAdjacency {
  Index n_users = 0;
  Index n_items = 0;
  std::shared_ptr<const CsrMatrix> matrix;  // (M + N) x (M + N)
  std::vector<double> degrees;              // D_ii
  Index isolated_nodes = 0;

  Index n_nodes() const noexcept { return n_users + n_items; }
};

struct GraphData {
  InteractionMatrix interactions;
  NormalizedAdjacency adjacency;
};

// Training interactions only: validation and test targets never become edges.
InteractionMatrix build_interaction_matrix(const SplitDataset& split);
NormalizedAdjacency normalize_adjacency(const InteractionMatrix& r);
GraphData build_adjacency(const SplitDataset& split);

// One propagation layer: D^{-1/2} A D^{-1/2} E.
Matrix propagate(const Matrix& embeddings, const NormalizedAdjacency& adjacency);
Var propagate(Var embeddings, const NormalizedAdjacency& adjacency);

// Final representation: the last layer (default), or the mean of layers 0..k.
enum class GraphReadout { kLast, kMean };

// E_g^(0) = [U_e; I_e without the padding row], then k propagation layers.
Var graph_embeddings(const EmbeddingBlocks<Var>& tables, const NormalizedAdjacency& adjacency, Index layers,
                     GraphReadout readout);

struct GraphEncoderOutput {
  Var user_state;  // B x d, e_g
  Var items;       // (B * c) x d, E_g (zero rows at padding slots)
};

// Gathers batch rows from propagated node embeddings (users first, then items).
GraphEncoderOutput graph_gather(Var node_embeddings, Index n_users, const SequenceBatch& batch);

// Text triples "row col weight", sorted by (row, col).
void write_adjacency(std::ostream& out, const NormalizedAdjacency& adjacency);

std::string to_string(GraphReadout readout);
GraphReadout parse_graph_readout(const std::string& text);

}  // namespace mrgs
