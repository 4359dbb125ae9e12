#include "mrgs/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "mrgs/error.hpp"
#include "mrgs/log.hpp"

namespace mrgs {

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma, delta, lambda_reg}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("loss weights must be finite and >= 0");
  }
}

Var local_loss(Var rows, const std::vector<Index>& targets, Var item_table) {
  if (static_cast<Index>(targets.size()) != rows.rows()) throw NumericError("dimension error in local_loss");
  std::vector<Index> keep;
  std::vector<Index> kept_targets;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0) continue;
    if (targets[r] >= item_table.rows()) throw DataError("index error: local target outside catalog");
    keep.push_back(static_cast<Index>(r));
    kept_targets.push_back(targets[r]);
  }
  if (keep.empty()) throw DataError("local_loss: no valid positions");
  const Var logits = matmul_nt(gather_rows(rows, keep), item_table);
  const std::vector<double> weights(keep.size(), 1.0 / static_cast<double>(keep.size()));
  return cross_entropy(logits, kept_targets, weights);
}

Var global_loss(Var users, Var positives, Var negatives, Var ego_rows, double lambda_reg) {
  Tape& tape = *users.tape();
  const Index pairs = users.rows();
  if (positives.rows() != pairs || negatives.rows() != pairs) throw NumericError("dimension error in global_loss");
  if (pairs == 0) return tape.constant(Matrix::Zero(1, 1));
  std::vector<Index> order(static_cast<std::size_t>(2 * pairs));
  for (Index p = 0; p < pairs; ++p) {
    order[static_cast<std::size_t>(2 * p)] = p;
    order[static_cast<std::size_t>(2 * p + 1)] = pairs + p;
  }
  const Var candidates = gather_rows(concat_rows(positives, negatives), order);
  const Var logits = grouped_row_dot(users, candidates, 2);
  const Var bpr = cross_entropy(logits, std::vector<Index>(static_cast<std::size_t>(pairs), 0),
                                std::vector<double>(static_cast<std::size_t>(pairs), 1.0 / static_cast<double>(pairs)));
  if (lambda_reg == 0.0) return bpr;
  return add(bpr, scale(sum_squares(ego_rows), lambda_reg / static_cast<double>(pairs)));
}

Var fused_loss(Var fused, Var item_table, const std::vector<Index>& positives,
               const std::vector<std::vector<Index>>& negatives, double divisor) {
  const Index B = fused.rows();
  if (static_cast<Index>(positives.size()) != B || static_cast<Index>(negatives.size()) != B) {
    throw NumericError("dimension error in fused_loss");
  }
  if (!(divisor > 0.0)) throw NumericError("fused_loss: divisor must be positive");
  std::size_t widest = 0;
  for (const auto& n : negatives) widest = std::max(widest, n.size());
  if (widest == 0) warn("fused loss: empty negative sample, loss degenerates to 0");
  const Index group = static_cast<Index>(widest) + 1;

  std::vector<Index> ids(static_cast<std::size_t>(B * group), -1);
  std::vector<std::uint8_t> allowed(ids.size(), 0);
  for (Index b = 0; b < B; ++b) {
    const std::size_t base = static_cast<std::size_t>(b * group);
    ids[base] = positives[static_cast<std::size_t>(b)];
    allowed[base] = 1;
    const auto& negs = negatives[static_cast<std::size_t>(b)];
    for (std::size_t j = 0; j < negs.size(); ++j) {
      ids[base + 1 + j] = negs[j];
      allowed[base + 1 + j] = 1;
    }
  }
  for (Index id : ids) {
    if (id >= item_table.rows()) throw DataError("index error: fused-loss candidate outside catalog");
  }
  const Var logits = grouped_row_dot(fused, gather_rows(item_table, ids), group);
  return cross_entropy(logits, std::vector<Index>(static_cast<std::size_t>(B), 0),
                       std::vector<double>(static_cast<std::size_t>(B), 1.0 / divisor), allowed);
}

Var contrastive_loss(Var local_items, Var global_items, const std::vector<std::uint8_t>& valid, Index window,
                     double divisor) {
  const Index rows = local_items.rows();
  if (window < 1 || rows % window != 0 || static_cast<Index>(valid.size()) != rows) {
    throw NumericError("dimension error in contrastive_loss");
  }
  if (!(divisor > 0.0)) throw NumericError("contrastive_loss: divisor must be positive");
  const Var logits = block_matmul_nt(local_items, global_items, window);
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(rows * window), 0);
  std::vector<Index> targets(static_cast<std::size_t>(rows), 0);
  std::vector<double> weights(static_cast<std::size_t>(rows), 0.0);
  for (Index r = 0; r < rows; ++r) {
    const Index b = r / window;
    const Index i = r % window;
    if (!valid[static_cast<std::size_t>(r)]) continue;
    targets[static_cast<std::size_t>(r)] = i;
    weights[static_cast<std::size_t>(r)] = 1.0 / divisor;
    for (Index j = 0; j < window; ++j) {
      allowed[static_cast<std::size_t>(r * window + j)] = valid[static_cast<std::size_t>(b * window + j)];
    }
  }
  return cross_entropy(logits, targets, weights, allowed);
}

Var total_loss(Tape& tape, const LossComponents& parts, const LossWeights& weights) {
  weights.validate();
  Var total = tape.constant(Matrix::Zero(1, 1));
  const auto term = [&](const char* name, Var part, double w) {
    if (part.valid() && !std::isfinite(part.value()(0, 0))) {
      throw NumericError(std::string("non-finite loss component: ") + name);
    }
    if (w == 0.0) return;
    if (!part.valid()) throw NumericError(std::string("missing loss component with nonzero weight: ") + name);
    total = add(total, scale(part, w));
  };
  term("local", parts.local, weights.alpha);
  term("global", parts.global, weights.beta);
  term("fused", parts.fused, weights.gamma);
  term("contrastive", parts.contrastive, weights.delta);
  return total;
}

LossValues loss_values(const LossComponents& parts, Var total) {
  const auto read = [](Var v) { return v.valid() ? v.value()(0, 0) : 0.0; };
  return LossValues{read(parts.local), read(parts.global), read(parts.fused), read(parts.contrastive), read(total)};
}

}  // namespace mrgs
