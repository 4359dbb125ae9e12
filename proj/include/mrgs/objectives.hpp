#pragma once

// The four training objectives and their weighted total.
//
// Reductions: the local loss is a mean over valid positions and the global
// loss a mean over BPR pairs; fused and contrastive losses are sums over
// users divided by `divisor` (the batch size during training).

#include <cstdint>
#include <string>
#include <vector>

#include "mrgs/numerics.hpp"

namespace mrgs {

struct LossWeights {
  double alpha = 1.0;   // local
  double beta = 0.1;    // global
  double gamma = 1.0;   // fused
  double delta = 0.1;   // contrastive
  double lambda_reg = 1e-4;

  void validate() const;
};

// Full-catalog next-item cross entropy. rows: (R x d) encoder outputs;
// targets[r] < 0 marks a padded row. item_table: N x d (no padding row).
Var local_loss(Var rows, const std::vector<Index>& targets, Var item_table);

// BPR over pairs plus L2 on the layer-0 rows the pairs touch:
// mean_p -ln sigmoid(u_p.pos_p - u_p.neg_p) + lambda * ||ego||^2 / P.
Var global_loss(Var users, Var positives, Var negatives, Var ego_rows, double lambda_reg);

// Sampled softmax over the positive and the user's negatives:
// sum_u -log(exp(s_pos) / (exp(s_pos) + sum_neg exp(s_neg))) / divisor.
// Negative lists may differ in length (including empty).
Var fused_loss(Var fused, Var item_table, const std::vector<Index>& positives,
               const std::vector<std::vector<Index>>& negatives, double divisor);

// Per user b and valid slot i: -log softmax_j((E_l)_i . (E_g)_j)[i] with j
// ranging over the user's valid slots. valid: one flag per stacked row.
Var contrastive_loss(Var local_items, Var global_items, const std::vector<std::uint8_t>& valid, Index window,
                     double divisor);

// Components left unset (default Var) are treated as absent and must carry
// zero weight.
struct LossComponents {
  Var local;
  Var global;
  Var fused;
  Var contrastive;
};

struct LossValues {
  double local = 0.0;
  double global = 0.0;
  double fused = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
};

// alpha*L_l + beta*L_g + gamma*L_f + delta*L_c. Zero-weight terms are left out
// of the graph entirely. Throws NumericError naming a non-finite component.
Var total_loss(Tape& tape, const LossComponents& parts, const LossWeights& weights);

LossValues loss_values(const LossComponents& parts, Var total);

}  // namespace mrgs
