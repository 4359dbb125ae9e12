#pragma once

#include <random>
#include <string>

#include "mrgs/numerics.hpp"
#include "mrgs/params.hpp"

namespace mrgs {

// random     - every entry N(0, stddev^2)
// pass_local - e_f = e_l exactly at initialization; the graph state enters
//              through hidden units whose output weights start at zero
enum class FusionInit { kRandom, kPassLocal };

FusionParams init_fusion(Index dim, std::mt19937_64& rng, double stddev, FusionInit mode = FusionInit::kRandom);

std::string to_string(FusionInit mode);
FusionInit parse_fusion_init(const std::string& text);

// e_f = W2 ReLU(W1 (e_l || e_g)). Bias-free, so positively homogeneous.
Var fuse(Var local_state, Var global_state, const FusionBlocks<Var>& params);

// scores(b, i) = users.row(b) . items.row(i); items must not contain the
// padding row.
Var score_items(Var user_vecs, Var item_table);
Matrix score_items(const Matrix& user_vecs, const Matrix& item_table);

}  // namespace mrgs
