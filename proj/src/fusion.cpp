#include "mrgs/fusion.hpp"

#include "mrgs/error.hpp"

namespace mrgs {

FusionParams init_fusion(Index dim, std::mt19937_64& rng, double stddev, FusionInit mode) {
  std::normal_distribution<double> normal(0.0, stddev);
  FusionParams p;
  p.w1.resize(4 * dim, 2 * dim);
  p.w2.resize(dim, 4 * dim);
  for (Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = normal(rng);
  for (Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = normal(rng);
  if (mode == FusionInit::kPassLocal) {
    // Hidden units [0, 2d) carry relu(e_l) and relu(-e_l); W2 recombines them
    // into e_l. Units [2d, 4d) keep random input weights but a zero output, so
    // they start silent and still receive gradient through W2.
    const Matrix eye = Matrix::Identity(dim, dim);
    p.w1.topRows(2 * dim).setZero();
    p.w1.block(0, 0, dim, dim) = eye;
    p.w1.block(dim, 0, dim, dim) = -eye;
    p.w2.setZero();
    p.w2.block(0, 0, dim, dim) = eye;
    p.w2.block(0, dim, dim, dim) = -eye;
  }
  return p;
}

std::string to_string(FusionInit mode) { return mode == FusionInit::kRandom ? "random" : "pass_local"; }

FusionInit parse_fusion_init(const std::string& text) {
  if (text == "random") return FusionInit::kRandom;
  if (text == "pass_local") return FusionInit::kPassLocal;
  throw ParseError("unknown fusion init '" + text + "'");
}

Var fuse(Var local_state, Var global_state, const FusionBlocks<Var>& params) {
  const Index d = local_state.cols();
  if (global_state.cols() != d || global_state.rows() != local_state.rows() || params.w1.rows() != 4 * d ||
      params.w1.cols() != 2 * d || params.w2.rows() != d || params.w2.cols() != 4 * d) {
    throw NumericError("dimension error in fuse");
  }
  return matmul_nt(relu(matmul_nt(concat_cols(local_state, global_state), params.w1)), params.w2);
}

Var score_items(Var user_vecs, Var item_table) { return matmul_nt(user_vecs, item_table); }

Matrix score_items(const Matrix& user_vecs, const Matrix& item_table) {
  if (user_vecs.cols() != item_table.cols()) throw NumericError("dimension error in score_items");
  return user_vecs * item_table.transpose();
}

}  // namespace mrgs
