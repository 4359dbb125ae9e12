#pragma once

// Independent oracles used by `mrgsrec verify` and the acceptance suite:
// finite differences for every objective, a dense-matrix route for the graph
// encoder, and a sort-and-scan route for the ranking metrics.

#include <cstdint>
#include <string>
#include <vector>

#include "mrgs/gradcheck.hpp"
#include "mrgs/model.hpp"

namespace mrgs::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Small random problem sized like the gradient acceptance check.
struct GradientProblem {
  SplitDataset data;
  GraphData graph;
  ModelConfig config;
  ModelParams params;
  TrainBatch batch;
};

GradientProblem make_gradient_problem(std::uint64_t seed, Index dim = 8, Index window = 5, Index n_users = 7,
                                      Index n_items = 11, Index graph_layers = 2, Index n_layers = 2);

std::vector<NamedMatrix> to_named(const ModelParams& params);
ModelVars vars_from_leaves(const std::vector<Var>& leaves, const ModelParams& shape);

// Finite-difference check of the loss built with `weights` on the problem.
GradCheckReport check_problem_gradients(const GradientProblem& problem, const LossWeights& weights,
                                        double h = 1e-5, double tol = 1e-4);

// local, global, fused, contrastive and a mixed total.
std::vector<CheckResult> gradient_suite(std::uint64_t seed = 1);

// Sparse normalised adjacency and k <= 3 propagation against dense algebra on
// `graphs` random bipartite graphs (up to 50 users x 80 items).
std::vector<CheckResult> graph_oracle_suite(std::uint64_t seed = 2, int graphs = 20, double tol = 1e-10);

// Metrics against a brute-force sort-and-scan over 100 users, plus the
// random-score expectation HR@k ~ k / N over 2000 users.
std::vector<CheckResult> metric_oracle_suite(std::uint64_t seed = 3);

}  // namespace mrgs::verify
