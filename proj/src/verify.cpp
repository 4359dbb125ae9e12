#include "mrgs/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "mrgs/evaluation.hpp"
#include "mrgs/graph_encoder.hpp"
#include "mrgs/trainer.hpp"

namespace mrgs::verify {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

std::vector<NamedMatrix> to_named(const ModelParams& params) {
  std::vector<NamedMatrix> out;
  for_each_block(params, [&](const std::string& name, const Matrix& m) { out.push_back({name, m}); });
  return out;
}

ModelVars vars_from_leaves(const std::vector<Var>& leaves, const ModelParams& shape) {
  std::size_t i = 0;
  return map_blocks<Var>(shape, [&](const std::string&, const Matrix&) { return leaves.at(i++); });
}

GradientProblem make_gradient_problem(std::uint64_t seed, Index dim, Index window, Index n_users, Index n_items,
                                      Index graph_layers, Index n_layers) {
  std::mt19937_64 rng(seed);
  GradientProblem p;
  p.data.n_users = n_users;
  p.data.n_items = n_items;
  std::uniform_int_distribution<Index> item(0, n_items - 1);
  std::uniform_int_distribution<Index> len(2, window + 2);  // mix of padded and truncated windows
  for (Index u = 0; u < n_users; ++u) {
    UserSplit s;
    const Index n = len(rng);
    for (Index t = 0; t < n; ++t) s.train.push_back(item(rng));
    s.validation = item(rng);
    s.test = item(rng);
    p.data.users.push_back(s);
    p.data.user_tokens.push_back("u" + std::to_string(u));
  }
  for (Index i = 0; i < n_items; ++i) p.data.item_tokens.push_back("i" + std::to_string(i));
  p.graph = build_adjacency(p.data);

  p.config.n_users = n_users;
  p.config.n_items = n_items;
  p.config.window = window;
  p.config.dim = dim;
  p.config.graph_layers = graph_layers;
  p.config.encoder.dim = dim;
  p.config.encoder.n_layers = n_layers;
  p.config.encoder.n_heads = 2;
  p.config.encoder.d_ff = 4 * dim;
  p.config.encoder.dropout = 0.0;
  p.config.init_stddev = 0.5;
  p.params = init_model(p.config, seed + 11);

  std::vector<Index> users(static_cast<std::size_t>(n_users));
  for (Index u = 0; u < n_users; ++u) users[static_cast<std::size_t>(u)] = u;
  std::vector<std::vector<Index>> negatives;
  for (Index u : users) {
    negatives.push_back(sample_negatives(p.data.users[static_cast<std::size_t>(u)].train, n_items, 3, rng));
  }
  p.batch = make_train_batch(p.data, users, window, std::move(negatives));
  return p;
}

GradCheckReport check_problem_gradients(const GradientProblem& problem, const LossWeights& weights, double h,
                                        double tol) {
  std::vector<NamedMatrix> named = to_named(problem.params);
  const TapedLoss loss = [&](Tape&, const std::vector<Var>& leaves) {
    const ModelVars vars = vars_from_leaves(leaves, problem.params);
    return build_losses(vars, problem.config, weights, problem.batch, &problem.graph.adjacency, nullptr).total;
  };
  return finite_difference_check(loss, named, h, tol);
}

std::vector<CheckResult> gradient_suite(std::uint64_t seed) {
  const GradientProblem problem = make_gradient_problem(seed);
  const std::vector<std::pair<std::string, LossWeights>> cases = {
      {"local", {1.0, 0.0, 0.0, 0.0, 0.0}},
      {"global", {0.0, 1.0, 0.0, 0.0, 0.05}},
      {"fused", {0.0, 0.0, 1.0, 0.0, 0.0}},
      {"contrastive", {0.0, 0.0, 0.0, 1.0, 0.0}},
      {"total", {0.7, 0.3, 1.1, 0.4, 0.05}},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, w] : cases) {
    const GradCheckReport r = check_problem_gradients(problem, w);
    std::string worst_block;
    double worst = -1.0;
    for (const auto& b : r.blocks) {
      if (b.max_rel_error > worst) {
        worst = b.max_rel_error;
        worst_block = b.name;
      }
    }
    out.push_back({"gradient/" + name, r.passed,
                   fmt("max rel error %.3e (tol %.0e) at ", worst, r.tolerance) + worst_block});
  }
  return out;
}

std::vector<CheckResult> graph_oracle_suite(std::uint64_t seed, int graphs, double tol) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> users_d(1, 50);
  std::uniform_int_distribution<Index> items_d(1, 80);
  std::uniform_real_distribution<double> density(0.02, 0.3);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  double worst_adj = 0.0;
  double worst_prop = 0.0;
  bool symmetric = true;
  bool blocks_zero = true;
  for (int g = 0; g < graphs; ++g) {
    const Index M = users_d(rng);
    const Index N = items_d(rng);
    const double p = density(rng);
    SplitDataset data;
    data.n_users = M;
    data.n_items = N;
    data.users.resize(static_cast<std::size_t>(M));
    Matrix A = Matrix::Zero(M + N, M + N);
    for (Index u = 0; u < M; ++u) {
      for (Index i = 0; i < N; ++i) {
        if (coin(rng) >= p) continue;
        data.users[static_cast<std::size_t>(u)].train.push_back(i);
        if (coin(rng) < 0.1) data.users[static_cast<std::size_t>(u)].train.push_back(i);  // duplicate event
        A(u, M + i) = 1.0;
        A(M + i, u) = 1.0;
      }
    }
    if (A.sum() == 0.0) {
      data.users[0].train.push_back(0);
      A(0, M) = A(M, 0) = 1.0;
    }
    for (auto& u : data.users) std::shuffle(u.train.begin(), u.train.end(), rng);

    const Eigen::VectorXd deg = A.rowwise().sum();
    Matrix dense = Matrix::Zero(M + N, M + N);
    for (Index r = 0; r < M + N; ++r) {
      for (Index c = 0; c < M + N; ++c) {
        if (A(r, c) != 0.0) dense(r, c) = A(r, c) / (std::sqrt(deg(r)) * std::sqrt(deg(c)));
      }
    }

    const GraphData graph = build_adjacency(data);
    const Matrix sparse = graph.adjacency.matrix->to_dense();
    worst_adj = std::max(worst_adj, (sparse - dense).cwiseAbs().maxCoeff());
    symmetric = symmetric && (sparse.array() == sparse.transpose().array()).all();
    const CsrMatrix& csr = *graph.adjacency.matrix;
    for (Index r = 0; r < csr.rows; ++r) {
      for (Index q = csr.row_offsets[r]; q < csr.row_offsets[r + 1]; ++q) {
        blocks_zero = blocks_zero && ((r < M) != (csr.col_indices[q] < M));
      }
    }

    const Matrix users = random_matrix(M, 4, rng);
    const Matrix items = random_matrix(N + 1, 4, rng);
    Matrix stacked(M + N, 4);
    stacked << users, items.topRows(N);
    for (Index k = 1; k <= 3; ++k) {
      Matrix oracle = stacked;
      for (Index s = 0; s < k; ++s) oracle = dense * oracle;
      Tape tape;
      const EmbeddingBlocks<Var> tables{tape.constant(users), tape.constant(items), tape.constant(Matrix(1, 4))};
      const Matrix got = graph_embeddings(tables, graph.adjacency, k, GraphReadout::kLast).value();
      worst_prop = std::max(worst_prop, (got - oracle).cwiseAbs().maxCoeff());
    }
  }
  return {
      {"graph/adjacency-vs-dense", worst_adj <= tol, fmt("max abs diff %.3e (tol %.0e)", worst_adj, tol)},
      {"graph/propagation-vs-dense", worst_prop <= tol, fmt("max abs diff %.3e over k=1..3 (tol %.0e)", worst_prop, tol)},
      {"graph/symmetry", symmetric, symmetric ? "exact" : "asymmetric entry found"},
      {"graph/block-zero", blocks_zero, blocks_zero ? "no user-user or item-item entries" : "diagonal-block entry found"},
  };
}

namespace {

SplitDataset random_split(Index n_users, Index n_items, std::mt19937_64& rng) {
  SplitDataset data;
  data.n_users = n_users;
  data.n_items = n_items;
  std::uniform_int_distribution<Index> item(0, n_items - 1);
  std::uniform_int_distribution<Index> len(1, 6);
  for (Index u = 0; u < n_users; ++u) {
    UserSplit s;
    const Index n = len(rng);
    for (Index t = 0; t < n; ++t) s.train.push_back(item(rng));
    s.validation = item(rng);
    s.test = item(rng);
    data.users.push_back(s);
  }
  return data;
}

// Sort-and-scan reference for one user.
void brute_force_user(const std::vector<double>& scores, Index target, const std::set<Index>& excluded,
                      double& hr5, double& hr10, double& ndcg5, double& ndcg10) {
  std::vector<Index> order;
  for (Index i = 0; i < static_cast<Index>(scores.size()); ++i) {
    if (!excluded.count(i)) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  double dcg5 = 0.0, dcg10 = 0.0, hit5 = 0.0, hit10 = 0.0;
  for (std::size_t pos = 0; pos < order.size() && pos < 10; ++pos) {
    if (order[pos] != target) continue;
    const double gain = 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    dcg10 += gain;
    hit10 = 1.0;
    if (pos < 5) {
      dcg5 += gain;
      hit5 = 1.0;
    }
  }
  hr5 += hit5;
  hr10 += hit10;
  ndcg5 += dcg5;
  ndcg10 += dcg10;
}

}  // namespace

std::vector<CheckResult> metric_oracle_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  {
    const Index n_users = 100;
    const Index n_items = 50;
    const SplitDataset data = random_split(n_users, n_items, rng);
    // Coarse integer scores force plenty of ties.
    std::uniform_int_distribution<int> level(0, 9);
    Matrix scores(n_users, n_items);
    for (Index i = 0; i < scores.size(); ++i) scores.data()[i] = level(rng);
    const Scorer scorer = [&](const SequenceBatch& batch) {
      Matrix m(batch.size(), n_items);
      for (Index b = 0; b < batch.size(); ++b) m.row(b) = scores.row(batch.user_ids[static_cast<std::size_t>(b)]);
      return m;
    };
    for (const Split split : {Split::kValidation, Split::kTest}) {
      for (const bool exclude : {true, false}) {
        EvalOptions opts;
        opts.exclude_seen = exclude;
        opts.batch_size = 17;
        const MetricsReport r = evaluate_with_scorer(data, split, 4, scorer, opts);
        double hr5 = 0, hr10 = 0, ndcg5 = 0, ndcg10 = 0;
        for (Index u = 0; u < n_users; ++u) {
          const UserSplit& s = data.users[static_cast<std::size_t>(u)];
          std::set<Index> excluded;
          if (exclude) {
            excluded.insert(s.train.begin(), s.train.end());
            if (split == Split::kTest) excluded.insert(s.validation);
          }
          const Index target = split == Split::kTest ? s.test : s.validation;
          excluded.erase(target);
          const std::vector<double> row(scores.row(u).data(), scores.row(u).data() + n_items);
          brute_force_user(row, target, excluded, hr5, hr10, ndcg5, ndcg10);
        }
        const double n = static_cast<double>(n_users);
        const bool same = r.hr5 == hr5 / n && r.hr10 == hr10 / n && r.ndcg5 == ndcg5 / n && r.ndcg10 == ndcg10 / n;
        out.push_back({"metrics/brute-force-" + to_string(split) + (exclude ? "-exclude" : "-full"), same,
                       fmt("hr@10 %.6f vs oracle %.6f", r.hr10, hr10 / n)});
      }
    }
  }

  {
    const Index n_users = 2000;
    const Index n_items = 100;
    const SplitDataset data = random_split(n_users, n_items, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Scorer scorer = [&](const SequenceBatch& batch) {
      Matrix m(batch.size(), n_items);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
      return m;
    };
    EvalOptions opts;
    opts.exclude_seen = false;
    const MetricsReport r = evaluate_with_scorer(data, Split::kTest, 4, scorer, opts);
    for (const auto& [k, hr] : {std::pair<Index, double>{5, r.hr5}, {10, r.hr10}}) {
      const double p = static_cast<double>(k) / static_cast<double>(n_items);
      const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n_users));
      out.push_back({"metrics/random-hr@" + std::to_string(k), std::abs(hr - p) <= 3.0 * sigma,
                     fmt("hr %.4f, expected %.4f", hr, p) + fmt(" +- %.4f (3 sigma)", 3.0 * sigma)});
    }
  }
  return out;
}

}  // namespace mrgs::verify
