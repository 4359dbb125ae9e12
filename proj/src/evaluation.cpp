#include "mrgs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "mrgs/error.hpp"

namespace mrgs {

std::string to_string(Split split) { return split == Split::kValidation ? "validation" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "validation" || text == "val") return Split::kValidation;
  if (text == "test") return Split::kTest;
  throw ParseError("unknown split '" + text + "'");
}

Index rank_target(std::span<const double> scores, Index target, std::span<const std::uint8_t> excluded) {
  const Index n = static_cast<Index>(scores.size());
  if (target < 0 || target >= n) throw ProtocolError("rank_target: target outside catalog");
  if (!excluded.empty() && excluded[static_cast<std::size_t>(target)]) {
    throw ProtocolError("rank_target: target item is in the exclusion set");
  }
  const double ts = scores[static_cast<std::size_t>(target)];
  Index ahead = 0;
  for (Index i = 0; i < n; ++i) {
    if (i == target || (!excluded.empty() && excluded[static_cast<std::size_t>(i)])) continue;
    const double s = scores[static_cast<std::size_t>(i)];
    if (s > ts || (s == ts && i < target)) ++ahead;
  }
  return ahead + 1;
}

double hr_at_k(Index rank, Index k) { return rank >= 1 && rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(Index rank, Index k) {
  return rank >= 1 && rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

void MetricsReport::check_invariants() const {
  const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  const bool ok = in01(hr5) && in01(hr10) && in01(ndcg5) && in01(ndcg10) && ndcg5 <= hr5 + 1e-12 &&
                  ndcg10 <= hr10 + 1e-12 && hr5 <= hr10 && ndcg5 <= ndcg10;
  if (!ok) throw ProtocolError("metrics report violates bound/monotonicity invariants");
}

void write_report(std::ostream& out, const MetricsReport& r) {
  char buf[256];
  out << "split=" << r.split << '\n';
  out << "users=" << r.n_users << '\n';
  out << "head=" << r.head << '\n';
  out << "exclude_seen=" << (r.exclude_seen ? "true" : "false") << '\n';
  for (auto [name, v] : {std::pair{"hr@5", r.hr5}, {"hr@10", r.hr10}, {"ndcg@5", r.ndcg5}, {"ndcg@10", r.ndcg10}}) {
    std::snprintf(buf, sizeof buf, "%s=%.6f\n", name, v);
    out << buf;
  }
  out << "config_fingerprint=" << r.config_fingerprint << '\n';
}

std::string report_table_header() { return "split\thead\texclude_seen\tusers\thr@5\thr@10\tndcg@5\tndcg@10\tfingerprint"; }

std::string report_table_row(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s\t%s\t%s\t%lld\t%.6f\t%.6f\t%.6f\t%.6f\t%s", r.split.c_str(), r.head.c_str(),
                r.exclude_seen ? "true" : "false", static_cast<long long>(r.n_users), r.hr5, r.hr10, r.ndcg5,
                r.ndcg10, r.config_fingerprint.c_str());
  return buf;
}

std::vector<EvalCase> build_eval_cases(const SplitDataset& data, Split split) {
  std::vector<EvalCase> cases;
  cases.reserve(data.users.size());
  for (std::size_t u = 0; u < data.users.size(); ++u) {
    const UserSplit& s = data.users[u];
    EvalCase c;
    c.user = static_cast<Index>(u);
    c.history = s.train;
    if (split == Split::kTest) c.history.push_back(s.validation);
    c.target = split == Split::kTest ? s.test : s.validation;
    cases.push_back(std::move(c));
  }
  return cases;
}

void check_eval_inputs(const SplitDataset& data, Split split, const std::vector<EvalCase>& cases) {
  if (cases.size() != data.users.size()) throw ProtocolError("evaluation: case count differs from user count");
  for (const EvalCase& c : cases) {
    const std::vector<Index> full = data.users.at(static_cast<std::size_t>(c.user)).full_sequence();
    const std::size_t target_pos = full.size() - (split == Split::kTest ? 1 : 2);
    if (c.history.size() != target_pos || !std::equal(c.history.begin(), c.history.end(), full.begin()) ||
        c.target != full[target_pos]) {
      throw ProtocolError("evaluation input for user " + std::to_string(c.user) +
                          " is not the prefix before its target event");
    }
  }
}

MetricsReport evaluate_with_scorer(const SplitDataset& data, Split split, Index window, const Scorer& scorer,
                                   const EvalOptions& options) {
  const std::vector<EvalCase> cases = build_eval_cases(data, split);
  check_eval_inputs(data, split, cases);
  const Index n_items = data.n_items;
  const Index batch_size = std::max<Index>(1, options.batch_size);
  std::vector<Index> ranks(cases.size(), 0);

  for (std::size_t start = 0; start < cases.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(cases.size(), start + static_cast<std::size_t>(batch_size));
    SequenceBatch batch;
    batch.window = window;
    batch.pad_id = n_items;
    for (std::size_t i = start; i < end; ++i) {
      batch.add(cases[i].user, truncate_window(cases[i].history, window, n_items, true));
    }
    const Matrix scores = scorer(batch);
    if (scores.rows() != batch.size() || scores.cols() != n_items) {
      throw NumericError("evaluation: scorer returned a wrongly shaped score matrix");
    }
    // Ranking is independent per user; results land in fixed slots so the
    // aggregate never depends on the thread count.
    const auto rank_range = [&](std::size_t lo, std::size_t hi) {
      std::vector<std::uint8_t> excluded(static_cast<std::size_t>(n_items), 0);
      for (std::size_t i = lo; i < hi; ++i) {
        const EvalCase& c = cases[i];
        if (options.exclude_seen) {
          for (Index item : c.history) excluded[static_cast<std::size_t>(item)] = 1;
          // A repeat purchase of the target stays rankable.
          excluded[static_cast<std::size_t>(c.target)] = 0;
        }
        const auto row = scores.row(static_cast<Index>(i - start));
        ranks[i] = rank_target(std::span<const double>(row.data(), static_cast<std::size_t>(n_items)), c.target,
                               excluded);
        if (options.exclude_seen) {
          for (Index item : c.history) excluded[static_cast<std::size_t>(item)] = 0;
        }
      }
    };
    const unsigned threads = std::max(1u, options.threads);
    if (threads == 1 || end - start < 2 * threads) {
      rank_range(start, end);
    } else {
      std::vector<std::jthread> pool;
      const std::size_t per = (end - start + threads - 1) / threads;
      for (std::size_t lo = start; lo < end; lo += per) pool.emplace_back(rank_range, lo, std::min(end, lo + per));
    }
  }

  MetricsReport r;
  r.split = to_string(split);
  r.n_users = static_cast<Index>(cases.size());
  r.exclude_seen = options.exclude_seen;
  for (Index rank : ranks) {
    r.hr5 += hr_at_k(rank, 5);
    r.hr10 += hr_at_k(rank, 10);
    r.ndcg5 += ndcg_at_k(rank, 5);
    r.ndcg10 += ndcg_at_k(rank, 10);
  }
  if (!ranks.empty()) {
    const double n = static_cast<double>(ranks.size());
    r.hr5 /= n;
    r.hr10 /= n;
    r.ndcg5 /= n;
    r.ndcg10 /= n;
  }
  r.check_invariants();
  return r;
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& config, const SplitDataset& data,
                       const NormalizedAdjacency& adjacency, Split split, const EvalOptions& options) {
  const bool need_graph = ForwardNeeds::for_scoring(config.head).graph;
  const Matrix nodes = need_graph ? graph_nodes(params, config, adjacency) : Matrix();
  const Scorer scorer = [&](const SequenceBatch& batch) {
    return score_batch(params, config, batch, need_graph ? &nodes : nullptr);
  };
  MetricsReport r = evaluate_with_scorer(data, split, config.window, scorer, options);
  r.head = to_string(config.head);
  return r;
}

}  // namespace mrgs
