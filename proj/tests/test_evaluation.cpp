#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mrgs/error.hpp"
#include "mrgs/evaluation.hpp"
#include "mrgs/verify.hpp"
#include "test_util.hpp"

using namespace mrgs;

namespace {

Index rank_of(const std::vector<double>& s, Index target, const std::vector<std::uint8_t>& ex = {}) {
  return rank_target(s, target, ex);
}

// Scores derived from (user, item) alone, so any batching or threading sees
// the same values.
Scorer hashed_scorer(Index n_items) {
  return [n_items](const SequenceBatch& batch) {
    Matrix s(batch.size(), n_items);
    for (Index b = 0; b < batch.size(); ++b) {
      for (Index i = 0; i < n_items; ++i) {
        std::uint64_t h = static_cast<std::uint64_t>(batch.user_ids[b]) * 1000003u + static_cast<std::uint64_t>(i);
        h ^= h >> 17;
        h *= 0x9E3779B97F4A7C15ull;
        s(b, i) = static_cast<double>((h >> 40) % 7);  // plenty of ties
      }
    }
    return s;
  };
}

}  // namespace

TEST_CASE("rank examples") {
  CHECK(rank_of({0.1, 0.9, 0.5}, 2) == 2);
  CHECK(rank_of({0.1, 0.9, 0.5}, 1) == 1);
  CHECK(rank_of({0.5, 0.5, 0.5}, 0) == 1);  // ties resolve by id
  CHECK(rank_of({0.5, 0.5, 0.5}, 2) == 3);
  CHECK(rank_of({0.1, 0.9, 0.5}, 2, {0, 1, 0}) == 1);
  CHECK_THROWS_AS(rank_of({0.1, 0.9, 0.5}, 1, {0, 1, 0}), ProtocolError);
  CHECK_THROWS_AS(rank_of({0.1}, 3), ProtocolError);
}

TEST_CASE("rank equals a sort oracle") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(50);
    for (double& x : s) x = level(rng);
    const Index target = static_cast<Index>(trial % 50);
    std::vector<Index> order(50);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return s[a] > s[b]; });
    const Index expected = static_cast<Index>(std::find(order.begin(), order.end(), target) - order.begin()) + 1;
    CHECK(rank_of(s, target) == expected);
  }
}

TEST_CASE("metric boundaries") {
  CHECK(hr_at_k(1, 5) == 1.0);
  CHECK(hr_at_k(5, 5) == 1.0);
  CHECK(hr_at_k(6, 5) == 0.0);
  CHECK(hr_at_k(10, 10) == 1.0);
  CHECK(hr_at_k(11, 10) == 0.0);
  CHECK(ndcg_at_k(1, 10) == 1.0);
  CHECK(std::abs(ndcg_at_k(2, 10) - 1.0 / std::log2(3.0)) < 1e-15);
  CHECK(std::abs(ndcg_at_k(10, 10) - 1.0 / std::log2(11.0)) < 1e-15);
  CHECK(ndcg_at_k(11, 10) == 0.0);
  CHECK(ndcg_at_k(6, 5) == 0.0);
}

TEST_CASE("perfect scorer reaches one") {
  std::mt19937_64 rng(2);
  const SplitDataset data = testutil::random_split(30, 20, rng);
  const std::vector<EvalCase> cases = build_eval_cases(data, Split::kTest);
  const Scorer perfect = [&](const SequenceBatch& batch) {
    Matrix s = Matrix::Zero(batch.size(), data.n_items);
    for (Index b = 0; b < batch.size(); ++b) s(b, data.users[batch.user_ids[b]].test) = 1.0;
    return s;
  };
  const MetricsReport r = evaluate_with_scorer(data, Split::kTest, 4, perfect, {});
  CHECK(r.hr5 == 1.0);
  CHECK(r.hr10 == 1.0);
  CHECK(r.ndcg5 == 1.0);
  CHECK(r.ndcg10 == 1.0);
  CHECK(r.n_users == 30);
  CHECK(cases.size() == 30);
}

TEST_CASE("report invariants") {
  MetricsReport ok;
  ok.hr5 = 0.4;
  ok.hr10 = 0.6;
  ok.ndcg5 = 0.3;
  ok.ndcg10 = 0.35;
  CHECK_NOTHROW(ok.check_invariants());
  MetricsReport bad = ok;
  bad.hr5 = 0.7;
  CHECK_THROWS_AS(bad.check_invariants(), ProtocolError);
  bad = ok;
  bad.ndcg10 = 0.7;
  CHECK_THROWS_AS(bad.check_invariants(), ProtocolError);
}

TEST_CASE("evaluation inputs are the prefix before the target") {
  std::mt19937_64 rng(3);
  const SplitDataset data = testutil::random_split(10, 15, rng);
  for (Split split : {Split::kValidation, Split::kTest}) {
    std::vector<EvalCase> cases = build_eval_cases(data, split);
    CHECK_NOTHROW(check_eval_inputs(data, split, cases));
    for (const EvalCase& c : cases) {
      const UserSplit& u = data.users[c.user];
      std::vector<Index> prefix = u.train;
      if (split == Split::kTest) prefix.push_back(u.validation);
      CHECK(c.history == prefix);
      CHECK(c.target == (split == Split::kTest ? u.test : u.validation));
    }
    cases[4].history.push_back(cases[4].target);
    CHECK_THROWS_AS(check_eval_inputs(data, split, cases), ProtocolError);
  }
}

TEST_CASE("thread count does not change the report") {
  std::mt19937_64 rng(4);
  const SplitDataset data = testutil::random_split(200, 40, rng);
  EvalOptions one;
  one.batch_size = 17;
  EvalOptions many = one;
  many.threads = 4;
  for (bool exclude : {true, false}) {
    one.exclude_seen = many.exclude_seen = exclude;
    const MetricsReport a = evaluate_with_scorer(data, Split::kTest, 5, hashed_scorer(40), one);
    const MetricsReport b = evaluate_with_scorer(data, Split::kTest, 5, hashed_scorer(40), many);
    CHECK(a.hr5 == b.hr5);
    CHECK(a.hr10 == b.hr10);
    CHECK(a.ndcg5 == b.ndcg5);
    CHECK(a.ndcg10 == b.ndcg10);
  }
}

TEST_CASE("metric oracle suite") {
  for (const auto& r : verify::metric_oracle_suite(5)) {
    INFO(r.name << " " << r.detail);
    CHECK(r.passed);
  }
}
