#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mrgs/embedding.hpp"
#include "mrgs/error.hpp"
#include "test_util.hpp"

using namespace mrgs;
using testutil::random_matrix;

TEST_CASE("window keeps the last c items") {
  const Window w = truncate_window({1, 2, 3, 4}, 2, 99);
  CHECK(w.items == std::vector<Index>{3, 4});
  CHECK(w.length == 2);
}

TEST_CASE("short sequence is left padded") {
  const Window w = truncate_window({7}, 4, 99);
  CHECK(w.items == std::vector<Index>{99, 99, 99, 7});
  CHECK(w.length == 1);
  CHECK_THROWS_AS(truncate_window({}, 4, 99), DataError);
  CHECK(truncate_window({}, 3, 99, true).length == 0);
}

TEST_CASE("window matches a slicing oracle") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Index> len(1, 12), item(0, 20), width(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Index> seq(static_cast<std::size_t>(len(rng)));
    for (auto& x : seq) x = item(rng);
    const Index c = width(rng);
    const Window w = truncate_window(seq, c, -5);
    const Index n = std::min<Index>(c, static_cast<Index>(seq.size()));
    std::vector<Index> oracle(static_cast<std::size_t>(c - n), -5);
    oracle.insert(oracle.end(), seq.end() - n, seq.end());
    CHECK(w.items == oracle);
    CHECK(w.length == n);
  }
}

TEST_CASE("item and positional rows add") {
  Tape t;
  Matrix users = Matrix::Zero(1, 2), items(2, 2), pos(1, 2);
  items << 1, 0, 0, 0;
  pos << 0, 1;
  SequenceBatch batch{1, 1, {}, {}, {}};
  batch.add(0, truncate_window({0}, 1, 1));
  const SequenceEmbeddings e = embed_sequence(batch, {t.constant(users), t.constant(items), t.constant(pos)});
  CHECK(e.items.value()(0, 0) == 1.0);
  CHECK(e.items.value()(0, 1) == 1.0);
}

TEST_CASE("batch lookup equals a per-element oracle") {
  std::mt19937_64 rng(2);
  const Index M = 4, N = 9, c = 5, d = 3;
  EmbeddingTables tables = init_tables(M, N, c, d, 11, 1.0);
  SequenceBatch batch{c, N, {}, {}, {}};
  batch.add(2, truncate_window({1, 2, 3, 4, 5, 6, 7}, c, N));
  batch.add(0, truncate_window({8, 0}, c, N));
  batch.add(3, truncate_window({4}, c, N));

  SUBCASE("with positions") {}
  SUBCASE("zero positional table") { tables.positions.setZero(); }

  Tape t;
  const SequenceEmbeddings e =
      embed_sequence(batch, {t.constant(tables.users), t.constant(tables.items), t.constant(tables.positions)});
  for (Index b = 0; b < batch.size(); ++b) {
    CHECK(e.users.value().row(b) == tables.users.row(batch.user_ids[static_cast<std::size_t>(b)]));
    for (Index s = 0; s < c; ++s) {
      const Index id = batch.items[static_cast<std::size_t>(b * c + s)];
      const auto row = e.items.value().row(b * c + s);
      if (batch.is_padding(b, s)) {
        CHECK(row.isZero(0.0));
      } else {
        CHECK(row == tables.items.row(id) + tables.positions.row(s));
      }
    }
  }
}

TEST_CASE("out of range item id is rejected") {
  const EmbeddingTables tables = init_tables(2, 3, 2, 2, 1);
  SequenceBatch batch{2, 3, {}, {}, {}};
  batch.add(0, Window{{0, 7}, 2});
  Tape t;
  CHECK_THROWS_AS(embed_sequence(batch, {t.constant(tables.users), t.constant(tables.items),
                                         t.constant(tables.positions)}),
                  DataError);
}

TEST_CASE("tables are seeded, zero-padded and centred") {
  const EmbeddingTables a = init_tables(5, 7, 3, 4, 42);
  const EmbeddingTables b = init_tables(5, 7, 3, 4, 42);
  CHECK(a.users == b.users);
  CHECK(a.items == b.items);
  CHECK(a.positions == b.positions);
  CHECK(a.items.rows() == 8);
  CHECK(a.items.row(7).isZero(0.0));
  CHECK(init_tables(5, 7, 3, 4, 43).users != a.users);

  // 10^6 entries from the user and item tables.
  const EmbeddingTables big = init_tables(1000, 999, 1, 500, 7);
  const double n = static_cast<double>(big.users.size() + big.items.size() - 500);
  const double mean = (big.users.sum() + big.items.sum()) / n;
  const double sigma = kInitStddev / std::sqrt(n);
  CHECK(std::abs(mean) < 3.0 * sigma);
  const double var = (big.users.array().square().sum() + big.items.array().square().sum()) / n;
  CHECK(std::abs(std::sqrt(var) - kInitStddev) < 1e-4);
}
