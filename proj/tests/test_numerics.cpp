#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mrgs/error.hpp"
#include "mrgs/numerics.hpp"
#include "test_util.hpp"

using namespace mrgs;
using testutil::random_matrix;

TEST_CASE("half squared norm has gradient x") {
  std::mt19937_64 rng(1);
  const Matrix x0 = random_matrix(3, 4, rng);
  Tape t;
  const Var x = t.leaf(x0);
  t.backward(scale(sum_squares(x), 0.5));
  CHECK((t.grad(x) - x0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant loss gives zero gradient") {
  Tape t;
  const Var x = t.leaf(Matrix::Ones(2, 2));
  const Var c = t.constant(Matrix::Constant(1, 1, 3.0));
  t.backward(c);
  CHECK(t.grad(x).isZero(0.0));
}

TEST_CASE("backward runs once per tape") {
  Tape t;
  const Var x = t.leaf(Matrix::Ones(1, 1));
  const Var y = sum(x);
  t.backward(y);
  CHECK_THROWS_AS(t.backward(y), NumericError);
}

TEST_CASE("shape mismatch is a numeric error") {
  Tape t;
  const Var a = t.leaf(Matrix::Ones(2, 3));
  const Var b = t.leaf(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(matmul(a, b), NumericError);
  CHECK_THROWS_AS(add(a, b), NumericError);
}

TEST_CASE("masked softmax normalises over allowed entries only") {
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(4, 5, rng, 3.0);
  std::vector<std::uint8_t> allowed(20, 0);
  for (int j = 0; j < 5; ++j) allowed[j] = 1;   // row 0: all
  allowed[5 + 2] = 1;                            // row 1: one entry
  allowed[10 + 0] = allowed[10 + 4] = 1;         // row 2: two entries
  const Matrix p = softmax_rows(x, allowed);     // row 3: none
  for (int r = 0; r < 3; ++r) {
    double total = 0.0;
    for (int j = 0; j < 5; ++j) {
      if (!allowed[r * 5 + j]) CHECK(p(r, j) == 0.0);
      total += p(r, j);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(p(1, 2) == 1.0);
  CHECK(p.row(3).isZero(0.0));
  // Two-entry row against the closed form.
  const double e0 = std::exp(x(2, 0)), e4 = std::exp(x(2, 4));
  CHECK(std::abs(p(2, 0) - e0 / (e0 + e4)) < 1e-15);
}

TEST_CASE("sparse product equals dense product") {
  std::mt19937_64 rng(3);
  CsrMatrix s;
  s.rows = 4;
  s.cols = 3;
  s.row_offsets = {0, 2, 2, 3, 5};
  s.col_indices = {0, 2, 1, 0, 1};
  s.values = {0.5, -1.0, 2.0, 3.0, 0.25};
  const Matrix x = random_matrix(3, 2, rng);
  CHECK((sparse_dense_product(s, x) - s.to_dense() * x).cwiseAbs().maxCoeff() < 1e-15);

  Tape t;
  const Var xv = t.leaf(x);
  const Var y = sparse_matmul(std::make_shared<const CsrMatrix>(s), xv);
  t.backward(sum(y));
  const Matrix expected = s.to_dense().transpose() * Matrix::Ones(4, 2);
  CHECK((t.grad(xv) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape t;
  Matrix v(1, 3);
  v << -1.0, 0.0, 2.0;
  const Var x = t.leaf(v);
  t.backward(sum(relu(x)));
  CHECK(t.grad(x)(0, 0) == 0.0);
  CHECK(t.grad(x)(0, 1) == 0.0);
  CHECK(t.grad(x)(0, 2) == 1.0);
}

TEST_CASE("layer norm rows have zero mean and unit variance") {
  std::mt19937_64 rng(4);
  Tape t;
  const Var x = t.constant(random_matrix(5, 8, rng, 4.0));
  const Var y = layer_norm(x, t.constant(Matrix::Ones(1, 8)), t.constant(Matrix::Zero(1, 8)));
  for (Index r = 0; r < 5; ++r) {
    const double mean = y.value().row(r).mean();
    const double var = (y.value().row(r).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("gather rows zeroes padding and skips its gradient") {
  Tape t;
  Matrix table(3, 2);
  table << 1, 2, 3, 4, 5, 6;
  const Var tv = t.leaf(table);
  const Var g = gather_rows(tv, {2, -1, 0, 2, 1}, Index{1});
  CHECK(g.value().row(0) == table.row(2));
  CHECK(g.value().row(1).isZero(0.0));
  CHECK(g.value().row(4).isZero(0.0));
  t.backward(sum(g));
  Matrix expected(3, 2);
  expected << 1, 1, 0, 0, 2, 2;
  CHECK(t.grad(tv) == expected);
  CHECK_THROWS_AS(gather_rows(tv, {3}), Error);
}

TEST_CASE("cross entropy matches a loop oracle") {
  std::mt19937_64 rng(5);
  const Matrix logits = random_matrix(4, 6, rng, 2.0);
  const std::vector<Index> targets = {0, 5, 2, 3};
  const std::vector<double> weights = {0.5, 1.0, 0.0, 2.0};
  double oracle = 0.0;
  for (int r = 0; r < 4; ++r) {
    double z = 0.0;
    for (int j = 0; j < 6; ++j) z += std::exp(logits(r, j));
    oracle += weights[r] * (std::log(z) - logits(r, targets[r]));
  }
  Tape t;
  const Var ce = cross_entropy(t.constant(logits), targets, weights);
  CHECK(std::abs(ce.value()(0, 0) - oracle) < 1e-12);
}

TEST_CASE("attention ignores masked keys") {
  std::mt19937_64 rng(6);
  const Index L = 3, d = 4;
  const Matrix q = random_matrix(L, d, rng), k = random_matrix(L, d, rng);
  Matrix v = random_matrix(L, d, rng);
  auto mask = std::make_shared<const std::vector<std::uint8_t>>(std::vector<std::uint8_t>{1, 0, 0, 1, 1, 0, 1, 1, 0});
  Tape t1;
  const Matrix a = masked_attention(t1.constant(q), t1.constant(k), t1.constant(v), {1, L, 2}, mask).value();
  v.row(2) = random_matrix(1, d, rng);  // key 2 is never visible
  Tape t2;
  const Matrix b = masked_attention(t2.constant(q), t2.constant(k), t2.constant(v), {1, L, 2}, mask).value();
  CHECK(a == b);
  CHECK((a.row(0) - v.row(0)).cwiseAbs().maxCoeff() < 1e-15);  // single visible key
}

TEST_CASE("dropout at rate zero is the identity") {
  std::mt19937_64 rng(7);
  Tape t;
  const Matrix x = random_matrix(3, 3, rng);
  CHECK(dropout(t.constant(x), 0.0, rng).value() == x);
  const Matrix y = dropout(t.constant(Matrix::Ones(200, 50)), 0.5, rng).value();
  for (Index i = 0; i < y.size(); ++i) CHECK((y.data()[i] == 0.0 || y.data()[i] == 2.0));
}
