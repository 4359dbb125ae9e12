#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "mrgs/fusion.hpp"
#include "test_util.hpp"

using namespace mrgs;
using testutil::random_matrix;

namespace {

Matrix fuse_values(const Matrix& el, const Matrix& eg, const FusionParams& p) {
  Tape t;
  return fuse(t.constant(el), t.constant(eg), {t.constant(p.w1), t.constant(p.w2)}).value();
}

}  // namespace

TEST_CASE("zero first layer gives a zero fused state") {
  std::mt19937_64 rng(1);
  FusionParams p = init_fusion(3, rng, 0.5);
  p.w1.setZero();
  CHECK(fuse_values(random_matrix(2, 3, rng), random_matrix(2, 3, rng), p).isZero(0.0));
}

TEST_CASE("hand computed d = 2") {
  FusionParams p{Matrix::Zero(8, 4), Matrix::Zero(2, 8)};
  // h0 = el0 + eg1, h1 = -el1, h2 = el1 - eg0
  p.w1(0, 0) = 1;
  p.w1(0, 3) = 1;
  p.w1(1, 1) = -1;
  p.w1(2, 1) = 1;
  p.w1(2, 2) = -1;
  p.w2(0, 0) = 2;
  p.w2(0, 1) = 1;
  p.w2(1, 2) = -3;
  Matrix el(1, 2), eg(1, 2);
  el << 0.5, -1.5;
  eg << 2.0, 0.25;
  // h = relu(0.75, 1.5, -3.5) = (0.75, 1.5, 0)
  const Matrix out = fuse_values(el, eg, p);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 2);
  CHECK(std::abs(out(0, 0) - 3.0) < 1e-12);
  CHECK(std::abs(out(0, 1) - 0.0) < 1e-12);
}

TEST_CASE("shapes of initial parameters") {
  std::mt19937_64 rng(2);
  const FusionParams p = init_fusion(5, rng, 0.1);
  CHECK(p.w1.rows() == 20);
  CHECK(p.w1.cols() == 10);
  CHECK(p.w2.rows() == 5);
  CHECK(p.w2.cols() == 20);
  CHECK(fuse_values(random_matrix(3, 5, rng), random_matrix(3, 5, rng), p).cols() == 5);
}

TEST_CASE("pass-local initialization returns the local state") {
  std::mt19937_64 rng(3);
  const FusionParams p = init_fusion(6, rng, 0.3, FusionInit::kPassLocal);
  const Matrix el = random_matrix(4, 6, rng);
  CHECK((fuse_values(el, random_matrix(4, 6, rng), p) - el).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(parse_fusion_init(to_string(FusionInit::kPassLocal)) == FusionInit::kPassLocal);
}

TEST_CASE("scoring") {
  std::mt19937_64 rng(4);
  CHECK(score_items(Matrix::Zero(2, 3), random_matrix(7, 3, rng)).isZero(0.0));

  const Matrix basis = Matrix::Identity(4, 4);
  for (Index k = 0; k < 4; ++k) {
    Index best = -1;
    score_items(Matrix(basis.row(k)), basis).row(0).maxCoeff(&best);
    CHECK(best == k);
  }

  const Matrix u = random_matrix(3, 5, rng), items = random_matrix(9, 5, rng);
  const Matrix s = score_items(u, items);
  Tape t;
  const Matrix taped = score_items(t.constant(u), t.constant(items)).value();
  double worst = 0.0;
  for (Index b = 0; b < 3; ++b) {
    for (Index i = 0; i < 9; ++i) {
      double dot = 0.0;
      for (Index e = 0; e < 5; ++e) dot += u(b, e) * items(i, e);
      worst = std::max({worst, std::abs(s(b, i) - dot), std::abs(taped(b, i) - dot)});
    }
  }
  CHECK(worst < 1e-12);
}
