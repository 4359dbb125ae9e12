#pragma once

// Dense compute substrate and a minimal reverse-mode tape.
//
// Values are 64-bit row-major matrices. Batched 3-d arrays (batch x len x d)
// are stored stacked as (batch * len) x d. Every op records a closure that
// pushes the output gradient back into its inputs; Tape::backward replays the
// closures in reverse recording order, so gradients are reproducible
// bit-for-bit for a fixed forward pass.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace mrgs {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (a parameter block).
  Var leaf(Matrix value);
  Var constant(Matrix value);

  // Records an op output. `backward` is only kept when some input requires a
  // gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  // Seeds d(root)/d(root) = 1 and propagates. root must be 1x1. One call per tape.
  void backward(Var root);

  const Matrix& value(Var v) const;
  bool requires_grad(Var v) const;

  // Gradient of the last backward root w.r.t. v; zeros when v did not
  // contribute. Throws NumericError for a Var not recorded on this tape.
  const Matrix& grad(Var v);

  // Accumulation buffer, lazily zero-initialised. Used by op closures.
  Matrix& grad_buffer(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// Compressed sparse row matrix (sorted column indices within each row).
struct CsrMatrix {
  Index rows = 0;
  Index cols = 0;
  std::vector<Index> row_offsets;  // rows + 1 entries
  std::vector<Index> col_indices;
  std::vector<double> values;

  Index nnz() const noexcept { return static_cast<Index>(values.size()); }
  Matrix to_dense() const;
};

// ---------------------------------------------------------------------------
// Plain (untaped) kernels.

// Row-wise softmax with max subtraction. allowed (rows x cols, 1 = keep) may
// be empty; rows without any allowed entry come back all-zero.
Matrix softmax_rows(const Matrix& x, const std::vector<std::uint8_t>& allowed = {});

// y = S * x, rows accumulated in stored column order.
Matrix sparse_dense_product(const CsrMatrix& s, const Matrix& x);

bool all_finite(const Matrix& m);

// ---------------------------------------------------------------------------
// Differentiable ops.

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var add_row(Var a, Var row);  // broadcasts a 1 x cols row over every row of a
Var hadamard_const(Var a, const Matrix& mask);
Var relu(Var a);              // subgradient at 0 is 0
Var sigmoid(Var a);
Var log(Var a);
Var softmax(Var a);           // row-wise
Var sum(Var a);               // 1 x 1
Var sum_squares(Var a);       // 1 x 1

// Row-wise layer norm with learnable 1 x cols gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-8);

// Row gather. Ids that are negative or equal to `zero_id` yield a zero row and
// send no gradient back. Other ids must lie in [0, table rows).
Var gather_rows(Var table, const std::vector<Index>& ids,
                std::optional<Index> zero_id = std::nullopt);
Var slice_rows(Var a, Index begin, Index count);
Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);

Var sparse_matmul(std::shared_ptr<const CsrMatrix> s, Var x);

// Inverted dropout with a mask drawn from rng. Identity when rate == 0.
Var dropout(Var x, double rate, std::mt19937_64& rng);

// Multi-head scaled dot-product attention over stacked sequences.
// q, k, v: (batch * length) x width; width divisible by heads.
// allowed: batch x length x length, allowed[b][i][j] = 1 when query i may see
// key j. A query row with no allowed key produces a zero output row.
struct AttentionLayout {
  Index batch = 0;
  Index length = 0;
  Index heads = 1;
};
Var masked_attention(Var q, Var k, Var v, AttentionLayout layout,
                     std::shared_ptr<const std::vector<std::uint8_t>> allowed);

// out[b, j] = u.row(b) . c.row(b * group + j); u: B x d, c: (B * group) x d.
Var grouped_row_dot(Var u, Var c, Index group);

// Per-block a_b * g_b^T for stacked blocks of `block` rows:
// out.row(b * block + i)[j] = a.row(b * block + i) . g.row(b * block + j).
Var block_matmul_nt(Var a, Var g, Index block);

// sum_r w_r * (logsumexp_{allowed}(x_r) - x_r[t_r]), a 1 x 1 value.
// Rows with weight 0 are skipped. allowed may be empty (all allowed); the
// target entry of a weighted row must be allowed.
Var cross_entropy(Var logits, const std::vector<Index>& targets,
                  const std::vector<double>& row_weights,
                  const std::vector<std::uint8_t>& allowed = {});

}  // namespace mrgs
