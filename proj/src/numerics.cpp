#include "mrgs/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mrgs/error.hpp"

namespace mrgs {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw NumericError(what);
}

void require_shape(const Matrix& a, Index rows, Index cols, const char* op) {
  if (a.rows() != rows || a.cols() != cols) {
    throw NumericError(std::string("dimension error in ") + op + ": got " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                       ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tape& tape_of(Var a) {
  require(a.valid(), "graph error: use of an unrecorded Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  require(b.tape() == &t, "graph error: operands recorded on different tapes");
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_of(*this).value(*this); }

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || node(in).requires_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw NumericError("graph error: Var was not recorded on this tape");
  }
  return nodes_[v.id()];
}

Tape::Node& Tape::node(Var v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Matrix& Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0 && n.value.size() != 0) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

const Matrix& Tape::grad(Var v) { return grad_buffer(v); }

void Tape::backward(Var root) {
  Node& r = node(root);
  require(r.value.rows() == 1 && r.value.cols() == 1, "graph error: backward root must be a scalar");
  require(!backward_done_, "graph error: backward already run on this tape");
  backward_done_ = true;
  grad_buffer(root)(0, 0) += 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

Matrix CsrMatrix::to_dense() const {
  Matrix out = Matrix::Zero(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index p = row_offsets[r]; p < row_offsets[r + 1]; ++p) out(r, col_indices[p]) = values[p];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

Matrix softmax_rows(const Matrix& x, const std::vector<std::uint8_t>& allowed) {
  require(allowed.empty() || allowed.size() == static_cast<std::size_t>(x.size()),
          "dimension error in softmax_rows: mask size");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < x.cols(); ++c) {
      if (allowed.empty() || allowed[r * x.cols() + c]) mx = std::max(mx, x(r, c));
    }
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (Index c = 0; c < x.cols(); ++c) {
      if (allowed.empty() || allowed[r * x.cols() + c]) {
        out(r, c) = std::exp(x(r, c) - mx);
        total += out(r, c);
      }
    }
    out.row(r) /= total;
  }
  return out;
}

Matrix sparse_dense_product(const CsrMatrix& s, const Matrix& x) {
  require_shape(x, s.cols, x.cols(), "sparse_dense_product");
  Matrix out = Matrix::Zero(s.rows, x.cols());
  for (Index r = 0; r < s.rows; ++r) {
    for (Index p = s.row_offsets[r]; p < s.row_offsets[r + 1]; ++p) {
      out.row(r).noalias() += s.values[p] * x.row(s.col_indices[p]);
    }
  }
  return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

// ---------------------------------------------------------------------------
// Ops

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.rows(), "dimension error in matmul");
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_buffer(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad_buffer(b).noalias() += t.value(a).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.cols(), "dimension error in matmul_nt");
  return t.record(a.value() * b.value().transpose(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_buffer(a).noalias() += g * t.value(b);
    if (t.requires_grad(b)) t.grad_buffer(b).noalias() += g.transpose() * t.value(a);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_shape(b.value(), a.rows(), a.cols(), "add");
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_shape(b.value(), a.rows(), a.cols(), "sub");
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) -= g;
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.grad_buffer(a) += s * g; });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  require_shape(row.value(), 1, a.cols(), "add_row");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(row)) t.grad_buffer(row) += g.colwise().sum();
  });
}

Var hadamard_const(Var a, const Matrix& mask) {
  Tape& t = tape_of(a);
  require_shape(mask, a.rows(), a.cols(), "hadamard_const");
  auto m = std::make_shared<const Matrix>(mask);
  return t.record(a.value().cwiseProduct(mask), {a}, [a, m](Tape& t, const Matrix& g) {
    t.grad_buffer(a) += g.cwiseProduct(*m);
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a);
    Matrix& ga = t.grad_buffer(a);
    for (Index i = 0; i < x.size(); ++i) {
      if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    }
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([](double x) {
    // Split on sign so exp never overflows.
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  auto s = std::make_shared<const Matrix>(std::move(out));
  return t.record(*s, {a}, [a, s](Tape& t, const Matrix& g) {
    t.grad_buffer(a).array() += g.array() * s->array() * (1.0 - s->array());
  });
}

Var log(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().array().log().matrix(), {a}, [a](Tape& t, const Matrix& g) {
    t.grad_buffer(a).array() += g.array() / t.value(a).array();
  });
}

Var softmax(Var a) {
  Tape& t = tape_of(a);
  auto y = std::make_shared<const Matrix>(softmax_rows(a.value()));
  return t.record(*y, {a}, [a, y](Tape& t, const Matrix& g) {
    const Matrix& s = *y;
    Matrix& ga = t.grad_buffer(a);
    for (Index r = 0; r < s.rows(); ++r) {
      const double dot = g.row(r).dot(s.row(r));
      ga.row(r).array() += s.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.grad_buffer(a).array() += g(0, 0);
  });
}

Var sum_squares(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return t.record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.grad_buffer(a) += (2.0 * g(0, 0)) * t.value(a);
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of(x, gain);
  require(bias.tape() == &t, "graph error: operands recorded on different tapes");
  const Index rows = x.rows();
  const Index cols = x.cols();
  require_shape(gain.value(), 1, cols, "layer_norm gain");
  require_shape(bias.value(), 1, cols, "layer_norm bias");

  auto xhat = std::make_shared<Matrix>(rows, cols);
  auto rstd = std::make_shared<Eigen::VectorXd>(rows);
  const Matrix& xv = x.value();
  for (Index r = 0; r < rows; ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    (*rstd)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (xv.row(r).array() - mean) * (*rstd)(r);
  }
  Matrix out = xhat->array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);

  return t.record(std::move(out), {x, gain, bias},
                  [x, gain, bias, xhat, rstd](Tape& t, const Matrix& g) {
    const Matrix& xh = *xhat;
    if (t.requires_grad(gain)) t.grad_buffer(gain) += g.cwiseProduct(xh).colwise().sum();
    if (t.requires_grad(bias)) t.grad_buffer(bias) += g.colwise().sum();
    if (!t.requires_grad(x)) return;
    Matrix& gx = t.grad_buffer(x);
    const auto gamma = t.value(gain).row(0).array();
    for (Index r = 0; r < xh.rows(); ++r) {
      const Eigen::ArrayXd dxhat = (g.row(r).array() * gamma).transpose();
      const double mean_d = dxhat.mean();
      const double mean_dx = (dxhat * xh.row(r).array().transpose()).mean();
      gx.row(r).array() +=
          ((*rstd)(r) * (dxhat - mean_d - xh.row(r).array().transpose() * mean_dx)).transpose();
    }
  });
}

Var gather_rows(Var table, const std::vector<Index>& ids, std::optional<Index> zero_id) {
  Tape& t = tape_of(table);
  const Matrix& tv = table.value();
  auto kept = std::make_shared<std::vector<Index>>(ids);
  Matrix out = Matrix::Zero(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const Index id = ids[r];
    if (id < 0 || (zero_id && id == *zero_id)) {
      (*kept)[r] = -1;
      continue;
    }
    if (id >= tv.rows()) {
      throw DataError("index error: row id " + std::to_string(id) + " outside table of " +
                      std::to_string(tv.rows()) + " rows");
    }
    out.row(static_cast<Index>(r)) = tv.row(id);
  }
  return t.record(std::move(out), {table}, [table, kept](Tape& t, const Matrix& g) {
    Matrix& gt = t.grad_buffer(table);
    for (std::size_t r = 0; r < kept->size(); ++r) {
      const Index id = (*kept)[r];
      if (id >= 0) gt.row(id) += g.row(static_cast<Index>(r));
    }
  });
}

Var slice_rows(Var a, Index begin, Index count) {
  Tape& t = tape_of(a);
  require(begin >= 0 && count >= 0 && begin + count <= a.rows(), "dimension error in slice_rows");
  return t.record(a.value().middleRows(begin, count), {a}, [a, begin, count](Tape& t, const Matrix& g) {
    t.grad_buffer(a).middleRows(begin, count) += g;
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows(), "dimension error in concat_cols");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index ca = a.cols();
  return t.record(std::move(out), {a, b}, [a, b, ca](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g.leftCols(ca);
    if (t.requires_grad(b)) t.grad_buffer(b) += g.rightCols(g.cols() - ca);
  });
}

Var concat_rows(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.cols(), "dimension error in concat_rows");
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  const Index ra = a.rows();
  return t.record(std::move(out), {a, b}, [a, b, ra](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g.topRows(ra);
    if (t.requires_grad(b)) t.grad_buffer(b) += g.bottomRows(g.rows() - ra);
  });
}

Var sparse_matmul(std::shared_ptr<const CsrMatrix> s, Var x) {
  Tape& t = tape_of(x);
  require(s != nullptr, "sparse_matmul: null matrix");
  if (x.rows() != s->cols) throw NumericError("dimension error in sparse_matmul");
  return t.record(sparse_dense_product(*s, x.value()), {x}, [s, x](Tape& t, const Matrix& g) {
    Matrix& gx = t.grad_buffer(x);
    for (Index r = 0; r < s->rows; ++r) {
      for (Index p = s->row_offsets[r]; p < s->row_offsets[r + 1]; ++p) {
        gx.row(s->col_indices[p]).noalias() += s->values[p] * g.row(r);
      }
    }
  });
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  require(rate < 1.0, "dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  const double inv = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0;
  return hadamard_const(x, mask);
}

Var masked_attention(Var q, Var k, Var v, AttentionLayout layout,
                     std::shared_ptr<const std::vector<std::uint8_t>> allowed) {
  Tape& t = tape_of(q, k);
  require(v.tape() == &t, "graph error: operands recorded on different tapes");
  const Index B = layout.batch;
  const Index L = layout.length;
  const Index H = layout.heads;
  const Index width = q.cols();
  require(H >= 1 && width % H == 0, "dimension error in masked_attention: width not divisible by heads");
  require_shape(q.value(), B * L, width, "masked_attention q");
  require_shape(k.value(), B * L, width, "masked_attention k");
  require_shape(v.value(), B * L, width, "masked_attention v");
  require(allowed && allowed->size() == static_cast<std::size_t>(B * L * L),
          "dimension error in masked_attention: mask size");
  const Index dh = width / H;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(B * H));
  Matrix out = Matrix::Zero(B * L, width);
  for (Index b = 0; b < B; ++b) {
    const std::vector<std::uint8_t> block(allowed->begin() + b * L * L,
                                          allowed->begin() + (b + 1) * L * L);
    for (Index h = 0; h < H; ++h) {
      const Matrix scores =
          (qv.block(b * L, h * dh, L, dh) * kv.block(b * L, h * dh, L, dh).transpose()) * inv_sqrt;
      Matrix& p = (*probs)[static_cast<std::size_t>(b * H + h)];
      p = softmax_rows(scores, block);
      out.block(b * L, h * dh, L, dh).noalias() = p * vv.block(b * L, h * dh, L, dh);
    }
  }

  return t.record(std::move(out), {q, k, v},
                  [q, k, v, B, L, H, dh, inv_sqrt, probs](Tape& t, const Matrix& g) {
    const Matrix& qv = t.value(q);
    const Matrix& kv = t.value(k);
    const Matrix& vv = t.value(v);
    const bool gq = t.requires_grad(q);
    const bool gk = t.requires_grad(k);
    const bool gv = t.requires_grad(v);
    for (Index b = 0; b < B; ++b) {
      for (Index h = 0; h < H; ++h) {
        const Matrix& p = (*probs)[static_cast<std::size_t>(b * H + h)];
        const auto go = g.block(b * L, h * dh, L, dh);
        if (gv) t.grad_buffer(v).block(b * L, h * dh, L, dh).noalias() += p.transpose() * go;
        const Matrix dp = go * vv.block(b * L, h * dh, L, dh).transpose();
        Matrix ds(L, L);
        for (Index i = 0; i < L; ++i) {
          const double dot = dp.row(i).dot(p.row(i));
          ds.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
        }
        ds *= inv_sqrt;
        if (gq) t.grad_buffer(q).block(b * L, h * dh, L, dh).noalias() += ds * kv.block(b * L, h * dh, L, dh);
        if (gk) {
          t.grad_buffer(k).block(b * L, h * dh, L, dh).noalias() +=
              ds.transpose() * qv.block(b * L, h * dh, L, dh);
        }
      }
    }
  });
}

Var grouped_row_dot(Var u, Var c, Index group) {
  Tape& t = tape_of(u, c);
  const Index B = u.rows();
  require(group >= 1 || B == 0, "grouped_row_dot: group must be >= 1");
  require_shape(c.value(), B * group, u.cols(), "grouped_row_dot");
  Matrix out(B, group);
  const Matrix& uv = u.value();
  const Matrix& cv = c.value();
  for (Index b = 0; b < B; ++b) {
    for (Index j = 0; j < group; ++j) out(b, j) = uv.row(b).dot(cv.row(b * group + j));
  }
  return t.record(std::move(out), {u, c}, [u, c, group](Tape& t, const Matrix& g) {
    const Matrix& uv = t.value(u);
    const Matrix& cv = t.value(c);
    const bool gu = t.requires_grad(u);
    const bool gc = t.requires_grad(c);
    for (Index b = 0; b < uv.rows(); ++b) {
      for (Index j = 0; j < group; ++j) {
        if (gu) t.grad_buffer(u).row(b) += g(b, j) * cv.row(b * group + j);
        if (gc) t.grad_buffer(c).row(b * group + j) += g(b, j) * uv.row(b);
      }
    }
  });
}

Var block_matmul_nt(Var a, Var g, Index block) {
  Tape& t = tape_of(a, g);
  require(block >= 1 && a.rows() % block == 0, "dimension error in block_matmul_nt");
  require_shape(g.value(), a.rows(), a.cols(), "block_matmul_nt");
  const Index B = a.rows() / block;
  Matrix out(a.rows(), block);
  for (Index b = 0; b < B; ++b) {
    out.middleRows(b * block, block).noalias() =
        a.value().middleRows(b * block, block) * g.value().middleRows(b * block, block).transpose();
  }
  return t.record(std::move(out), {a, g}, [a, g, block, B](Tape& t, const Matrix& go) {
    const Matrix& av = t.value(a);
    const Matrix& gv = t.value(g);
    for (Index b = 0; b < B; ++b) {
      const auto gblk = go.middleRows(b * block, block);
      if (t.requires_grad(a)) {
        t.grad_buffer(a).middleRows(b * block, block).noalias() += gblk * gv.middleRows(b * block, block);
      }
      if (t.requires_grad(g)) {
        t.grad_buffer(g).middleRows(b * block, block).noalias() +=
            gblk.transpose() * av.middleRows(b * block, block);
      }
    }
  });
}

Var cross_entropy(Var logits, const std::vector<Index>& targets,
                  const std::vector<double>& row_weights,
                  const std::vector<std::uint8_t>& allowed) {
  Tape& t = tape_of(logits);
  const Matrix& x = logits.value();
  const Index R = x.rows();
  const Index K = x.cols();
  require(targets.size() == static_cast<std::size_t>(R) && row_weights.size() == targets.size(),
          "dimension error in cross_entropy: targets/weights");
  require(allowed.empty() || allowed.size() == static_cast<std::size_t>(R * K),
          "dimension error in cross_entropy: mask");

  // Probabilities of weighted rows, kept for the backward pass.
  auto probs = std::make_shared<Matrix>(Matrix::Zero(R, K));
  double total = 0.0;
  for (Index r = 0; r < R; ++r) {
    const double w = row_weights[static_cast<std::size_t>(r)];
    if (w == 0.0) continue;
    const Index target = targets[static_cast<std::size_t>(r)];
    require(target >= 0 && target < K, "cross_entropy: target outside logits");
    require(allowed.empty() || allowed[r * K + target], "cross_entropy: target entry is masked");
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < K; ++c) {
      if (allowed.empty() || allowed[r * K + c]) mx = std::max(mx, x(r, c));
    }
    double z = 0.0;
    for (Index c = 0; c < K; ++c) {
      if (allowed.empty() || allowed[r * K + c]) {
        (*probs)(r, c) = std::exp(x(r, c) - mx);
        z += (*probs)(r, c);
      }
    }
    probs->row(r) /= z;
    total += w * (mx + std::log(z) - x(r, target));
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  auto tg = std::make_shared<std::vector<Index>>(targets);
  auto wt = std::make_shared<std::vector<double>>(row_weights);
  return t.record(std::move(out), {logits}, [logits, probs, tg, wt](Tape& t, const Matrix& g) {
    Matrix& gl = t.grad_buffer(logits);
    const double s = g(0, 0);
    for (Index r = 0; r < probs->rows(); ++r) {
      const double w = (*wt)[static_cast<std::size_t>(r)];
      if (w == 0.0) continue;
      gl.row(r) += (s * w) * probs->row(r);
      gl(r, (*tg)[static_cast<std::size_t>(r)]) -= s * w;
    }
  });
}

}  // namespace mrgs
