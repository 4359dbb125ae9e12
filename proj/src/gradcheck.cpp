#include "mrgs/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mrgs/error.hpp"

namespace mrgs {

double GradCheckReport::worst_rel_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_rel_error);
  return worst;
}

double evaluate_loss(const TapedLoss& loss, const std::vector<NamedMatrix>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.constant(p.value));
  const Var out = loss(tape, leaves);
  if (out.rows() != 1 || out.cols() != 1) throw NumericError("gradient check: loss is not a scalar");
  return out.value()(0, 0);
}

GradCheckReport finite_difference_check(const TapedLoss& loss, std::vector<NamedMatrix>& params,
                                        double h, double tol) {
  if (!(h > 0.0)) throw NumericError("gradient check: step must be positive");

  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.leaf(p.value));
    const Var out = loss(tape, leaves);
    tape.backward(out);
    for (const Var& v : leaves) analytic.push_back(tape.grad(v));
  }

  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t b = 0; b < params.size(); ++b) {
    BlockError err{params[b].name, params[b].value.size(), 0.0, 0.0};
    Matrix& m = params[b].value;
    for (Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = evaluate_loss(loss, params);
      m.data()[i] = saved - h;
      const double down = evaluate_loss(loss, params);
      m.data()[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic[b].data()[i];
      const double abs_err = std::abs(exact - numeric);
      const double denom = std::max({std::abs(exact), std::abs(numeric), kGradCheckFloor});
      err.max_abs_error = std::max(err.max_abs_error, abs_err);
      err.max_rel_error = std::max(err.max_rel_error, abs_err / denom);
    }
    report.blocks.push_back(err);
  }
  report.passed = report.worst_rel_error() <= tol;
  return report;
}

}  // namespace mrgs
