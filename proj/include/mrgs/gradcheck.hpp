#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mrgs/numerics.hpp"

namespace mrgs {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

// Builds a scalar loss on `tape` from leaves holding the current parameter
// values (same order as the parameter list).
using TapedLoss = std::function<Var(Tape& tape, const std::vector<Var>& params)>;

struct BlockError {
  std::string name;
  Index entries = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;
  double tolerance = 0.0;
  bool passed = false;

  double worst_rel_error() const;
};

// Entry-wise relative error |a - n| / max(|a|, |n|, floor). Gradients smaller
// than `floor` in magnitude are therefore judged by absolute error scaled by
// 1 / floor.
inline constexpr double kGradCheckFloor = 1e-5;

// Compares reverse-mode gradients of `loss` with central differences of step
// h on every entry of every block. Parameter values are restored on return.
GradCheckReport finite_difference_check(const TapedLoss& loss, std::vector<NamedMatrix>& params,
                                        double h = 1e-5, double tol = 1e-4);

// Evaluates the loss once without differentiation.
double evaluate_loss(const TapedLoss& loss, const std::vector<NamedMatrix>& params);

}  // namespace mrgs
