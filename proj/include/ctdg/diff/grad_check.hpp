#pragma once

#include <functional>
#include <span>

#include "ctdg/diff/tape.hpp"

namespace ctdg::diff {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates at a kink (one-sided slopes disagree)
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Per coordinate the error is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const std::function<Var(Tape&, Var)>& f, const Matrix& point, double eps = 1e-5);

/// Same check over every coordinate of a set of parameters; `loss` builds a
/// scalar on the given tape through Tape::parameter. Parameter grads are
/// overwritten.
GradCheckResult grad_check_parameters(const std::function<Var(Tape&)>& loss,
                                      std::span<Parameter* const> params, double eps = 1e-5);

}  // namespace ctdg::diff
