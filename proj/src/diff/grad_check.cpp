#include "ctdg/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ctdg/error.hpp"

namespace ctdg::diff {

namespace {

constexpr double kKinkTolerance = 1e-3;

double scalar_of(Var v) {
  require(v.rows() == 1 && v.cols() == 1, ErrorCategory::kShapeMismatch, "grad_check needs a scalar-valued function");
  return v.value()(0, 0);
}

// Folds one coordinate into the running result.
void compare(GradCheckResult& r, double analytic, double f_plus, double f_mid, double f_minus, double eps) {
  const double forward = (f_plus - f_mid) / eps;
  const double backward = (f_mid - f_minus) / eps;
  if (std::abs(forward - backward) > kKinkTolerance * std::max({1.0, std::abs(forward), std::abs(backward)})) {
    ++r.skipped;
    return;
  }
  const double numeric = (f_plus - f_minus) / (2.0 * eps);
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
  ++r.checked;
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(Tape&, Var)>& f, const Matrix& point, double eps) {
  require(eps > 0.0, ErrorCategory::kInvalidArgument, "grad_check eps must be positive");
  Matrix analytic;
  double f_mid = 0.0;
  {
    Tape tape;
    Var x = tape.variable(point);
    Var y = f(tape, x);
    f_mid = scalar_of(y);
    tape.backward(y);
    analytic = tape.grad(x);
  }
  auto eval = [&](const Matrix& p) {
    Tape tape;
    return scalar_of(f(tape, tape.constant(p)));
  };
  GradCheckResult result;
  Matrix probe = point;
  for (Eigen::Index i = 0; i < probe.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const double f_plus = eval(probe);
    probe.data()[i] = orig - eps;
    const double f_minus = eval(probe);
    probe.data()[i] = orig;
    compare(result, analytic.data()[i], f_plus, f_mid, f_minus, eps);
  }
  return result;
}

GradCheckResult grad_check_parameters(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                                      double eps) {
  require(eps > 0.0, ErrorCategory::kInvalidArgument, "grad_check eps must be positive");
  for (Parameter* p : params) p->zero_grad();
  double f_mid = 0.0;
  {
    Tape tape;
    Var y = loss(tape);
    f_mid = scalar_of(y);
    tape.backward(y);
  }
  auto eval = [&] {
    Tape tape;
    return scalar_of(loss(tape));
  };
  GradCheckResult result;
  for (Parameter* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& coord = p->value.data()[i];
      const double orig = coord;
      coord = orig + eps;
      const double f_plus = eval();
      coord = orig - eps;
      const double f_minus = eval();
      coord = orig;
      compare(result, p->grad.data()[i], f_plus, f_mid, f_minus, eps);
    }
  }
  return result;
}

}  // namespace ctdg::diff
