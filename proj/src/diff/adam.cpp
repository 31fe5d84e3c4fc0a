#include "ctdg/diff/adam.hpp"

#include <cmath>

#include "ctdg/error.hpp"

namespace ctdg::diff {

AdamState make_adam_state(std::span<Parameter* const> params, const AdamHyper& hyper) {
  require(hyper.lr > 0.0, ErrorCategory::kInvalidArgument, "learning rate must be positive");
  AdamState state;
  state.hyper = hyper;
  for (const Parameter* p : params) {
    state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  return state;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  require(params.size() == state.m.size(), ErrorCategory::kShapeMismatch, "Adam state does not match parameters");
  ++state.step;
  const auto& h = state.hyper;
  const double correction1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    require(p.grad.rows() == p.value.rows() && p.grad.cols() == p.value.cols(), ErrorCategory::kShapeMismatch,
            "gradient shape mismatch for " + p.name);
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    m = h.beta1 * m + (1.0 - h.beta1) * p.grad;
    v = h.beta2 * v + (1.0 - h.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= h.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + h.eps);
  }
}

}  // namespace ctdg::diff
