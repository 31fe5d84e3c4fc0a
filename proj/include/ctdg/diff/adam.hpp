#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctdg/diff/tape.hpp"

namespace ctdg::diff {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(std::span<Parameter* const> params, const AdamHyper& hyper);

/// One bias-corrected Adam update from each parameter's accumulated grad.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace ctdg::diff
