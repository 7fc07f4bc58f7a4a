#pragma once

#include <cstdint>
#include <vector>

#include "byov/numerics/tensor.hpp"

namespace byov::num {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class S>
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<std::vector<S>> m;
  std::vector<std::vector<S>> v;

  // Zero moments sized to match each parameter.
  static AdamState init(const std::vector<Tensor<S>>& params, AdamConfig config = {});
};

// One bias-corrected Adam update over every parameter, then clears the
// gradients. Throws ContractError if any parameter has no gradient.
template <class S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state);

}  // namespace byov::num
