#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "byov/numerics/tensor.hpp"

namespace byov::num {

struct GradCheckOptions {
  double h = 1e-5;                    // must lie in [1e-6, 1e-4]
  std::size_t max_coords_per_param = 16;  // 0 checks every coordinate
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coords_checked = 0;
};

// Central differences against reverse-mode gradients on a random subsample
// of coordinates. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
// denominator. Parameter gradients are cleared on return.
GradCheckResult finite_diff_check(const std::function<Tensor<double>()>& loss_fn,
                                  std::vector<Tensor<double>>& params, const GradCheckOptions& options = {});

}  // namespace byov::num
