#pragma once

#include <cstddef>
#include <vector>

#include "byov/data.hpp"

namespace byov {

// Visible/masked partition of the frame positions [0, T).
struct MaskPlan {
  std::size_t T = 0;
  double ratio = 0.0;
  std::vector<std::size_t> masked;   // ascending
  std::vector<std::size_t> visible;  // ascending

  // Throws std::invalid_argument unless masked and visible partition [0, T).
  void validate() const;
};

// clamp(round-half-up(ratio * T), 0, T).
std::size_t masked_count(std::size_t T, double ratio);

// Uniform draw of masked_count(T, ratio) positions without replacement.
MaskPlan sample_mask_plan(std::size_t T, double ratio, Rng& rng);

// Plan with an explicit masked set; the rest is visible.
MaskPlan make_mask_plan(std::size_t T, std::vector<std::size_t> masked);

}  // namespace byov
