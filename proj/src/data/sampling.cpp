#include <algorithm>
#include <numeric>

#include "byov/data.hpp"

namespace byov {

namespace {

std::vector<std::size_t> stratified(std::size_t total, std::size_t target, Rng& rng) {
  std::vector<std::size_t> out(target);
  if (total >= target) {
    for (std::size_t i = 0; i < target; ++i) {
      const std::size_t lo = i * total / target;
      const std::size_t hi = (i + 1) * total / target;  // exclusive, hi > lo
      out[i] = std::uniform_int_distribution<std::size_t>(lo, hi - 1)(rng);
    }
    return out;
  }
  // Short video: slot i takes the frame whose segment contains its left
  // edge, so every frame appears and some repeat.
  for (std::size_t i = 0; i < target; ++i) out[i] = i * total / target;
  return out;
}

}  // namespace

std::vector<std::size_t> sample_frames(std::size_t total, std::size_t target, Rng& rng, SampleMode mode) {
  if (total == 0) throw DatasetError("cannot sample frames from an empty video");
  if (mode == SampleMode::eval_all) {
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  if (target == 0) throw std::invalid_argument("sample_frames: target must be at least 1");
  if (mode == SampleMode::train_uniform && total >= target) {
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    picked.reserve(target);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), target, rng);
    std::sort(picked.begin(), picked.end());
    return picked;
  }
  return stratified(total, target, rng);
}

}  // namespace byov
