#pragma once

// Selective token merging: tokens are scored by their mean absolute change
// between consecutive frames and the top-K per frame are averaged into one
// frame embedding.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "byov/data.hpp"

namespace byov::stm {

struct FrameEmbeddingSequence {
  std::string video_id;
  std::size_t T = 0;
  std::size_t d = 0;
  std::vector<float> data;  // T x d row-major

  float at(std::size_t t, std::size_t c) const { return data[t * d + c]; }
};

struct SelectionResult {
  std::size_t T = 0;
  std::size_t N = 0;
  std::size_t K = 0;
  double ratio = 1.0;
  std::vector<double> scores;                 // (T-1) x N
  std::vector<std::vector<std::size_t>> selected;  // T rows of K ascending indices
};

// max(1, round-half-up(ratio * N)).
std::size_t tokens_to_keep(double ratio, std::size_t N);

// s[t][n] = mean_c |x[t][n][c] - x[t+1][n][c]|; requires T >= 2.
std::vector<double> token_change_scores(const TokenEmbeddingSequence& x);

// Indices of the K largest entries, lower index first on ties, returned ascending.
std::vector<std::size_t> select_topk(const std::vector<double>& scores_row, std::size_t K);

struct MergeResult {
  FrameEmbeddingSequence frames;
  SelectionResult selection;
};

// Frame t uses score row t; the last frame reuses row T-2.
MergeResult merge_selected(const TokenEmbeddingSequence& x, double ratio);

// Plain average over all N tokens (the token-selection ablation).
FrameEmbeddingSequence mean_pool(const TokenEmbeddingSequence& x);

}  // namespace byov::stm
