#include "byov/stm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace byov::stm {

std::size_t tokens_to_keep(double ratio, std::size_t N) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("token selection ratio must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(ratio * double(N) + 0.5));
  return std::clamp<std::size_t>(k, 1, N);
}

std::vector<double> token_change_scores(const TokenEmbeddingSequence& x) {
  if (x.T < 2) throw std::invalid_argument("token_change_scores: video '" + x.video_id + "' needs at least two frames");
  const std::size_t N = x.N, d = x.d;
  std::vector<double> scores((x.T - 1) * N);
  for (std::size_t t = 0; t + 1 < x.T; ++t) {
    const float* a = x.data.data() + t * N * d;
    const float* b = a + N * d;
    for (std::size_t n = 0; n < N; ++n) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += std::abs(double(a[n * d + c]) - double(b[n * d + c]));
      scores[t * N + n] = acc / double(d);
    }
  }
  return scores;
}

std::vector<std::size_t> select_topk(const std::vector<double>& scores_row, std::size_t K) {
  const std::size_t N = scores_row.size();
  if (K < 1 || K > N) throw std::invalid_argument("select_topk: K must lie in [1, N]");
  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(K), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores_row[a] != scores_row[b]) return scores_row[a] > scores_row[b];
    return a < b;
  });
  idx.resize(K);
  std::sort(idx.begin(), idx.end());
  return idx;
}

MergeResult merge_selected(const TokenEmbeddingSequence& x, double ratio) {
  MergeResult out;
  auto& sel = out.selection;
  sel.T = x.T;
  sel.N = x.N;
  sel.ratio = ratio;
  sel.K = tokens_to_keep(ratio, x.N);
  sel.scores = token_change_scores(x);
  const std::size_t N = x.N, d = x.d;

  std::vector<std::vector<std::size_t>> per_pair;
  per_pair.reserve(x.T - 1);
  for (std::size_t t = 0; t + 1 < x.T; ++t) {
    std::vector<double> row(sel.scores.begin() + t * N, sel.scores.begin() + (t + 1) * N);
    per_pair.push_back(select_topk(row, sel.K));
  }
  sel.selected.resize(x.T);
  for (std::size_t t = 0; t < x.T; ++t) sel.selected[t] = per_pair[std::min(t, x.T - 2)];

  auto& f = out.frames;
  f.video_id = x.video_id;
  f.T = x.T;
  f.d = d;
  f.data.resize(x.T * d);
  std::vector<double> acc(d);
  for (std::size_t t = 0; t < x.T; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t n : sel.selected[t]) {
      const float* tok = x.data.data() + (t * N + n) * d;
      for (std::size_t c = 0; c < d; ++c) acc[c] += double(tok[c]);
    }
    for (std::size_t c = 0; c < d; ++c) f.data[t * d + c] = static_cast<float>(acc[c] / double(sel.K));
  }
  return out;
}

FrameEmbeddingSequence mean_pool(const TokenEmbeddingSequence& x) {
  FrameEmbeddingSequence f{x.video_id, x.T, x.d, std::vector<float>(x.T * x.d)};
  std::vector<double> acc(x.d);
  for (std::size_t t = 0; t < x.T; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t n = 0; n < x.N; ++n) {
      const float* tok = x.data.data() + (t * x.N + n) * x.d;
      for (std::size_t c = 0; c < x.d; ++c) acc[c] += double(tok[c]);
    }
    for (std::size_t c = 0; c < x.d; ++c) f.data[t * x.d + c] = static_cast<float>(acc[c] / double(x.N));
  }
  return f;
}

}  // namespace byov::stm
