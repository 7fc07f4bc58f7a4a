#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "byov/numerics/tensor.hpp"

namespace byov::num {

class DegenerateAttentionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Additive attention mask: 0 marks an allowed key, -inf a blocked one.
template <class S>
struct AttentionMask {
  std::size_t size = 0;
  std::vector<S> values;  // size x size, row-major (query, key)

  static AttentionMask full(std::size_t n) { return {n, std::vector<S>(n * n, S(0))}; }
  static constexpr S blocked() { return -std::numeric_limits<S>::infinity(); }
  bool allowed(std::size_t query, std::size_t key) const { return values[query * size + key] == S(0); }
};

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);

// x[L x in] . w[in x out] + bias[out]
template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias);

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);

// x[L x n] + v[n] on every row.
template <class S>
Tensor<S> add_rowwise(const Tensor<S>& x, const Tensor<S>& v);

template <class S>
Tensor<S> scale(const Tensor<S>& x, S factor);

template <class S>
Tensor<S> sum(const Tensor<S>& x);

// Sum of scalar tensors.
template <class S>
Tensor<S> add_scalars(const std::vector<Tensor<S>>& terms);

template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, S eps);

// Tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <class S>
Tensor<S> gelu(const Tensor<S>& x);

// softmax(q k^T / sqrt(d_head) + mask) v, computed independently per head
// over equal column blocks of q, k and v. A null mask means full attention.
template <class S>
Tensor<S> masked_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                           const AttentionMask<S>* mask, std::size_t num_heads = 1);

// Row-wise attention weights for the single-head case; used by tests.
template <class S>
std::vector<S> attention_weights(const Tensor<S>& q, const Tensor<S>& k, const AttentionMask<S>* mask);

// Mean of squared differences over every element.
template <class S>
Tensor<S> mse_loss(const Tensor<S>& a, const Tensor<S>& b);

// Mean of squared differences restricted to the listed rows.
template <class S>
Tensor<S> mse_loss_rows(const Tensor<S>& a, const Tensor<S>& b, std::span<const std::size_t> rows);

template <class S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts);

template <class S>
Tensor<S> slice_rows(const Tensor<S>& x, std::size_t begin, std::size_t end);

// out[i] = table[indices[i]]; repeated indices accumulate in the backward pass.
template <class S>
Tensor<S> gather_rows(const Tensor<S>& table, std::span<const std::size_t> indices);

// View a vector [n] as a 1 x n matrix.
template <class S>
Tensor<S> as_row(const Tensor<S>& v);

}  // namespace byov::num
