#pragma once

// Transformer encoder/decoder for masked ego-exo modeling.
//
// Encoder: input projection d -> d_model, learned absolute positions, pre-norm
// blocks with bidirectional attention over the visible frames, final norm.
// Decoder: pre-norm blocks over mask-filled sequences, final norm, output
// projection d_model -> d.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "byov/data.hpp"
#include "byov/mask_plan.hpp"
#include "byov/numerics/ops.hpp"
#include "byov/numerics/tensor.hpp"
#include "byov/stm.hpp"

namespace byov::model {

using num::Tensor;

struct ArchConfig {
  std::size_t d_in = 768;  // frame embedding width (CLIP ViT-B/16 hidden size)
  std::size_t d_model = 256;
  std::size_t encoder_blocks = 12;
  std::size_t decoder_blocks = 4;
  std::size_t heads = 1;
  std::size_t max_len = 512;
  double encoder_mlp_ratio = 4.0;
  double decoder_mlp_ratio = 2.5;
  double ln_eps = 1e-5;
  // Diagnostic switch: drop the encoder/decoder final norms.
  bool final_norm = true;

  std::size_t encoder_hidden() const;
  std::size_t decoder_hidden() const;
  void validate() const;
};

template <class S>
struct BlockParams {
  Tensor<S> ln1_gamma, ln1_beta;
  // Keys carry no bias: it would shift every score in a row equally.
  Tensor<S> wq, bq, wk, wv, bv, wo, bo;
  Tensor<S> ln2_gamma, ln2_beta;
  Tensor<S> w1, b1, w2, b2;
};

template <class S>
using NamedTensors = std::vector<std::pair<std::string, Tensor<S>>>;

template <class S>
struct ModelParams {
  ArchConfig arch;

  // encoder
  Tensor<S> in_w, in_b;
  Tensor<S> pos_embed;  // max_len x d_model, shared by encoder and decoder inputs
  std::vector<BlockParams<S>> encoder;
  Tensor<S> enc_ln_gamma, enc_ln_beta;

  // decoder
  Tensor<S> mask_token, begin_token;
  Tensor<S> seg_own, seg_other;  // view-segment embeddings for cross-view decoding
  std::vector<BlockParams<S>> decoder;
  Tensor<S> dec_ln_gamma, dec_ln_beta;
  Tensor<S> out_w, out_b;

  static ModelParams init(const ArchConfig& arch, Rng& rng);

  // Declaration order; this is also the checkpoint order.
  NamedTensors<S> named() const;
  std::vector<Tensor<S>> tensors() const;
  NamedTensors<S> encoder_named() const;
  NamedTensors<S> decoder_named() const;
  std::size_t encoder_param_count() const;
  std::size_t decoder_param_count() const;

  // Leaves sharing these values with fresh gradient buffers.
  ModelParams alias() const;
  // Copy in another precision; never records gradients into the source.
  template <class T>
  ModelParams<T> cast() const;
};

template <class S>
struct LatentSequence {
  std::string video_id;
  View view = View::ego;
  std::vector<std::size_t> positions;  // source frame indices, strictly increasing
  Tensor<S> data;                      // L x d_model
};

// Rows of a merged frame sequence as an L x d tensor.
template <class S>
Tensor<S> frame_rows(const stm::FrameEmbeddingSequence& x, std::span<const std::size_t> rows);
template <class S>
Tensor<S> frame_rows(const stm::FrameEmbeddingSequence& x);

template <class S>
Tensor<S> encode(const ModelParams<S>& params, const Tensor<S>& x_visible, std::span<const std::size_t> positions);

template <class S>
LatentSequence<S> encode_frames(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& x,
                                std::span<const std::size_t> positions, View view);

// Row t is the encoded latent for visible t and mask_token for masked t;
// pos_embed[t] is added to every row.
template <class S>
Tensor<S> build_mask_filled(const ModelParams<S>& params, const Tensor<S>& z_visible, const byov::MaskPlan& plan);

// Lower-triangular (self-inclusive) additive mask over the L+1 decoder rows
// [BOS, m_0, ..., m_{L-1}]. Row t of the decoder output reconstructs frame t,
// so frame t is predicted from {BOS, m_0, ..., m_{t-1}} only; the final row
// is discarded.
template <class S>
num::AttentionMask<S> causal_mask(std::size_t L);

// Key slots that the prediction of frame t may see under causal_mask(L):
// 0 denotes BOS and k + 1 denotes data token k.
std::vector<std::size_t> causal_context(std::size_t L, std::size_t t);

// Self-view decoding; returns T x d. With causal=false the decoder attends
// bidirectionally and the BOS row is dropped instead.
template <class S>
Tensor<S> decode_msm(const ModelParams<S>& params, const Tensor<S>& mask_filled, bool causal = true);

// Cross-view decoding over [own mask-filled || other-view latents] with full
// attention; returns the T_own x d reconstruction.
template <class S>
Tensor<S> decode_mcm(const ModelParams<S>& params, const Tensor<S>& own_mask_filled, const LatentSequence<S>& other);

// Several independent sequences through the encoder in one pass. Attention
// never crosses sequence boundaries; returns one latent tensor per input.
template <class S>
std::vector<Tensor<S>> encode_packed(const ModelParams<S>& params, const std::vector<Tensor<S>>& inputs,
                                     const std::vector<std::vector<std::size_t>>& positions);

template <class S>
struct DecodeRequest {
  Tensor<S> mask_filled;
  // Null selects self-view decoding; otherwise cross-view against these latents.
  const LatentSequence<S>* other = nullptr;
  bool causal = true;  // self-view only
};

// Packed equivalent of decode_msm / decode_mcm over several requests.
template <class S>
std::vector<Tensor<S>> decode_packed(const ModelParams<S>& params, const std::vector<DecodeRequest<S>>& requests);

// One pre-norm transformer block; exposed for tests.
template <class S>
Tensor<S> transformer_block(const BlockParams<S>& block, const Tensor<S>& x, const num::AttentionMask<S>* mask,
                            std::size_t heads, double ln_eps);

}  // namespace byov::model
