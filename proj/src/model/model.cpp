#include "byov/model.hpp"

#include <algorithm>
#include <optional>
#include <cmath>

namespace byov::model {

using num::AttentionMask;
using num::ContractError;
using num::DimensionError;

std::size_t ArchConfig::encoder_hidden() const {
  return static_cast<std::size_t>(std::lround(encoder_mlp_ratio * double(d_model)));
}

std::size_t ArchConfig::decoder_hidden() const {
  return static_cast<std::size_t>(std::lround(decoder_mlp_ratio * double(d_model)));
}

void ArchConfig::validate() const {
  if (d_in == 0 || d_model == 0 || max_len == 0) throw std::invalid_argument("arch: widths and max_len must be positive");
  if (heads == 0 || d_model % heads != 0) throw std::invalid_argument("arch: d_model must be divisible by heads");
  if (encoder_hidden() == 0 || decoder_hidden() == 0) throw std::invalid_argument("arch: MLP ratios must be positive");
  if (!(ln_eps > 0)) throw std::invalid_argument("arch: ln_eps must be positive");
}

namespace {

template <class S, class F>
void visit_block(BlockParams<S>& b, const std::string& prefix, F&& f) {
  f(prefix + "ln1.gamma", b.ln1_gamma);
  f(prefix + "ln1.beta", b.ln1_beta);
  f(prefix + "attn.wq", b.wq);
  f(prefix + "attn.bq", b.bq);
  f(prefix + "attn.wk", b.wk);
  f(prefix + "attn.wv", b.wv);
  f(prefix + "attn.bv", b.bv);
  f(prefix + "attn.wo", b.wo);
  f(prefix + "attn.bo", b.bo);
  f(prefix + "ln2.gamma", b.ln2_gamma);
  f(prefix + "ln2.beta", b.ln2_beta);
  f(prefix + "mlp.w1", b.w1);
  f(prefix + "mlp.b1", b.b1);
  f(prefix + "mlp.w2", b.w2);
  f(prefix + "mlp.b2", b.b2);
}

template <class S, class F>
void visit_encoder(ModelParams<S>& p, F&& f) {
  f("encoder.in.w", p.in_w);
  f("encoder.in.b", p.in_b);
  f("encoder.pos_embed", p.pos_embed);
  for (std::size_t i = 0; i < p.encoder.size(); ++i) visit_block(p.encoder[i], "encoder.block" + std::to_string(i) + ".", f);
  f("encoder.ln.gamma", p.enc_ln_gamma);
  f("encoder.ln.beta", p.enc_ln_beta);
}

template <class S, class F>
void visit_decoder(ModelParams<S>& p, F&& f) {
  f("decoder.mask_token", p.mask_token);
  f("decoder.begin_token", p.begin_token);
  f("decoder.seg_own", p.seg_own);
  f("decoder.seg_other", p.seg_other);
  for (std::size_t i = 0; i < p.decoder.size(); ++i) visit_block(p.decoder[i], "decoder.block" + std::to_string(i) + ".", f);
  f("decoder.ln.gamma", p.dec_ln_gamma);
  f("decoder.ln.beta", p.dec_ln_beta);
  f("decoder.out.w", p.out_w);
  f("decoder.out.b", p.out_b);
}

template <class S, class F>
void visit_all(ModelParams<S>& p, F&& f) {
  visit_encoder(p, f);
  visit_decoder(p, f);
}

template <class S>
Tensor<S> normal_tensor(num::Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<S> data(num::shape_numel(shape));
  for (auto& v : data) v = static_cast<S>(normal(rng));
  return Tensor<S>::from_data(std::move(shape), std::move(data), true);
}

template <class S>
Tensor<S> const_tensor(num::Shape shape, S value) {
  std::vector<S> data(num::shape_numel(shape), value);
  return Tensor<S>::from_data(std::move(shape), std::move(data), true);
}

template <class S>
BlockParams<S> init_block(std::size_t width, std::size_t hidden, std::size_t depth, Rng& rng) {
  const double std_in = 0.02;
  const double std_out = 0.02 / std::sqrt(2.0 * double(std::max<std::size_t>(depth, 1)));
  BlockParams<S> b;
  b.ln1_gamma = const_tensor<S>({width}, S(1));
  b.ln1_beta = const_tensor<S>({width}, S(0));
  b.wq = normal_tensor<S>({width, width}, std_in, rng);
  b.bq = const_tensor<S>({width}, S(0));
  b.wk = normal_tensor<S>({width, width}, std_in, rng);
  b.wv = normal_tensor<S>({width, width}, std_in, rng);
  b.bv = const_tensor<S>({width}, S(0));
  b.wo = normal_tensor<S>({width, width}, std_out, rng);
  b.bo = const_tensor<S>({width}, S(0));
  b.ln2_gamma = const_tensor<S>({width}, S(1));
  b.ln2_beta = const_tensor<S>({width}, S(0));
  b.w1 = normal_tensor<S>({width, hidden}, std_in, rng);
  b.b1 = const_tensor<S>({hidden}, S(0));
  b.w2 = normal_tensor<S>({hidden, width}, std_out, rng);
  b.b2 = const_tensor<S>({width}, S(0));
  return b;
}

}  // namespace

template <class S>
ModelParams<S> ModelParams<S>::init(const ArchConfig& arch, Rng& rng) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  const std::size_t dm = arch.d_model;
  const double xavier = std::sqrt(2.0 / double(arch.d_in + dm));
  p.in_w = normal_tensor<S>({arch.d_in, dm}, xavier, rng);
  p.in_b = const_tensor<S>({dm}, S(0));
  p.pos_embed = normal_tensor<S>({arch.max_len, dm}, 0.02, rng);
  for (std::size_t i = 0; i < arch.encoder_blocks; ++i)
    p.encoder.push_back(init_block<S>(dm, arch.encoder_hidden(), arch.encoder_blocks, rng));
  p.enc_ln_gamma = const_tensor<S>({dm}, S(1));
  p.enc_ln_beta = const_tensor<S>({dm}, S(0));

  p.mask_token = normal_tensor<S>({dm}, 0.02, rng);
  p.begin_token = normal_tensor<S>({dm}, 0.02, rng);
  p.seg_own = normal_tensor<S>({dm}, 0.02, rng);
  p.seg_other = normal_tensor<S>({dm}, 0.02, rng);
  for (std::size_t i = 0; i < arch.decoder_blocks; ++i)
    p.decoder.push_back(init_block<S>(dm, arch.decoder_hidden(), arch.decoder_blocks, rng));
  p.dec_ln_gamma = const_tensor<S>({dm}, S(1));
  p.dec_ln_beta = const_tensor<S>({dm}, S(0));
  p.out_w = normal_tensor<S>({dm, arch.d_in}, xavier, rng);
  p.out_b = const_tensor<S>({arch.d_in}, S(0));
  return p;
}

template <class S>
NamedTensors<S> ModelParams<S>::named() const {
  NamedTensors<S> out;
  visit_all(const_cast<ModelParams&>(*this), [&](std::string name, Tensor<S>& t) { out.emplace_back(std::move(name), t); });
  return out;
}

template <class S>
std::vector<Tensor<S>> ModelParams<S>::tensors() const {
  std::vector<Tensor<S>> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

template <class S>
NamedTensors<S> ModelParams<S>::encoder_named() const {
  NamedTensors<S> out;
  visit_encoder(const_cast<ModelParams&>(*this), [&](std::string name, Tensor<S>& t) { out.emplace_back(std::move(name), t); });
  return out;
}

template <class S>
NamedTensors<S> ModelParams<S>::decoder_named() const {
  NamedTensors<S> out;
  visit_decoder(const_cast<ModelParams&>(*this), [&](std::string name, Tensor<S>& t) { out.emplace_back(std::move(name), t); });
  return out;
}

template <class S>
std::size_t ModelParams<S>::encoder_param_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : encoder_named()) n += t.numel();
  return n;
}

template <class S>
std::size_t ModelParams<S>::decoder_param_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : decoder_named()) n += t.numel();
  return n;
}

template <class S>
ModelParams<S> ModelParams<S>::alias() const {
  ModelParams out = *this;
  visit_all(out, [](const std::string&, Tensor<S>& t) { t = t.alias(); });
  return out;
}

template <class S>
template <class T>
ModelParams<T> ModelParams<S>::cast() const {
  ModelParams<T> out;
  out.arch = arch;
  out.encoder.resize(encoder.size());
  out.decoder.resize(decoder.size());
  auto src = named();
  std::size_t i = 0;
  visit_all(out, [&](const std::string&, Tensor<T>& t) {
    const Tensor<S>& from = src[i++].second;
    std::vector<T> data(from.data().begin(), from.data().end());
    t = Tensor<T>::from_data(from.shape(), std::move(data), from.requires_grad());
  });
  return out;
}

template <class S>
Tensor<S> frame_rows(const stm::FrameEmbeddingSequence& x, std::span<const std::size_t> rows) {
  std::vector<S> data;
  data.reserve(rows.size() * x.d);
  for (std::size_t r : rows) {
    if (r >= x.T) throw DimensionError("frame_rows: frame index outside the sequence");
    for (std::size_t c = 0; c < x.d; ++c) data.push_back(static_cast<S>(x.at(r, c)));
  }
  return Tensor<S>::from_data({rows.size(), x.d}, std::move(data));
}

template <class S>
Tensor<S> frame_rows(const stm::FrameEmbeddingSequence& x) {
  std::vector<S> data(x.data.begin(), x.data.end());
  return Tensor<S>::from_data({x.T, x.d}, std::move(data));
}

template <class S>
Tensor<S> transformer_block(const BlockParams<S>& b, const Tensor<S>& x, const AttentionMask<S>* mask,
                            std::size_t heads, double ln_eps) {
  const S eps = static_cast<S>(ln_eps);
  Tensor<S> h = num::layer_norm(x, b.ln1_gamma, b.ln1_beta, eps);
  Tensor<S> q = num::linear(h, b.wq, b.bq);
  Tensor<S> k = num::matmul(h, b.wk);
  Tensor<S> v = num::linear(h, b.wv, b.bv);
  Tensor<S> a = num::masked_attention(q, k, v, mask, heads);
  Tensor<S> x1 = num::add(x, num::linear(a, b.wo, b.bo));
  Tensor<S> h2 = num::layer_norm(x1, b.ln2_gamma, b.ln2_beta, eps);
  Tensor<S> m = num::linear(num::gelu(num::linear(h2, b.w1, b.b1)), b.w2, b.b2);
  return num::add(x1, m);
}

namespace {

template <class S>
Tensor<S> run_blocks(const std::vector<BlockParams<S>>& blocks, Tensor<S> x, const AttentionMask<S>* mask,
                     const ArchConfig& arch) {
  for (const auto& b : blocks) x = transformer_block(b, x, mask, arch.heads, arch.ln_eps);
  return x;
}

template <class S>
Tensor<S> decoder_head(const ModelParams<S>& p, const Tensor<S>& rows) {
  Tensor<S> h = p.arch.final_norm ? num::layer_norm(rows, p.dec_ln_gamma, p.dec_ln_beta, static_cast<S>(p.arch.ln_eps)) : rows;
  return num::linear(h, p.out_w, p.out_b);
}

}  // namespace

namespace {

void check_positions(const ArchConfig& arch, std::size_t rows, std::span<const std::size_t> positions) {
  if (rows == 0 || positions.empty()) throw DimensionError("encode: empty sequence");
  if (positions.size() != rows) throw DimensionError("encode: positions do not match input rows");
  if (rows > arch.max_len) throw DimensionError("encode: sequence length exceeds max_len");
  for (std::size_t i = 0; i < rows; ++i) {
    if (positions[i] >= arch.max_len) throw DimensionError("encode: position outside the positional table");
    if (i > 0 && positions[i] <= positions[i - 1]) throw ContractError("encode: positions must be strictly increasing");
  }
}

// Block-diagonal mask over consecutive segments; a null local mask means the
// segment attends fully within itself. Returns an empty mask when a single
// unmasked segment needs none.
template <class S>
std::optional<AttentionMask<S>> packed_mask(const std::vector<std::pair<std::size_t, const AttentionMask<S>*>>& segments) {
  if (segments.size() == 1 && !segments.front().second) return std::nullopt;
  std::size_t n = 0;
  for (auto& [len, local] : segments) n += len;
  AttentionMask<S> m{n, std::vector<S>(n * n, AttentionMask<S>::blocked())};
  std::size_t off = 0;
  for (auto& [len, local] : segments) {
    if (local && local->size != len) throw DimensionError("packed_mask: local mask size differs from its segment");
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < len; ++j) m.values[(off + i) * n + off + j] = local ? local->values[i * len + j] : S(0);
    off += len;
  }
  return m;
}

}  // namespace

template <class S>
std::vector<Tensor<S>> encode_packed(const ModelParams<S>& p, const std::vector<Tensor<S>>& inputs,
                                     const std::vector<std::vector<std::size_t>>& positions) {
  if (inputs.empty() || inputs.size() != positions.size()) throw ContractError("encode_packed: inputs and positions differ in count");
  std::vector<std::pair<std::size_t, const AttentionMask<S>*>> segments;
  std::vector<std::size_t> all_pos;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    if (inputs[s].ndim() != 2) throw DimensionError("encode: expected an L x d input");
    check_positions(p.arch, inputs[s].dim(0), positions[s]);
    segments.emplace_back(inputs[s].dim(0), nullptr);
    all_pos.insert(all_pos.end(), positions[s].begin(), positions[s].end());
  }
  const auto mask = packed_mask<S>(segments);
  Tensor<S> x = inputs.size() == 1 ? inputs.front() : num::concat_rows(inputs);
  Tensor<S> h = num::add(num::linear(x, p.in_w, p.in_b), num::gather_rows(p.pos_embed, all_pos));
  h = run_blocks<S>(p.encoder, h, mask ? &*mask : nullptr, p.arch);
  if (p.arch.final_norm) h = num::layer_norm(h, p.enc_ln_gamma, p.enc_ln_beta, static_cast<S>(p.arch.ln_eps));
  if (inputs.size() == 1) return {h};
  std::vector<Tensor<S>> out;
  std::size_t off = 0;
  for (auto& [len, local] : segments) {
    out.push_back(num::slice_rows(h, off, off + len));
    off += len;
  }
  return out;
}

template <class S>
Tensor<S> encode(const ModelParams<S>& p, const Tensor<S>& x_visible, std::span<const std::size_t> positions) {
  if (x_visible.ndim() != 2) throw DimensionError("encode: expected an L x d input");
  return encode_packed<S>(p, {x_visible}, {std::vector<std::size_t>(positions.begin(), positions.end())}).front();
}

template <class S>
LatentSequence<S> encode_frames(const ModelParams<S>& p, const stm::FrameEmbeddingSequence& x,
                                std::span<const std::size_t> positions, View view) {
  LatentSequence<S> z;
  z.video_id = x.video_id;
  z.view = view;
  z.positions.assign(positions.begin(), positions.end());
  z.data = encode(p, frame_rows<S>(x, positions), positions);
  return z;
}

template <class S>
Tensor<S> build_mask_filled(const ModelParams<S>& p, const Tensor<S>& z_visible, const MaskPlan& plan) {
  plan.validate();
  const std::size_t T = plan.T;
  if (T > p.arch.max_len) throw DimensionError("build_mask_filled: T exceeds max_len");
  const std::size_t nv = plan.visible.size();
  if (nv > 0 && (z_visible.ndim() != 2 || z_visible.dim(0) != nv)) {
    throw ContractError("build_mask_filled: encoded rows do not align with the plan's visible frames");
  }
  // Source table: visible latents followed by the mask token at row nv.
  std::vector<Tensor<S>> parts;
  if (nv > 0) parts.push_back(z_visible);
  parts.push_back(num::as_row(p.mask_token));
  Tensor<S> table = num::concat_rows(parts);
  std::vector<std::size_t> source(T, nv);
  for (std::size_t i = 0; i < nv; ++i) source[plan.visible[i]] = i;
  std::vector<std::size_t> positions(T);
  for (std::size_t t = 0; t < T; ++t) positions[t] = t;
  return num::add(num::gather_rows(table, source), num::gather_rows(p.pos_embed, positions));
}

template <class S>
AttentionMask<S> causal_mask(std::size_t L) {
  if (L == 0) throw DimensionError("causal_mask: L must be at least 1");
  const std::size_t n = L + 1;
  AttentionMask<S> m{n, std::vector<S>(n * n, AttentionMask<S>::blocked())};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.values[i * n + j] = S(0);
  return m;
}

std::vector<std::size_t> causal_context(std::size_t L, std::size_t t) {
  if (t >= L) throw DimensionError("causal_context: frame outside the sequence");
  const auto mask = causal_mask<double>(L);
  std::vector<std::size_t> keys;
  for (std::size_t j = 0; j < mask.size; ++j) {
    if (mask.allowed(t, j)) keys.push_back(j);
  }
  return keys;
}

template <class S>
std::vector<Tensor<S>> decode_packed(const ModelParams<S>& p, const std::vector<DecodeRequest<S>>& requests) {
  if (requests.empty()) throw ContractError("decode_packed: no requests");
  struct Segment {
    std::size_t len = 0, out_begin = 0, out_len = 0;
    std::optional<AttentionMask<S>> local;
  };
  std::vector<Segment> segs;
  std::vector<Tensor<S>> rows;
  for (const auto& r : requests) {
    const Tensor<S>& filled = r.mask_filled;
    if (filled.ndim() != 2 || filled.dim(0) == 0 || filled.dim(1) != p.arch.d_model) {
      throw DimensionError("decode: expected a non-empty T x d_model sequence");
    }
    const std::size_t T = filled.dim(0);
    Segment seg;
    if (!r.other) {
      rows.push_back(num::as_row(p.begin_token));
      rows.push_back(filled);
      seg.len = T + 1;
      seg.out_len = T;
      if (r.causal) {
        seg.local = causal_mask<S>(T);
      } else {
        seg.out_begin = 1;
      }
    } else {
      const auto& other = *r.other;
      if (!other.data.defined() || other.positions.empty()) {
        throw ContractError("decode_mcm: cross-view decoding needs a non-empty other-view sequence");
      }
      const std::size_t t_other = other.data.dim(0);
      if (other.positions.size() != t_other) throw ContractError("decode_mcm: other-view positions do not match its rows");
      if (T + t_other > p.arch.max_len) throw DimensionError("decode_mcm: concatenated length exceeds max_len");
      rows.push_back(num::add_rowwise(filled, p.seg_own));
      rows.push_back(num::add_rowwise(num::add(other.data, num::gather_rows(p.pos_embed, other.positions)), p.seg_other));
      seg.len = T + t_other;
      seg.out_len = T;
    }
    segs.push_back(std::move(seg));
  }
  std::vector<std::pair<std::size_t, const AttentionMask<S>*>> layout;
  for (const auto& seg : segs) layout.emplace_back(seg.len, seg.local ? &*seg.local : nullptr);
  const auto mask = packed_mask<S>(layout);
  Tensor<S> h = run_blocks<S>(p.decoder, num::concat_rows(rows), mask ? &*mask : nullptr, p.arch);
  std::vector<Tensor<S>> kept;
  std::size_t off = 0;
  for (const auto& seg : segs) {
    kept.push_back(num::slice_rows(h, off + seg.out_begin, off + seg.out_begin + seg.out_len));
    off += seg.len;
  }
  Tensor<S> y = decoder_head(p, kept.size() == 1 ? kept.front() : num::concat_rows(kept));
  if (requests.size() == 1) return {y};
  std::vector<Tensor<S>> out;
  off = 0;
  for (const auto& seg : segs) {
    out.push_back(num::slice_rows(y, off, off + seg.out_len));
    off += seg.out_len;
  }
  return out;
}

template <class S>
Tensor<S> decode_msm(const ModelParams<S>& p, const Tensor<S>& mask_filled, bool causal) {
  return decode_packed<S>(p, {DecodeRequest<S>{mask_filled, nullptr, causal}}).front();
}

template <class S>
Tensor<S> decode_mcm(const ModelParams<S>& p, const Tensor<S>& own_mask_filled, const LatentSequence<S>& other) {
  return decode_packed<S>(p, {DecodeRequest<S>{own_mask_filled, &other, true}}).front();
}

#define BYOV_INSTANTIATE_MODEL(S)                                                                                     \
  template struct ModelParams<S>;                                                                                     \
  template Tensor<S> frame_rows<S>(const stm::FrameEmbeddingSequence&, std::span<const std::size_t>);                  \
  template Tensor<S> frame_rows<S>(const stm::FrameEmbeddingSequence&);                                                \
  template Tensor<S> encode(const ModelParams<S>&, const Tensor<S>&, std::span<const std::size_t>);                    \
  template LatentSequence<S> encode_frames(const ModelParams<S>&, const stm::FrameEmbeddingSequence&,                  \
                                           std::span<const std::size_t>, View);                                        \
  template Tensor<S> build_mask_filled(const ModelParams<S>&, const Tensor<S>&, const MaskPlan&);                      \
  template AttentionMask<S> causal_mask<S>(std::size_t);                                                               \
  template Tensor<S> decode_msm(const ModelParams<S>&, const Tensor<S>&, bool);                                        \
  template Tensor<S> decode_mcm(const ModelParams<S>&, const Tensor<S>&, const LatentSequence<S>&);                    \
  template std::vector<Tensor<S>> encode_packed(const ModelParams<S>&, const std::vector<Tensor<S>>&,                  \
                                                const std::vector<std::vector<std::size_t>>&);                       \
  template std::vector<Tensor<S>> decode_packed(const ModelParams<S>&, const std::vector<DecodeRequest<S>>&);         \
  template Tensor<S> transformer_block(const BlockParams<S>&, const Tensor<S>&, const AttentionMask<S>*, std::size_t, \
                                       double);

BYOV_INSTANTIATE_MODEL(float)
BYOV_INSTANTIATE_MODEL(double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

#undef BYOV_INSTANTIATE_MODEL

}  // namespace byov::model
