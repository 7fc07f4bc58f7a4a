#include "byov/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace byov {

void MaskPlan::validate() const {
  if (masked.size() + visible.size() != T) throw std::invalid_argument("mask plan does not cover [0, T)");
  std::vector<bool> seen(T, false);
  for (const auto* part : {&masked, &visible}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      const std::size_t t = (*part)[i];
      if (t >= T || seen[t]) throw std::invalid_argument("mask plan is not a partition of [0, T)");
      if (i > 0 && t <= (*part)[i - 1]) throw std::invalid_argument("mask plan index sets must be ascending");
      seen[t] = true;
    }
  }
}

std::size_t masked_count(std::size_t T, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("masking ratio must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(std::floor(ratio * double(T) + 0.5));
  return std::min(n, T);
}

MaskPlan make_mask_plan(std::size_t T, std::vector<std::size_t> masked) {
  std::sort(masked.begin(), masked.end());
  MaskPlan plan;
  plan.T = T;
  plan.ratio = T ? double(masked.size()) / double(T) : 0.0;
  std::vector<bool> is_masked(T, false);
  for (std::size_t t : masked) {
    if (t >= T) throw std::invalid_argument("masked index outside [0, T)");
    is_masked[t] = true;
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (!is_masked[t]) plan.visible.push_back(t);
  }
  plan.masked = std::move(masked);
  plan.validate();
  return plan;
}

MaskPlan sample_mask_plan(std::size_t T, double ratio, Rng& rng) {
  if (T == 0) throw std::invalid_argument("sample_mask_plan: T must be at least 1");
  const std::size_t n = masked_count(T, ratio);
  std::vector<std::size_t> all(T);
  std::iota(all.begin(), all.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n entries are a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, T - 1)(rng);
    std::swap(all[i], all[j]);
  }
  all.resize(n);
  MaskPlan plan = make_mask_plan(T, std::move(all));
  plan.ratio = ratio;
  return plan;
}

}  // namespace byov

namespace byov::objectives {

template <class S>
Tensor<S> reconstruction_loss(const Tensor<S>& target, const Tensor<S>& prediction, const MaskPlan& plan,
                              bool masked_only) {
  if (masked_only && !plan.masked.empty()) return num::mse_loss_rows(prediction, target, plan.masked);
  return num::mse_loss(prediction, target);
}

namespace {

template <class S>
Tensor<S> encode_visible(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& x, const MaskPlan& plan) {
  if (plan.visible.empty()) return {};
  return model::encode(params, model::frame_rows<S>(x, plan.visible), plan.visible);
}

}  // namespace

template <class S>
Tensor<S> msm_loss(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& xbar, const MaskPlan& plan,
                   const ObjectiveConfig& config) {
  if (plan.T != xbar.T) throw std::invalid_argument("msm_loss: plan length differs from the sequence");
  Tensor<S> z = encode_visible(params, xbar, plan);
  Tensor<S> filled = model::build_mask_filled(params, z, plan);
  Tensor<S> y = model::decode_msm(params, filled, config.enable_causal);
  return reconstruction_loss(model::frame_rows<S>(xbar), y, plan, config.masked_only_loss);
}

template <class S>
Tensor<S> mcm_loss(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& xbar_own, const MaskPlan& plan_own,
                   const LatentSequence<S>& z_other_full, const ObjectiveConfig& config) {
  if (plan_own.T != xbar_own.T) throw std::invalid_argument("mcm_loss: plan length differs from the sequence");
  Tensor<S> z = encode_visible(params, xbar_own, plan_own);
  Tensor<S> filled = model::build_mask_filled(params, z, plan_own);
  Tensor<S> y = model::decode_mcm(params, filled, z_other_full);
  return reconstruction_loss(model::frame_rows<S>(xbar_own), y, plan_own, config.masked_only_loss);
}

JointPlans draw_joint_plans(std::size_t t_ego, std::size_t t_exo, const ObjectiveConfig& config, Rng& rng) {
  JointPlans plans;
  plans.msm_ego = sample_mask_plan(t_ego, config.msm_ratio, rng);
  plans.msm_exo = sample_mask_plan(t_exo, config.msm_ratio, rng);
  plans.mcm_ego = sample_mask_plan(t_ego, config.mcm_ratio, rng);
  plans.mcm_exo = sample_mask_plan(t_exo, config.mcm_ratio, rng);
  return plans;
}

template <class S>
JointTerms<S> joint_terms(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& ego,
                          const stm::FrameEmbeddingSequence& exo, const JointPlans& plans,
                          const ObjectiveConfig& config) {
  // All encoder inputs share one packed pass, as do all decoder inputs.
  struct Term {
    const stm::FrameEmbeddingSequence* x;
    const MaskPlan* plan;
    Tensor<S>* out;
    bool cross;
    std::size_t encoded = 0;  // index into the packed encoder outputs, if any
  };
  JointTerms<S> terms;
  std::vector<Term> wanted;
  if (config.enable_msm) {
    wanted.push_back({&ego, &plans.msm_ego, &terms.msm_ego, false});
    wanted.push_back({&exo, &plans.msm_exo, &terms.msm_exo, false});
  }
  if (config.enable_mcm) {
    wanted.push_back({&ego, &plans.mcm_ego, &terms.mcm_ego, true});
    wanted.push_back({&exo, &plans.mcm_exo, &terms.mcm_exo, true});
  }
  if (wanted.empty()) return terms;

  std::vector<Tensor<S>> enc_in;
  std::vector<std::vector<std::size_t>> enc_pos;
  for (auto& t : wanted) {
    if (t.plan->T != t.x->T) throw std::invalid_argument("joint_terms: plan length differs from the sequence");
    if (t.plan->visible.empty()) continue;
    t.encoded = enc_in.size();
    enc_in.push_back(model::frame_rows<S>(*t.x, t.plan->visible));
    enc_pos.push_back(t.plan->visible);
  }
  std::size_t full_base = enc_in.size();
  if (config.enable_mcm) {
    for (const auto* x : {&exo, &ego}) {
      std::vector<std::size_t> all(x->T);
      std::iota(all.begin(), all.end(), std::size_t{0});
      enc_in.push_back(model::frame_rows<S>(*x));
      enc_pos.push_back(std::move(all));
    }
  }
  const auto z = model::encode_packed(params, enc_in, enc_pos);

  LatentSequence<S> full_exo, full_ego;
  if (config.enable_mcm) {
    full_exo = {exo.video_id, View::exo, enc_pos[full_base], z[full_base]};
    full_ego = {ego.video_id, View::ego, enc_pos[full_base + 1], z[full_base + 1]};
  }
  std::vector<model::DecodeRequest<S>> requests;
  for (const auto& t : wanted) {
    Tensor<S> visible = t.plan->visible.empty() ? Tensor<S>{} : z[t.encoded];
    const LatentSequence<S>* other = t.cross ? (t.x == &ego ? &full_exo : &full_ego) : nullptr;
    requests.push_back({model::build_mask_filled(params, visible, *t.plan), other, config.enable_causal});
  }
  const auto y = model::decode_packed(params, requests);
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    *wanted[i].out = reconstruction_loss(model::frame_rows<S>(*wanted[i].x), y[i], *wanted[i].plan, config.masked_only_loss);
  }
  return terms;
}

template <class S>
LossBreakdown joint_step_losses(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& ego,
                                const stm::FrameEmbeddingSequence& exo, Rng& rng, const ObjectiveConfig& config) {
  if (!config.enable_msm && !config.enable_mcm) throw std::invalid_argument("at least one objective must be enabled");
  const JointPlans plans = draw_joint_plans(ego.T, exo.T, config, rng);
  const JointTerms<S> terms = joint_terms(params, ego, exo, plans, config);
  LossBreakdown out;
  std::vector<Tensor<S>> parts;
  auto take = [&](const Tensor<S>& t, double& slot) {
    if (!t.defined()) return;
    slot = static_cast<double>(t.item());
    if (!std::isfinite(slot)) throw num::NumericError("non-finite loss");
    parts.push_back(t);
  };
  take(terms.msm_ego, out.l_msm_ego);
  take(terms.msm_exo, out.l_msm_exo);
  take(terms.mcm_ego, out.l_mcm_ego);
  take(terms.mcm_exo, out.l_mcm_exo);
  out.l_total = out.l_msm_ego + out.l_msm_exo + out.l_mcm_ego + out.l_mcm_exo;
  num::add_scalars(parts).backward();
  return out;
}

#define BYOV_INSTANTIATE_OBJECTIVES(S)                                                                              \
  template Tensor<S> reconstruction_loss(const Tensor<S>&, const Tensor<S>&, const MaskPlan&, bool);                \
  template Tensor<S> msm_loss(const ModelParams<S>&, const stm::FrameEmbeddingSequence&, const MaskPlan&,           \
                              const ObjectiveConfig&);                                                              \
  template Tensor<S> mcm_loss(const ModelParams<S>&, const stm::FrameEmbeddingSequence&, const MaskPlan&,           \
                              const LatentSequence<S>&, const ObjectiveConfig&);                                    \
  template JointTerms<S> joint_terms(const ModelParams<S>&, const stm::FrameEmbeddingSequence&,                     \
                                     const stm::FrameEmbeddingSequence&, const JointPlans&, const ObjectiveConfig&); \
  template LossBreakdown joint_step_losses(const ModelParams<S>&, const stm::FrameEmbeddingSequence&,               \
                                           const stm::FrameEmbeddingSequence&, Rng&, const ObjectiveConfig&);

BYOV_INSTANTIATE_OBJECTIVES(float)
BYOV_INSTANTIATE_OBJECTIVES(double)

#undef BYOV_INSTANTIATE_OBJECTIVES

}  // namespace byov::objectives
