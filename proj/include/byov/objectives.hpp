#pragma once

// Masked self-view (MSM) and masked cross-view (MCM) reconstruction losses
// and their sum.

#include <optional>

#include "byov/mask_plan.hpp"
#include "byov/model.hpp"
#include "byov/stm.hpp"

namespace byov::objectives {

using model::LatentSequence;
using model::ModelParams;
using num::Tensor;

struct ObjectiveConfig {
  double msm_ratio = 0.4;
  double mcm_ratio = 0.8;
  bool enable_msm = true;
  bool enable_mcm = true;
  bool enable_causal = true;
  // Restrict the reconstruction error to masked frames (ablation surface).
  bool masked_only_loss = false;
};

struct LossBreakdown {
  double l_msm_ego = 0;
  double l_msm_exo = 0;
  double l_mcm_ego = 0;
  double l_mcm_exo = 0;
  double l_total = 0;
};

template <class S>
Tensor<S> reconstruction_loss(const Tensor<S>& target, const Tensor<S>& prediction, const MaskPlan& plan,
                              bool masked_only);

// Encode visible frames, mask-fill, decode causally (unless disabled) and
// score against the whole merged sequence.
template <class S>
Tensor<S> msm_loss(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& xbar, const MaskPlan& plan,
                   const ObjectiveConfig& config = {});

// z_other_full must encode every frame of the other view.
template <class S>
Tensor<S> mcm_loss(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& xbar_own, const MaskPlan& plan_own,
                   const LatentSequence<S>& z_other_full, const ObjectiveConfig& config = {});

struct JointPlans {
  MaskPlan msm_ego, msm_exo, mcm_ego, mcm_exo;
};

// Independent draws in the order msm_ego, msm_exo, mcm_ego, mcm_exo.
JointPlans draw_joint_plans(std::size_t t_ego, std::size_t t_exo, const ObjectiveConfig& config, Rng& rng);

template <class S>
struct JointTerms {
  // Undefined when the objective is disabled.
  Tensor<S> msm_ego, msm_exo, mcm_ego, mcm_exo;
};

// Builds all enabled loss graphs in packed encoder/decoder passes without
// running backward.
template <class S>
JointTerms<S> joint_terms(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& ego,
                          const stm::FrameEmbeddingSequence& exo, const JointPlans& plans, const ObjectiveConfig& config);

// Draws plans, builds every enabled loss and back-propagates their sum, so
// parameter gradients hold the gradient of l_total. Returns the values.
template <class S>
LossBreakdown joint_step_losses(const ModelParams<S>& params, const stm::FrameEmbeddingSequence& ego,
                                const stm::FrameEmbeddingSequence& exo, Rng& rng, const ObjectiveConfig& config);

}  // namespace byov::objectives
