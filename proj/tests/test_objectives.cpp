#include <gtest/gtest.h>

#include <cmath>

#include "byov/numerics/gradcheck.hpp"
#include "byov/objectives.hpp"

using namespace byov;
using namespace byov::model;
using namespace byov::objectives;
using Td = num::Tensor<double>;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.d_in = 8;
  a.d_model = 16;
  a.encoder_blocks = 2;
  a.decoder_blocks = 1;
  a.heads = 2;
  a.max_len = 32;
  return a;
}

ModelParams<double> tiny_model(std::uint64_t seed = 0, ArchConfig arch = tiny_arch()) {
  Rng rng(seed);
  auto p = ModelParams<double>::init(arch, rng);
  std::normal_distribution<double> n(0.0, 0.2);
  for (auto& t : p.tensors())
    for (auto& v : t.mutable_data()) v += n(rng);
  return p;
}

stm::FrameEmbeddingSequence frames(std::size_t T, std::size_t d, std::uint64_t seed, std::string id = "v") {
  Rng rng(seed);
  std::normal_distribution<float> n(0.f, 1.f);
  stm::FrameEmbeddingSequence x{std::move(id), T, d, std::vector<float>(T * d)};
  for (auto& v : x.data) v = n(rng);
  return x;
}

std::vector<std::vector<double>> grads(const ModelParams<double>& p) {
  std::vector<std::vector<double>> out;
  for (const auto& t : p.tensors())
    out.emplace_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end()) : std::vector<double>(t.numel(), 0.0));
  return out;
}

double grad_norm(const NamedTensors<double>& named) {
  double s = 0;
  for (const auto& [name, t] : named)
    if (t.has_grad())
      for (double g : t.grad()) s += g * g;
  return std::sqrt(s);
}

}  // namespace

TEST(MaskPlanTest, DefaultRatiosAtThirtyTwoFrames) {
  Rng rng(0);
  for (int i = 0; i < 1000; ++i) {
    const auto msm = sample_mask_plan(32, 0.4, rng);
    const auto mcm = sample_mask_plan(32, 0.8, rng);
    ASSERT_EQ(msm.masked.size(), 13u);
    ASSERT_EQ(msm.visible.size(), 19u);
    ASSERT_EQ(mcm.visible.size(), 6u);
    msm.validate();
    mcm.validate();
  }
}

TEST(MaskPlanTest, BoundaryRatios) {
  Rng rng(1);
  EXPECT_TRUE(sample_mask_plan(7, 0.0, rng).masked.empty());
  EXPECT_TRUE(sample_mask_plan(7, 1.0, rng).visible.empty());
  EXPECT_EQ(masked_count(5, 0.5), 3u);  // 2.5 rounds up
  EXPECT_THROW(sample_mask_plan(7, 1.1, rng), std::invalid_argument);
  EXPECT_THROW(sample_mask_plan(7, -0.1, rng), std::invalid_argument);
  EXPECT_THROW(sample_mask_plan(0, 0.5, rng), std::invalid_argument);
  EXPECT_THROW(make_mask_plan(3, {3}), std::invalid_argument);
}

TEST(MaskPlanTest, IndicesAreMaskedUniformly) {
  Rng rng(7);
  std::vector<double> freq(10, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    for (std::size_t t : sample_mask_plan(10, 0.4, rng).masked) freq[t] += 1.0 / draws;
  for (double f : freq) EXPECT_NEAR(f, 0.4, 0.01);
}

TEST(MaskPlanTest, JointPlansAreIndependent) {
  Rng rng(3);
  ObjectiveConfig cfg;
  const int draws = 20000;
  const std::size_t T = 12;
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0, n = 0;
  for (int i = 0; i < draws; ++i) {
    const auto plans = draw_joint_plans(T, T, cfg, rng);
    std::vector<double> a(T, 0), b(T, 0), c(T, 0);
    for (auto t : plans.msm_ego.masked) a[t] = 1;
    for (auto t : plans.mcm_ego.masked) b[t] = 1;
    for (auto t : plans.msm_exo.masked) c[t] = 1;
    for (std::size_t t = 0; t < T; ++t) {
      for (double y : {b[t], c[t]}) {
        sx += a[t];
        sy += y;
        sxy += a[t] * y;
        sxx += a[t] * a[t];
        syy += y * y;
        n += 1;
      }
    }
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double r = cov / std::sqrt((sxx / n - (sx / n) * (sx / n)) * (syy / n - (sy / n) * (sy / n)));
  EXPECT_LT(std::abs(r), 0.02);
}

TEST(MsmLoss, EqualsManualComposition) {
  const auto p = tiny_model();
  const auto x = frames(6, 8, 1);
  const auto plan = make_mask_plan(6, {1, 4});
  const double loss = msm_loss(p, x, plan).item();
  const auto z = encode(p, frame_rows<double>(x, plan.visible), plan.visible);
  const auto y = decode_msm(p, build_mask_filled(p, z, plan), true);
  double ref = 0;
  for (std::size_t i = 0; i < 48; ++i) ref += std::pow(y.data()[i] - double(x.data[i]), 2);
  EXPECT_NEAR(loss, ref / 48, 1e-12);
  EXPECT_GT(loss, 0.0);
  // masked_only scores frames 1 and 4 only.
  ObjectiveConfig only;
  only.masked_only_loss = true;
  double ref_masked = 0;
  for (std::size_t t : plan.masked)
    for (std::size_t c = 0; c < 8; ++c) ref_masked += std::pow(y.data()[t * 8 + c] - double(x.at(t, c)), 2);
  EXPECT_NEAR(msm_loss(p, x, plan, only).item(), ref_masked / 16, 1e-12);
  EXPECT_THROW(msm_loss(p, x, make_mask_plan(5, {})), std::invalid_argument);
}

TEST(MsmLoss, QuadraticInInputsForLinearProbe) {
  ArchConfig a = tiny_arch();
  a.encoder_blocks = 0;
  a.decoder_blocks = 0;
  a.final_norm = false;
  auto p = tiny_model(2, a);
  for (auto* t : {&p.in_b, &p.pos_embed, &p.mask_token, &p.begin_token, &p.out_b})
    for (auto& v : t->mutable_data()) v = 0;
  auto x = frames(6, 8, 3);
  const auto plan = make_mask_plan(6, {0, 2});
  const double l1 = msm_loss(p, x, plan).item();
  for (auto& v : x.data) v *= 2;
  EXPECT_NEAR(msm_loss(p, x, plan).item(), 4 * l1, 1e-9 * l1);
}

TEST(MsmLoss, FullMaskingStillTrains) {
  auto p = tiny_model();
  const auto x = frames(5, 8, 4);
  const auto plan = make_mask_plan(5, {0, 1, 2, 3, 4});
  msm_loss(p, x, plan).backward();
  EXPECT_GT(grad_norm(p.decoder_named()), 0.0);
  EXPECT_FALSE(p.in_w.has_grad());
}

TEST(McmLoss, VisibleCountAndBothGradientPaths) {
  Rng rng(5);
  const auto plan = sample_mask_plan(32, 0.8, rng);
  EXPECT_EQ(plan.visible.size(), 6u);

  const auto base = tiny_model(3);
  const auto own = base.alias(), other_path = base.alias();
  const auto ego = frames(10, 8, 1), exo = frames(7, 8, 2);
  const auto z_other = encode_frames(other_path, exo, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}, View::exo);
  const auto p10 = sample_mask_plan(10, 0.8, rng);
  mcm_loss(own, ego, p10, z_other).backward();
  EXPECT_GT(grad_norm(own.encoder_named()), 0.0);
  EXPECT_GT(grad_norm(other_path.encoder_named()), 0.0);
  EXPECT_GT(grad_norm(own.decoder_named()), 0.0);
}

TEST(Joint, TotalIsSumAndFlagsDropTerms) {
  const auto p = tiny_model();
  const auto ego = frames(9, 8, 1, "e"), exo = frames(7, 8, 2, "x");
  ObjectiveConfig cfg;
  Rng rng(0);
  const auto l = joint_step_losses(p, ego, exo, rng, cfg);
  EXPECT_NEAR(l.l_total, l.l_msm_ego + l.l_msm_exo + l.l_mcm_ego + l.l_mcm_exo, 1e-12);
  for (double v : {l.l_msm_ego, l.l_msm_exo, l.l_mcm_ego, l.l_mcm_exo}) EXPECT_GT(v, 0.0);
  cfg.enable_mcm = false;
  const auto a = tiny_model();
  const auto m = joint_step_losses(a, ego, exo, rng, cfg);
  EXPECT_EQ(m.l_mcm_ego, 0.0);
  EXPECT_EQ(m.l_mcm_exo, 0.0);
  EXPECT_EQ(m.l_total, m.l_msm_ego + m.l_msm_exo);
  cfg.enable_msm = false;
  EXPECT_THROW(joint_step_losses(a, ego, exo, rng, cfg), std::invalid_argument);
}

TEST(Joint, PackedTermsMatchReferenceLosses) {
  const auto p = tiny_model(6);
  const auto ego = frames(9, 8, 1, "e"), exo = frames(7, 8, 2, "x");
  ObjectiveConfig cfg;
  Rng rng(4);
  const auto plans = draw_joint_plans(9, 7, cfg, rng);
  const auto terms = joint_terms(p, ego, exo, plans, cfg);
  const auto z_exo = encode_frames(p, exo, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}, View::exo);
  const auto z_ego = encode_frames(p, ego, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8}, View::ego);
  EXPECT_NEAR(terms.msm_ego.item(), msm_loss(p, ego, plans.msm_ego, cfg).item(), 1e-12);
  EXPECT_NEAR(terms.msm_exo.item(), msm_loss(p, exo, plans.msm_exo, cfg).item(), 1e-12);
  EXPECT_NEAR(terms.mcm_ego.item(), mcm_loss(p, ego, plans.mcm_ego, z_exo, cfg).item(), 1e-12);
  EXPECT_NEAR(terms.mcm_exo.item(), mcm_loss(p, exo, plans.mcm_exo, z_ego, cfg).item(), 1e-12);
}

TEST(Joint, PerLossBackwardEqualsSummedBackward) {
  const auto base = tiny_model(7);
  const auto ego = frames(8, 8, 1, "e"), exo = frames(6, 8, 2, "x");
  ObjectiveConfig cfg;
  Rng rng(2);
  const auto plans = draw_joint_plans(8, 6, cfg, rng);

  const auto separate = base.alias();
  const auto z_exo = encode_frames(separate, exo, std::vector<std::size_t>{0, 1, 2, 3, 4, 5}, View::exo);
  const auto z_ego = encode_frames(separate, ego, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}, View::ego);
  msm_loss(separate, ego, plans.msm_ego, cfg).backward();
  msm_loss(separate, exo, plans.msm_exo, cfg).backward();
  mcm_loss(separate, ego, plans.mcm_ego, z_exo, cfg).backward();
  // The second cross-view loss reuses a fresh other-view encoding so each
  // backward sees its own graph.
  const auto z_ego2 = encode_frames(separate, ego, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}, View::ego);
  (void)z_ego;
  mcm_loss(separate, exo, plans.mcm_exo, z_ego2, cfg).backward();

  const auto summed = base.alias();
  Rng replay(2);
  joint_step_losses(summed, ego, exo, replay, cfg);
  const auto a = grads(separate), b = grads(summed);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k) ASSERT_NEAR(a[i][k], b[i][k], 1e-6 * std::abs(a[i][k]) + 1e-12);
}

TEST(Joint, FiniteDifferenceOverFullObjective) {
  const auto p = tiny_model(11);
  const auto ego = frames(6, 8, 1, "e"), exo = frames(6, 8, 2, "x");
  ObjectiveConfig cfg;
  Rng rng(9);
  const auto plans = draw_joint_plans(6, 6, cfg, rng);
  auto params = p.tensors();
  auto loss = [&] {
    const auto t = joint_terms(p, ego, exo, plans, cfg);
    return num::add_scalars<double>({t.msm_ego, t.msm_exo, t.mcm_ego, t.mcm_exo});
  };
  num::GradCheckOptions opt;
  opt.max_coords_per_param = 8;
  const auto r = num::finite_diff_check(loss, params, opt);
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_GT(r.coords_checked, 100u);
}

TEST(Joint, NonFiniteLossIsNumericError) {
  auto p = tiny_model();
  p.out_b.mutable_data()[0] = std::numeric_limits<double>::infinity();
  Rng rng(0);
  EXPECT_THROW(joint_step_losses(p, frames(6, 8, 1), frames(6, 8, 2), rng, ObjectiveConfig{}), num::NumericError);
}
