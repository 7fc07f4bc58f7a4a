#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "byov/eval.hpp"
#include "oracles.hpp"

using namespace byov;
using namespace byov::eval;
using byov::oracle::random_video;

namespace {

using VideoList = std::vector<const EmbeddedVideo*>;

VideoList ptrs(const std::vector<EmbeddedVideo>& v) {
  VideoList out;
  for (const auto& x : v) out.push_back(&x);
  return out;
}

EmbeddedVideo reversed(const EmbeddedVideo& a, std::string id) {
  EmbeddedVideo b = a;
  b.video_id = std::move(id);
  for (std::size_t t = 0; t < a.T; ++t)
    std::copy(a.row(a.T - 1 - t).begin(), a.row(a.T - 1 - t).end(), b.latents.begin() + t * a.dim);
  return b;
}

void normalize_rows(EmbeddedVideo& v) {
  for (std::size_t t = 0; t < v.T; ++t) {
    double n = 0;
    for (float x : v.row(t)) n += double(x) * double(x);
    for (std::size_t c = 0; c < v.dim; ++c) v.latents[t * v.dim + c] = float(v.latents[t * v.dim + c] / std::sqrt(n));
  }
}

LabeledFrames gaussian_frames(const std::vector<int>& labels, std::size_t dim, double separation, Rng& rng) {
  std::normal_distribution<float> n(0.f, 1.f);
  LabeledFrames f;
  f.dim = dim;
  for (int y : labels) {
    for (std::size_t c = 0; c < dim; ++c) f.x.push_back(n(rng) + (c == std::size_t(y) ? float(separation) : 0.f));
    f.y.push_back(y);
  }
  return f;
}

// Two classes, both views, both splits; latents carry a phase signal.
EmbeddedSplit toy_split(std::uint64_t seed) {
  Rng rng(seed);
  EmbeddedSplit s;
  for (const char* cls : {"a", "b"}) {
    for (Split split : {Split::train, Split::test}) {
      for (View view : {View::ego, View::exo}) {
        for (int i = 0; i < 3; ++i) {
          const std::string id = std::string(cls) + to_string(split) + to_string(view) + std::to_string(i);
          EmbeddedVideo v = random_video(id, view, 12 + std::size_t(i), 6, 3, false, rng);
          v.action_class = cls;
          v.split = split;
          for (std::size_t t = 0; t < v.T; ++t) v.latents[t * v.dim + std::size_t(v.phase_labels[t])] += 3.f;
          (split == Split::train ? s.train : s.test).push_back(std::move(v));
        }
      }
    }
  }
  return s;
}

}  // namespace

// ---- oracles ---------------------------------------------------------------

TEST(Oracle, KendallTauMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const bool quantized = seed % 2 == 1;
    const std::size_t ta = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
    const std::size_t tb = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
    const auto a = random_video("a", View::ego, ta, 4, 2, quantized, rng);
    const auto b = random_video("b", View::exo, tb, 4, 2, quantized, rng);
    ASSERT_EQ(kendall_tau(a, b), oracle::kendall_tau(a, b)) << "seed " << seed;
  }
}

TEST(Oracle, RetrievalMapMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const bool quantized = seed % 2 == 1;
    std::vector<EmbeddedVideo> videos;
    for (int i = 0; i < 4; ++i) {
      const std::size_t T = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
      videos.push_back(random_video("v" + std::to_string(i), i % 2 ? View::exo : View::ego, T, 3, 3, quantized, rng));
    }
    const std::size_t K = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
    // Regular: every video queries every other one. Cross-view: disjoint sets.
    const VideoList all = ptrs(videos), ego{all[0], all[2]}, exo{all[1], all[3]};
    ASSERT_EQ(retrieval_map(all, all, K), oracle::retrieval_map(all, all, K)) << "seed " << seed;
    ASSERT_EQ(retrieval_map(ego, exo, K), oracle::retrieval_map(ego, exo, K)) << "seed " << seed;
  }
}

TEST(Oracle, ProgressionR2MatchesNormalEquations) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    std::vector<EmbeddedVideo> train, test;
    const std::size_t dim = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    for (int i = 0; i < 3; ++i) train.push_back(random_video("tr" + std::to_string(i), View::ego, 16, dim, 3, false, rng));
    for (int i = 0; i < 2; ++i) test.push_back(random_video("te" + std::to_string(i), View::exo, 16, dim, 3, false, rng));
    const VideoList tr = ptrs(train), te = ptrs(test);
    ASSERT_NEAR(phase_progression_r2(tr, te, 1e-4), oracle::progression_r2(tr, te, 1e-4), 1e-8) << "seed " << seed;
  }
}

TEST(Oracle, ProgressionR2SmallInstance) {
  // 8 frames, 3-dimensional latents, latents linear in time plus a wobble.
  EmbeddedVideo v;
  v.video_id = "toy";
  v.T = 8;
  v.dim = 3;
  v.key_event_frames = {3};
  v.phase_labels = {0, 0, 0, 1, 1, 1, 1, 1};
  for (std::size_t t = 0; t < 8; ++t) {
    v.latents.push_back(float(t));
    v.latents.push_back(float((t * t) % 5));
    v.latents.push_back(t % 2 ? 1.f : -1.f);
  }
  const VideoList both{&v};
  // The targets are exactly linear in the first coordinate.
  EXPECT_NEAR(phase_progression_r2(both, both, 0.0), 1.0, 1e-8);
  EXPECT_NEAR(phase_progression_r2(both, both, 0.5), oracle::progression_r2(both, both, 0.5), 1e-8);
}

// ---- alignment ---------------------------------------------------------------

TEST(KendallTau, IdenticalIsOneReversedIsMinusOne) {
  Rng rng(1);
  const auto a = random_video("a", View::ego, 20, 8, 2, false, rng);
  EmbeddedVideo b = a;
  b.video_id = "b";
  EXPECT_EQ(kendall_tau(a, b), 1.0);
  EXPECT_EQ(kendall_tau(a, reversed(a, "r")), -1.0);
}

TEST(KendallTau, CollapsedNeighboursCountAsUnmatched) {
  Rng rng(2);
  const auto a = random_video("a", View::ego, 6, 3, 2, false, rng);
  EmbeddedVideo b = a;
  std::fill(b.latents.begin(), b.latents.end(), 1.f);
  EXPECT_EQ(kendall_tau(a, b), -1.0);
}

TEST(KendallTau, NeedsTwoFrames) {
  Rng rng(3);
  const auto a = random_video("a", View::ego, 1 + 1, 3, 1, false, rng);
  EmbeddedVideo one = a;
  one.T = 1;
  one.latents.resize(3);
  EXPECT_THROW(kendall_tau(one, a), num::ContractError);
  EXPECT_THROW(kendall_tau(a, one), num::ContractError);
}

TEST(KendallTau, NullDistributionCentred) {
  // Independent nearest neighbours in a 20-frame video collide with
  // probability 1/20 per pair, and collisions count as unmatched, so the null
  // mean is -0.05 with a standard deviation near 0.16.
  double sum = 0;
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto a = random_video("a", View::ego, 20, 8, 1, false, rng);
    const auto b = random_video("b", View::exo, 20, 8, 1, false, rng);
    const double tau = kendall_tau(a, b);
    inside += std::abs(tau) < 0.35;
    sum += tau;
  }
  EXPECT_GE(inside, 90);
  EXPECT_NEAR(sum / 100, -0.05, 0.05);
}

TEST(KendallTau, InvariantUnderMonotoneSimilarityRescale) {
  // On unit rows, negated euclidean distance is sqrt(2 - 2 cos) negated, a
  // strictly increasing function of cosine.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto a = random_video("a", View::ego, 15, 5, 1, false, rng);
    auto b = random_video("b", View::exo, 18, 5, 1, false, rng);
    normalize_rows(a);
    normalize_rows(b);
    EXPECT_EQ(kendall_tau(a, b, Similarity::cosine), kendall_tau(a, b, Similarity::euclidean));
  }
}

TEST(KendallTau, DatasetAveragesOrderedCrossViewPairs) {
  Rng rng(4);
  std::vector<EmbeddedVideo> v;
  v.push_back(random_video("e0", View::ego, 10, 4, 1, false, rng));
  v.push_back(random_video("e1", View::ego, 11, 4, 1, false, rng));
  v.push_back(random_video("x0", View::exo, 12, 4, 1, false, rng));
  const double expected =
      (kendall_tau(v[0], v[2]) + kendall_tau(v[2], v[0]) + kendall_tau(v[1], v[2]) + kendall_tau(v[2], v[1])) / 4;
  EXPECT_DOUBLE_EQ(dataset_tau(ptrs(v)), expected);
  EXPECT_THROW(dataset_tau(VideoList{&v[0], &v[1]}), TaskError);
}

// ---- retrieval -------------------------------------------------------------

TEST(Retrieval, HandComputedExample) {
  // Query frame [1,0] ranks gallery rows by cosine: g1 (1.0), g0 (0.6), g2 (0).
  EmbeddedVideo q{"q", View::ego, "c", Split::test, 1, 2, {1.f, 0.f}, {0}, {}};
  EmbeddedVideo g{"g", View::exo, "c", Split::test, 3, 2, {0.6f, 0.8f, 1.f, 0.f, 0.f, 1.f}, {0, 1, 0}, {}};
  const VideoList qs{&q}, gs{&g};
  // Ranked relevance 0,1,1: AP@3 = (1/2 + 2/3) / 2.
  EXPECT_NEAR(retrieval_map(qs, gs, 3), 100.0 * (0.5 + 2.0 / 3.0) / 2.0, 1e-12);
  // Top-1 is irrelevant.
  EXPECT_EQ(retrieval_map(qs, gs, 1), 0.0);
}

TEST(Retrieval, AllRelevantIsHundredNoneRelevantIsZero) {
  Rng rng(5);
  auto q = random_video("q", View::ego, 6, 4, 1, false, rng);
  auto g = random_video("g", View::exo, 9, 4, 1, false, rng);
  EXPECT_DOUBLE_EQ(retrieval_map(VideoList{&q}, VideoList{&g}, 5), 100.0);
  std::fill(g.phase_labels.begin(), g.phase_labels.end(), 7);
  EXPECT_EQ(retrieval_map(VideoList{&q}, VideoList{&g}, 5), 0.0);
}

TEST(Retrieval, OwnVideoExcludedAndErrors) {
  Rng rng(6);
  auto a = random_video("a", View::ego, 6, 4, 2, false, rng);
  EXPECT_THROW(retrieval_map(VideoList{&a}, VideoList{&a}, 1), TaskError);
  auto b = random_video("b", View::exo, 3, 4, 2, false, rng);
  EXPECT_THROW(retrieval_map(VideoList{&a}, VideoList{&b}, 4), TaskError);
  EXPECT_THROW(retrieval_map(VideoList{&a}, VideoList{&b}, 0), ValidationError);
  // A copy of the query under another id would be its own perfect match.
  EmbeddedVideo copy = a;
  copy.video_id = "copy";
  EXPECT_DOUBLE_EQ(retrieval_map(VideoList{&a}, VideoList{&a, &copy}, 1), 100.0);
}

TEST(Retrieval, InvariantUnderRotation) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<EmbeddedVideo> videos;
    for (int i = 0; i < 4; ++i) videos.push_back(random_video("v" + std::to_string(i), View::ego, 10, 5, 3, false, rng));
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(5, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
    std::vector<EmbeddedVideo> rotated = videos;
    for (auto& v : rotated)
      for (std::size_t t = 0; t < v.T; ++t) {
        Eigen::VectorXd x(5);
        for (std::size_t c = 0; c < 5; ++c) x[Eigen::Index(c)] = v.latents[t * 5 + c];
        const Eigen::VectorXd y = Q * x;
        for (std::size_t c = 0; c < 5; ++c) v.latents[t * 5 + c] = float(y[Eigen::Index(c)]);
      }
    EXPECT_DOUBLE_EQ(retrieval_map(ptrs(videos), ptrs(videos), 10), retrieval_map(ptrs(rotated), ptrs(rotated), 10));
  }
}

// ---- progression -------------------------------------------------------------

TEST(Progression, TargetsNormalizedOffsets) {
  EmbeddedVideo v;
  v.T = 10;
  v.key_event_frames = {0, 4, 9};
  const auto y = progression_targets(v);
  ASSERT_EQ(y.size(), 10u);
  EXPECT_DOUBLE_EQ(y[2][1], -0.2);
  EXPECT_DOUBLE_EQ(y[9][0], 0.9);
  EXPECT_DOUBLE_EQ(y[0][2], -0.9);
  for (const auto& row : y)
    for (double x : row) EXPECT_TRUE(x > -1 && x < 1);
}

TEST(Progression, PerfectAndConstantPredictors) {
  const std::vector<std::vector<double>> truth{{1, 5}, {2, 5}, {3, 5}, {6, 5}};
  const std::vector<std::vector<double>> mean(4, std::vector<double>{3, 5});
  const auto perfect = r2_scores(truth, truth);
  EXPECT_EQ(*perfect[0], 1.0);
  EXPECT_FALSE(perfect[1].has_value());
  EXPECT_EQ(*r2_scores(truth, mean)[0], 0.0);
}

TEST(Progression, ZeroVarianceEventsExcludedOrRejected) {
  Rng rng(7);
  auto tr = random_video("tr", View::ego, 12, 3, 2, false, rng);
  auto te = random_video("te", View::exo, 1 + 1, 3, 2, false, rng);
  // One test frame per fitted row is not enough for variance.
  te.T = 1;
  te.latents.resize(3);
  te.phase_labels.resize(1);
  EXPECT_THROW(phase_progression_r2(VideoList{&tr}, VideoList{&te}), TaskError);
  auto none = tr;
  none.key_event_frames.clear();
  EXPECT_THROW(phase_progression_r2(VideoList{&none}, VideoList{&tr}), TaskError);
}

TEST(Progression, RidgeRecoversLinearMap) {
  Rng rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back({n(rng), n(rng), n(rng)});
    y.push_back({2 * x.back()[0] - x.back()[2] + 0.5});
  }
  const auto m = fit_ridge(x, y, 0.0);
  EXPECT_NEAR(m.weights[0], 2.0, 1e-9);
  EXPECT_NEAR(m.weights[1], 0.0, 1e-9);
  EXPECT_NEAR(m.weights[2], -1.0, 1e-9);
  EXPECT_NEAR(m.weights[3], 0.5, 1e-9);
  EXPECT_THROW(fit_ridge(x, y, -1.0), ValidationError);
}

// ---- classification ----------------------------------------------------------

TEST(Classification, SeparableIsPerfect) {
  Rng rng(9);
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 2);
  const auto train = gaussian_frames(labels, 4, 20.0, rng), test = gaussian_frames(labels, 4, 20.0, rng);
  EXPECT_EQ(classify_f1(train, test), 100.0);
}

TEST(Classification, ShuffledLabelsAtChance) {
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) labels.push_back(i % 4);
    auto train = gaussian_frames(labels, 8, 0.0, rng), test = gaussian_frames(labels, 8, 0.0, rng);
    std::shuffle(train.y.begin(), train.y.end(), rng);
    sum += classify_f1(train, test);
  }
  EXPECT_NEAR(sum / 5, 25.0, 5.0);
}

TEST(Classification, MacroF1Definition) {
  // Class 0: tp 1, fp 1, fn 1 -> 0.5. Class 1: tp 1, fp 1, fn 1 -> 0.5.
  // Class 2 never predicted and appears once -> 0.
  EXPECT_NEAR(macro_f1(std::vector<int>{0, 0, 1, 1, 2}, std::vector<int>{0, 1, 1, 0, 0}), 100.0 * (0.5 + 0.4) / 3, 1e-12);
  EXPECT_EQ(macro_f1(std::vector<int>{2, 3}, std::vector<int>{2, 3}), 100.0);
  EXPECT_THROW(macro_f1(std::vector<int>{1}, std::vector<int>{}), num::DimensionError);
}

TEST(Classification, ClassAbsentFromTrainScoresZero) {
  Rng rng(10);
  const auto train = gaussian_frames({0, 1, 0, 1, 0, 1, 0, 1}, 3, 20.0, rng);
  auto test = gaussian_frames({0, 1, 2, 2}, 3, 20.0, rng);
  // Class 2 is never predicted, so it contributes 0 to the macro average.
  const double f1 = classify_f1(train, test);
  EXPECT_LE(f1, 100.0 * 2.0 / 3.0 + 1e-9);
  EXPECT_GT(f1, 0.0);
}

TEST(Classification, SingleClassRejected) {
  Rng rng(11);
  const auto train = gaussian_frames({1, 1, 1}, 2, 0.0, rng);
  EXPECT_THROW(LinearSvm::fit(train), TaskError);
}

TEST(Classification, InvariantUnderRelabeling) {
  Rng rng(12);
  std::vector<int> labels;
  for (int i = 0; i < 120; ++i) labels.push_back(i % 3);
  auto train = gaussian_frames(labels, 4, 1.5, rng), test = gaussian_frames(labels, 4, 1.5, rng);
  const double base = classify_f1(train, test);
  const int perm[] = {7, 2, 5};
  for (auto* f : {&train, &test})
    for (int& y : f->y) y = perm[y];
  EXPECT_EQ(classify_f1(train, test), base);
}

TEST(Classification, FewShotSubsamplesPerClass) {
  Rng rng(13);
  std::vector<int> labels;
  for (int i = 0; i < 95; ++i) labels.push_back(i < 80 ? 0 : 1);
  const auto train = gaussian_frames(labels, 2, 0.0, rng);
  const auto a = few_shot_subsample(train, 10, 1), b = few_shot_subsample(train, 10, 1), c = few_shot_subsample(train, 10, 2);
  EXPECT_EQ(std::count(a.y.begin(), a.y.end(), 0), 8);
  EXPECT_EQ(std::count(a.y.begin(), a.y.end(), 1), 2);
  EXPECT_EQ(a.x, b.x);
  EXPECT_NE(a.x, c.x);
  EXPECT_EQ(few_shot_subsample(train, 0.5, 1).size(), 2u);
  EXPECT_EQ(few_shot_subsample(train, 100, 1).x, train.x);
  EXPECT_THROW(few_shot_subsample(train, 0, 1), ValidationError);
}

// ---- reports -----------------------------------------------------------------

TEST(Report, SchemaAndRanges) {
  const auto split = toy_split(1);
  const MetricsReport r = evaluate(split, EvalConfig{});
  ASSERT_EQ(r.f1.size(), 3u);
  ASSERT_EQ(r.map_at.size(), 3u);
  for (auto& [s, v] : r.f1) EXPECT_TRUE(v >= 0 && v <= 100);
  for (auto& [k, cells] : r.map_at) {
    ASSERT_EQ(cells.size(), 3u);
    for (auto& [s, v] : cells) EXPECT_TRUE(v >= 0 && v <= 100);
  }
  EXPECT_LE(r.r2_progression, 1.0);
  EXPECT_TRUE(r.kendall_tau >= -1 && r.kendall_tau <= 1);
  // Phase-coded latents make the toy task easy.
  EXPECT_GT(r.f1.at(Setting::ego2exo), 90.0);
  const auto j = r.to_json();
  for (const char* key : {"f1", "map_at", "r2_progression", "kendall_tau", "config", "per_class"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["per_class"].size(), 2u);
  EXPECT_EQ(j["map_at"]["10"].size(), 3u);
  EXPECT_EQ(j["config"]["similarity"], "cosine");
}

TEST(Report, AveragesActionClasses) {
  const auto split = toy_split(2);
  const MetricsReport r = evaluate(split, EvalConfig{});
  const auto& pc = r.per_class;
  EXPECT_NEAR(r.kendall_tau, (pc["a"]["kendall_tau"].get<double>() + pc["b"]["kendall_tau"].get<double>()) / 2, 1e-12);
  EXPECT_NEAR(r.f1.at(Setting::regular),
              (pc["a"]["f1"]["regular"].get<double>() + pc["b"]["f1"]["regular"].get<double>()) / 2, 1e-12);
}

TEST(Report, DeterministicAndThreadIndependent) {
  const auto split = toy_split(3);
  EvalConfig c;
  const auto a = evaluate(split, c).to_json();
  c.threads = 2;
  EXPECT_EQ(evaluate(split, c).to_json(), a);
  EXPECT_EQ(evaluate(split, EvalConfig{}).to_json(), a);
}

TEST(Report, JsonRoundTripAndCsv) {
  const auto r = evaluate(toy_split(4), EvalConfig{});
  EXPECT_EQ(MetricsReport::from_json(r.to_json()).to_json(), r.to_json());
  const std::string csv = r.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 + 9 + 2);
  EXPECT_EQ(csv.rfind("metric,setting,value\n", 0), 0u);
  EXPECT_NE(csv.find("map@15,exo2ego,"), std::string::npos);
}

TEST(Report, FewShotModeRecorded) {
  EvalConfig c;
  c.few_shot_percent = 50;
  const auto r = evaluate(toy_split(5), c);
  EXPECT_EQ(r.config["few_shot_percent"], 50.0);
  EXPECT_EQ(evaluate(toy_split(5), c).to_json(), r.to_json());
  c.few_shot_percent = 0;
  EXPECT_THROW(evaluate(toy_split(5), c), ValidationError);
}

TEST(Report, MissingViewIsTaskError) {
  auto split = toy_split(6);
  std::erase_if(split.test, [](const EmbeddedVideo& v) { return v.view == View::exo; });
  EXPECT_THROW(evaluate(split, EvalConfig{}), TaskError);
}

// ---- embedding -----------------------------------------------------------------

TEST(Embed, ShapeDeterminismAndErrors) {
  model::ArchConfig arch;
  arch.d_in = 4;
  arch.d_model = 8;
  arch.encoder_blocks = 1;
  arch.decoder_blocks = 1;
  arch.heads = 2;
  arch.max_len = 16;
  Rng rng(14);
  const auto params = model::ModelParams<float>::init(arch, rng);
  VideoRecord rec;
  rec.video_id = "v";
  rec.view = View::exo;
  rec.action_class = "c";
  rec.num_frames = 5;
  TokenEmbeddingSequence tokens{"v", 5, 3, 4, std::vector<float>(5 * 3 * 4)};
  std::normal_distribution<float> n(0.f, 1.f);
  for (auto& x : tokens.data) x = n(rng);
  const auto a = embed_video(params, rec, tokens, EmbedSettings{});
  EXPECT_EQ(a.T, 5u);
  EXPECT_EQ(a.dim, 8u);
  EXPECT_EQ(a.latents.size(), 40u);
  EXPECT_EQ(embed_video(params, rec, tokens, EmbedSettings{}).latents, a.latents);

  const auto raw = raw_video(rec, tokens, EmbedSettings{});
  EXPECT_EQ(raw.dim, 4u);
  EXPECT_EQ(raw.latents, stm::merge_selected(tokens, 0.3).frames.data);

  TokenEmbeddingSequence one{"v", 1, 3, 4, std::vector<float>(12, 1.f)};
  EXPECT_THROW(embed_video(params, rec, one, EmbedSettings{}), std::invalid_argument);
  TokenEmbeddingSequence wide{"v", 5, 3, 6, std::vector<float>(90, 1.f)};
  EXPECT_THROW(embed_video(params, rec, wide, EmbedSettings{}), num::DimensionError);
}
