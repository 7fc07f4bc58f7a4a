#pragma once

// Frozen-encoder evaluation: per-frame latents for every video, then phase
// classification (macro F1), frame retrieval (mAP@K), phase progression (R²)
// and temporal alignment (Kendall's tau). Cross-view settings draw training
// or gallery data from one view and test or query data from the other.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "byov/data.hpp"
#include "byov/model.hpp"
#include "byov/stm.hpp"

namespace byov::eval {

class TaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmbeddedVideo {
  std::string video_id;
  View view = View::ego;
  std::string action_class;
  Split split = Split::train;
  std::size_t T = 0;
  std::size_t dim = 0;
  std::vector<float> latents;  // T x dim
  std::vector<int> phase_labels;
  std::vector<std::size_t> key_event_frames;

  std::span<const float> row(std::size_t t) const { return {latents.data() + t * dim, dim}; }
};

struct EmbedSettings {
  double stm_ratio = 0.3;
  bool enable_stm = true;
};

// Merged frame features as fed to the encoder (all frames, no masking).
stm::FrameEmbeddingSequence frame_features(const TokenEmbeddingSequence& tokens, const EmbedSettings& settings);

EmbeddedVideo embed_video(const model::ModelParams<float>& params, const VideoRecord& record,
                          const TokenEmbeddingSequence& tokens, const EmbedSettings& settings);
EmbeddedVideo embed_video(const model::ModelParams<float>& params, const Dataset& dataset, const VideoRecord& record,
                          const EmbedSettings& settings);

// The merged input features themselves, for the no-training baseline.
EmbeddedVideo raw_video(const VideoRecord& record, const TokenEmbeddingSequence& tokens, const EmbedSettings& settings);

enum class Similarity { cosine, euclidean };
std::string to_string(Similarity s);
Similarity parse_similarity(const std::string& s);

// Higher is more similar. euclidean returns the negated distance.
double similarity(std::span<const float> a, std::span<const float> b, Similarity kind = Similarity::cosine);

enum class Setting { regular, ego2exo, exo2ego };
std::string to_string(Setting s);
inline constexpr Setting kSettings[] = {Setting::regular, Setting::ego2exo, Setting::exo2ego};

// ---- classification -------------------------------------------------------

struct LabeledFrames {
  std::size_t dim = 0;
  std::vector<float> x;  // n x dim
  std::vector<int> y;
  std::size_t size() const { return y.size(); }
  void append(const EmbeddedVideo& v);
};

// One-vs-rest linear SVM (hinge loss, L2, unregularized-in-spirit bias via an
// augmented constant feature) trained by dual coordinate descent.
class LinearSvm {
 public:
  static LinearSvm fit(const LabeledFrames& train, double C = 1.0, std::uint64_t seed = 0);
  int predict(std::span<const float> x) const;
  const std::vector<int>& classes() const { return classes_; }

 private:
  std::vector<int> classes_;
  std::vector<std::vector<double>> w_;  // per class, dim + 1 (bias last)
};

// Macro F1 (percent) over the union of true and predicted labels.
double macro_f1(std::span<const int> truth, std::span<const int> predicted);

// Keeps ceil(percent% of each label's frames), at least one, chosen by seed.
LabeledFrames few_shot_subsample(const LabeledFrames& train, double percent, std::uint64_t seed);

double classify_f1(const LabeledFrames& train, const LabeledFrames& test, double C = 1.0);

// ---- retrieval ------------------------------------------------------------

// Mean over query frames of AP@K (percent). Each query frame ranks all
// gallery frames outside its own video; relevance is an equal phase label.
double retrieval_map(std::span<const EmbeddedVideo* const> queries, std::span<const EmbeddedVideo* const> gallery,
                     std::size_t K, Similarity kind = Similarity::cosine);

// ---- progression ----------------------------------------------------------

// Per-frame targets (t - key_event) / T, one column per key event.
std::vector<std::vector<double>> progression_targets(const EmbeddedVideo& v);

struct RidgeModel {
  std::size_t dim = 0, outputs = 0;
  std::vector<double> weights;  // (dim + 1) x outputs, intercept row last
  std::vector<double> predict(std::span<const float> x) const;
};

// Closed-form ridge with an unpenalized intercept.
RidgeModel fit_ridge(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y, double lambda);

// R² per output column; columns with zero target variance are nullopt.
std::vector<std::optional<double>> r2_scores(const std::vector<std::vector<double>>& truth,
                                             const std::vector<std::vector<double>>& predicted);

// Mean R² over key events with defined R² on the test videos.
double phase_progression_r2(std::span<const EmbeddedVideo* const> train, std::span<const EmbeddedVideo* const> test,
                            double lambda = 1e-4);

// ---- alignment ------------------------------------------------------------

// Index of the most similar row of b (lowest index on ties).
std::size_t nearest_frame(std::span<const float> query, const EmbeddedVideo& b, Similarity kind = Similarity::cosine);
double kendall_tau(const EmbeddedVideo& a, const EmbeddedVideo& b, Similarity kind = Similarity::cosine);
// Mean over ordered (ego, exo) and (exo, ego) pairs.
double dataset_tau(std::span<const EmbeddedVideo* const> videos, Similarity kind = Similarity::cosine);

// ---- reports --------------------------------------------------------------

struct EvalConfig {
  std::vector<std::size_t> k_values{5, 10, 15};
  Similarity similarity = Similarity::cosine;
  double svm_c = 1.0;
  double ridge_lambda = 1e-4;
  std::optional<double> few_shot_percent;
  std::uint64_t few_shot_seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct MetricsReport {
  std::map<Setting, double> f1;
  std::map<std::size_t, std::map<Setting, double>> map_at;
  double r2_progression = 0;
  double kendall_tau = 0;
  nlohmann::json config = nlohmann::json::object();
  // Per action class breakdown of the same fields.
  nlohmann::json per_class = nlohmann::json::object();

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  // metric,setting,value rows, one per populated cell.
  std::string to_csv() const;
};

struct EmbeddedSplit {
  std::vector<EmbeddedVideo> train, test;
};

// Fitted metrics use train videos; everything is scored on test videos.
// Each action class is evaluated separately and the results averaged.
MetricsReport evaluate(const EmbeddedSplit& videos, const EvalConfig& config);

EmbeddedSplit embed_dataset(const model::ModelParams<float>& params, const Dataset& dataset,
                            const EmbedSettings& settings, std::size_t threads = 1);
EmbeddedSplit raw_dataset(const Dataset& dataset, const EmbedSettings& settings);

MetricsReport eval_all(const model::ModelParams<float>& params, const Dataset& dataset, const EmbedSettings& settings,
                       const EvalConfig& config);

}  // namespace byov::eval
