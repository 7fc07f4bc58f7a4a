#pragma once

// Pair sampling over unpaired ego/exo videos, the optimization loop and
// checkpoint/resume.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byov/checkpoint.hpp"
#include "byov/data.hpp"
#include "byov/model.hpp"
#include "byov/numerics/adam.hpp"
#include "byov/objectives.hpp"

namespace byov::trainer {

struct Ratios {
  double stm = 0.3;
  double msm = 0.4;
  double mcm = 0.8;
};

struct TrainFlags {
  bool enable_msm = true;
  bool enable_mcm = true;
  bool enable_causal = true;
  bool enable_stm = true;
  bool masked_only_loss = false;
};

enum class PairSampling { class_first, video_first };

std::string to_string(PairSampling p);
PairSampling parse_pair_sampling(const std::string& s);
std::string to_string(SampleMode m);
SampleMode parse_sample_mode(const std::string& s);

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  std::size_t batch_pairs = 1;
  std::size_t frames_per_clip = 32;
  Ratios ratios;
  num::AdamConfig optimizer;
  model::ArchConfig arch;  // d_in is taken from the dataset
  TrainFlags flags;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  SampleMode sampling = SampleMode::train_random;
  PairSampling pair_sampling = PairSampling::class_first;
  bool record_timing = true;  // false writes ms = 0 so logs compare bytewise

  std::filesystem::path manifest;
  std::filesystem::path out_dir;  // empty: keep everything in memory

  void validate() const;
  objectives::ObjectiveConfig objective() const;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  objectives::LossBreakdown losses;
  double ms = 0;
};

std::string to_jsonl(const StepRecord& r);
StepRecord parse_jsonl(const std::string& line);

// Train-split embeddings, loaded once.
class TrainingData {
 public:
  explicit TrainingData(const Dataset& dataset);
  TrainingData(const TrainingData&) = delete;
  TrainingData& operator=(const TrainingData&) = delete;

  const Dataset& dataset() const { return dataset_; }
  const std::vector<const VideoRecord*>& videos(View view, const std::string& action_class) const;
  const std::vector<const VideoRecord*>& videos(View view) const { return by_view_[static_cast<int>(view)]; }
  // Classes with at least one train video in both views, sorted.
  const std::vector<std::string>& paired_classes() const { return classes_; }
  const TokenEmbeddingSequence& tokens(const VideoRecord& record) const;

 private:
  Dataset dataset_;
  std::vector<const VideoRecord*> by_view_[2];
  std::map<std::string, std::vector<const VideoRecord*>> by_class_[2];
  std::vector<std::string> classes_;
  std::map<std::string, TokenEmbeddingSequence> tokens_;
};

struct TrainingPair {
  const VideoRecord* ego = nullptr;
  const VideoRecord* exo = nullptr;
};

// Class-first: a uniform class among those with both views, then one video
// per view independently. Video-first: a uniform ego video, then a uniform
// exo video of its class.
TrainingPair sample_training_pair(const TrainingData& data, Rng& rng,
                                  PairSampling mode = PairSampling::class_first);

// Frame sampling and token merging for one clip.
stm::FrameEmbeddingSequence prepare_clip(const TokenEmbeddingSequence& tokens, const TrainConfig& config, Rng& rng);

// Losses are summed over the pairs; gradients accumulate before one
// optimizer step. Returns the losses measured before the update.
objectives::LossBreakdown train_step(model::ModelParams<float>& params, num::AdamState<float>& opt,
                                     std::span<const TrainingPair> pairs, const TrainingData& data,
                                     const TrainConfig& config, Rng& rng);

struct TrainState {
  model::ModelParams<float> params;
  num::AdamState<float> opt;
  Rng rng;
  std::size_t step = 0;
};

// Fresh state: parameters from the init stream, sampling RNG from the
// training stream.
TrainState initial_state(const TrainConfig& config, std::size_t d_in);
model::Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config);
TrainState state_from_checkpoint(const model::Checkpoint& ckpt);

struct TrainResult {
  TrainState state;
  std::vector<StepRecord> log;  // steps run by this call
  std::filesystem::path final_checkpoint;  // empty when out_dir is empty
};

struct TrainOptions {
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const StepRecord&)> on_step;
};

// Runs config.steps steps in total (a resumed run continues to that count).
TrainResult train(const TrainConfig& config, const TrainingData& data, const TrainOptions& options = {});
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::size_t step);
std::filesystem::path final_checkpoint_path(const std::filesystem::path& out_dir);
std::filesystem::path trainlog_path(const std::filesystem::path& out_dir);

}  // namespace byov::trainer
