#pragma once

// Dataset manifests, the "BYV1" token-embedding container, frame
// subsampling and the synthetic unpaired ego/exo generator.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace byov {

using Rng = std::mt19937_64;

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class View { ego, exo };

std::string to_string(View view);
View parse_view(const std::string& s);
View other_view(View view);

enum class Split { train, val, test };

std::string to_string(Split split);
Split parse_split(const std::string& s);

struct VideoRecord {
  std::string video_id;
  View view = View::ego;
  std::string action_class;
  std::size_t num_frames = 0;
  std::string embedding_path;  // relative to the manifest directory unless absolute
  Split split = Split::train;
  std::optional<std::vector<int>> phase_labels;
  std::optional<std::vector<std::size_t>> key_event_frames;
};

struct DatasetMeta {
  std::size_t N = 0;
  std::size_t d = 0;
  std::size_t num_phases = 0;
  std::filesystem::path base_dir;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<VideoRecord> records;

  std::filesystem::path embedding_file(const VideoRecord& record) const;
  std::vector<const VideoRecord*> select(std::optional<Split> split, std::optional<View> view = {}) const;
};

// Checks one record against the manifest-level invariants; throws
// ValidationError naming the record.
void validate_record(const VideoRecord& record, const DatasetMeta& meta);

Dataset load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Dataset& dataset);

struct TokenEmbeddingSequence {
  std::string video_id;
  std::size_t T = 0;
  std::size_t N = 0;
  std::size_t d = 0;
  std::vector<float> data;  // (t, n, channel) row-major

  float at(std::size_t t, std::size_t n, std::size_t c) const { return data[(t * N + n) * d + c]; }
  // Rows restricted to the given frames, in the given order.
  TokenEmbeddingSequence frames(const std::vector<std::size_t>& indices) const;
};

void write_token_embeddings(const std::filesystem::path& path, const TokenEmbeddingSequence& seq);
TokenEmbeddingSequence read_token_embeddings(const std::filesystem::path& path);
// Reads a record's file and checks its header against the manifest.
TokenEmbeddingSequence load_token_embeddings(const Dataset& dataset, const VideoRecord& record);

enum class SampleMode { train_random, train_uniform, eval_all };

// train_random: one uniform draw per near-equal contiguous segment.
// train_uniform: sorted draw without replacement (stratified when too short).
// eval_all: every frame.
std::vector<std::size_t> sample_frames(std::size_t total, std::size_t target, Rng& rng, SampleMode mode);

struct SynthConfig {
  std::size_t num_videos_per_view = 40;
  std::size_t frames_min = 24;
  std::size_t frames_max = 40;
  std::size_t num_phases = 3;
  std::size_t num_classes = 2;
  std::size_t d_latent_true = 4;
  std::size_t N = 16;
  std::size_t d = 32;
  double view_noise_sigma = 0.05;
  double drift_sigma = 0.01;
  double clutter_sigma = 1.0;
  double view_offset_sigma = 0.3;  // scale of the per-view offset b_view
  double train_fraction = 0.6;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Class trajectories and per-view affine maps shared by every video.
class SyntheticWorld {
 public:
  SyntheticWorld(const SynthConfig& config);

  // a_c(p) for progress p in [0, 1].
  std::vector<double> trajectory(std::size_t action_class, double progress) const;
  // W_view a + b_view.
  std::vector<double> view_map(View view, const std::vector<double>& latent) const;
  const SynthConfig& config() const { return config_; }

 private:
  struct Harmonic {
    double amplitude;
    double phase;
  };
  SynthConfig config_;
  // [class][dim] -> slope and harmonics
  std::vector<std::vector<double>> slopes_;
  std::vector<std::vector<std::vector<Harmonic>>> harmonics_;
  std::vector<std::vector<double>> weights_[2];  // [view][channel][latent]
  std::vector<double> offsets_[2];
};

struct SyntheticVideo {
  TokenEmbeddingSequence tokens;
  std::vector<int> phase_labels;
  std::vector<std::size_t> key_event_frames;
  std::vector<double> progress;             // p(t)
  std::vector<std::size_t> action_tokens;   // sorted token indices carrying a(p)
};

// Splits T frames into num_phases contiguous runs of at least two frames.
std::vector<std::size_t> random_phase_durations(std::size_t T, std::size_t num_phases, Rng& rng);

SyntheticVideo synthesize_video(const SyntheticWorld& world, std::size_t action_class, View view,
                                const std::vector<std::size_t>& phase_durations, Rng& rng);

// Writes manifest.json plus one embedding file per video into out_dir.
Dataset generate_synthetic(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace byov
