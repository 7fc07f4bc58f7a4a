#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "byov/data.hpp"

namespace byov {

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("synth config: " + msg); };
  if (num_videos_per_view == 0) fail("num_videos_per_view must be positive");
  if (num_phases < 2) fail("num_phases must be at least 2");
  if (num_classes == 0) fail("num_classes must be positive");
  if (d_latent_true == 0 || N == 0 || d == 0) fail("d_latent_true, N and d must be positive");
  if (frames_min > frames_max) fail("frames_range must satisfy min <= max");
  if (frames_min < 2 * num_phases) fail("frames_range minimum must allow two frames per phase");
  if (view_noise_sigma < 0 || drift_sigma < 0 || clutter_sigma < 0 || view_offset_sigma < 0) fail("sigmas must be non-negative");
  if (train_fraction <= 0 || val_fraction < 0 || train_fraction + val_fraction >= 1) {
    fail("split fractions must leave a non-empty test share");
  }
}

SyntheticWorld::SyntheticWorld(const SynthConfig& config) : config_(config) {
  config_.validate();
  std::seed_seq seq{config.seed, std::uint64_t{0x5EED}, std::uint64_t{1}};
  Rng rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t k = config.d_latent_true;
  slopes_.assign(config.num_classes, std::vector<double>(k));
  harmonics_.assign(config.num_classes, std::vector<std::vector<Harmonic>>(k));
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      slopes_[c][j] = normal(rng);
      for (int m = 0; m < 2; ++m) {
        harmonics_[c][j].push_back({0.5 * normal(rng), std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(rng)});
      }
    }
  }
  const double w_scale = 1.0 / std::sqrt(double(k));
  for (int v = 0; v < 2; ++v) {
    weights_[v].assign(config.d, std::vector<double>(k));
    offsets_[v].assign(config.d, 0.0);
    for (std::size_t ch = 0; ch < config.d; ++ch) {
      for (std::size_t j = 0; j < k; ++j) weights_[v][ch][j] = w_scale * normal(rng);
      offsets_[v][ch] = config.view_offset_sigma * normal(rng);
    }
  }
}

std::vector<double> SyntheticWorld::trajectory(std::size_t action_class, double progress) const {
  std::vector<double> a(config_.d_latent_true);
  for (std::size_t j = 0; j < a.size(); ++j) {
    double value = slopes_[action_class][j] * (2.0 * progress - 1.0);
    for (std::size_t m = 0; m < harmonics_[action_class][j].size(); ++m) {
      const auto& h = harmonics_[action_class][j][m];
      value += h.amplitude * std::sin(std::numbers::pi * double(m + 1) * progress + h.phase);
    }
    a[j] = value;
  }
  return a;
}

std::vector<double> SyntheticWorld::view_map(View view, const std::vector<double>& latent) const {
  const int v = view == View::ego ? 0 : 1;
  std::vector<double> out(config_.d);
  for (std::size_t ch = 0; ch < config_.d; ++ch) {
    double acc = offsets_[v][ch];
    for (std::size_t j = 0; j < latent.size(); ++j) acc += weights_[v][ch][j] * latent[j];
    out[ch] = acc;
  }
  return out;
}

std::vector<std::size_t> random_phase_durations(std::size_t T, std::size_t num_phases, Rng& rng) {
  if (T < 2 * num_phases) throw ValidationError("video too short for the requested phase count");
  std::gamma_distribution<double> gamma(2.0, 1.0);
  std::vector<double> weights(num_phases);
  for (auto& w : weights) w = gamma(rng);
  const double total_w = std::accumulate(weights.begin(), weights.end(), 0.0);
  const std::size_t spare = T - 2 * num_phases;
  std::vector<std::size_t> durations(num_phases, 2);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < num_phases; ++k) {
    const double share = double(spare) * weights[k] / total_w;
    const auto whole = static_cast<std::size_t>(std::floor(share));
    durations[k] += whole;
    assigned += whole;
    remainders.emplace_back(share - double(whole), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < spare; ++i, ++assigned) ++durations[remainders[i].second];
  return durations;
}

SyntheticVideo synthesize_video(const SyntheticWorld& world, std::size_t action_class, View view,
                                const std::vector<std::size_t>& phase_durations, Rng& rng) {
  const SynthConfig& cfg = world.config();
  const std::size_t P = phase_durations.size();
  const std::size_t T = std::accumulate(phase_durations.begin(), phase_durations.end(), std::size_t{0});
  SyntheticVideo video;
  video.progress.resize(T);
  video.phase_labels.resize(T);
  std::size_t start = 0;
  for (std::size_t k = 0; k < P; ++k) {
    if (k > 0) video.key_event_frames.push_back(start);
    const std::size_t len = phase_durations[k];
    for (std::size_t i = 0; i < len; ++i) {
      // Progress advances linearly through [k/P, (k+1)/P) within phase k.
      video.progress[start + i] = (double(k) + (double(i) + 0.5) / double(len)) / double(P);
      video.phase_labels[start + i] = static_cast<int>(k);
    }
    start += len;
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t N = cfg.N, d = cfg.d;
  const std::size_t num_action = (N + 3) / 4;
  std::vector<std::size_t> tokens(N);
  std::iota(tokens.begin(), tokens.end(), std::size_t{0});
  std::shuffle(tokens.begin(), tokens.end(), rng);
  video.action_tokens.assign(tokens.begin(), tokens.begin() + num_action);
  std::sort(video.action_tokens.begin(), video.action_tokens.end());
  std::vector<bool> is_action(N, false);
  for (std::size_t n : video.action_tokens) is_action[n] = true;

  std::vector<double> clutter(N * d);
  for (auto& c : clutter) c = cfg.clutter_sigma * normal(rng);

  std::vector<double> drift(d, 0.0);
  video.tokens.T = T;
  video.tokens.N = N;
  video.tokens.d = d;
  video.tokens.data.resize(T * N * d);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      for (auto& x : drift) x += cfg.drift_sigma * normal(rng);
    }
    const std::vector<double> action = world.view_map(view, world.trajectory(action_class, video.progress[t]));
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t ch = 0; ch < d; ++ch) {
        const double base = is_action[n] ? action[ch] : clutter[n * d + ch];
        const double value = base + drift[ch] + cfg.view_noise_sigma * normal(rng);
        video.tokens.data[(t * N + n) * d + ch] = static_cast<float>(value);
      }
    }
  }
  return video;
}

Dataset generate_synthetic(const SynthConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const SyntheticWorld world(config);
  std::filesystem::create_directories(out_dir / "embeddings");
  Dataset ds;
  ds.meta.N = config.N;
  ds.meta.d = config.d;
  ds.meta.num_phases = config.num_phases;
  ds.meta.base_dir = out_dir;

  for (View view : {View::ego, View::exo}) {
    const std::uint64_t view_tag = view == View::ego ? 0 : 1;
    // Per (view, class) counters drive a stratified split assignment.
    std::vector<std::size_t> class_count(config.num_classes, 0);
    std::vector<std::size_t> class_total(config.num_classes, 0);
    for (std::size_t i = 0; i < config.num_videos_per_view; ++i) ++class_total[i % config.num_classes];
    for (std::size_t i = 0; i < config.num_videos_per_view; ++i) {
      const std::size_t cls = i % config.num_classes;
      std::seed_seq seq{config.seed, std::uint64_t{0x51DE0}, view_tag, std::uint64_t(i)};
      Rng rng(seq);
      const std::size_t T = std::uniform_int_distribution<std::size_t>(config.frames_min, config.frames_max)(rng);
      const auto durations = random_phase_durations(T, config.num_phases, rng);
      SyntheticVideo video = synthesize_video(world, cls, view, durations, rng);

      VideoRecord r;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03zu", to_string(view).c_str(), i);
      r.video_id = id;
      r.view = view;
      r.action_class = "class_" + std::to_string(cls);
      r.num_frames = T;
      r.embedding_path = "embeddings/" + r.video_id + ".byv";
      const std::size_t rank = class_count[cls]++;
      const double frac = (double(rank) + 0.5) / double(class_total[cls]);
      r.split = frac < config.train_fraction                           ? Split::train
                : frac < config.train_fraction + config.val_fraction ? Split::val
                                                                      : Split::test;
      r.phase_labels = video.phase_labels;
      r.key_event_frames = video.key_event_frames;
      video.tokens.video_id = r.video_id;
      write_token_embeddings(out_dir / r.embedding_path, video.tokens);
      ds.records.push_back(std::move(r));
    }
  }
  write_manifest(out_dir / "manifest.json", ds);
  return ds;
}

}  // namespace byov
