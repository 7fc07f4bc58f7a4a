#include "byov/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "byov/config.hpp"
#include "byov/stm.hpp"

namespace byov::trainer {

using nlohmann::json;

std::string to_string(PairSampling p) { return p == PairSampling::class_first ? "class_first" : "video_first"; }

PairSampling parse_pair_sampling(const std::string& s) {
  if (s == "class_first") return PairSampling::class_first;
  if (s == "video_first") return PairSampling::video_first;
  throw ValidationError("unknown pair sampling mode '" + s + "'");
}

std::string to_string(SampleMode m) {
  switch (m) {
    case SampleMode::train_random: return "train_random";
    case SampleMode::train_uniform: return "train_uniform";
    case SampleMode::eval_all: return "eval_all";
  }
  return "?";
}

SampleMode parse_sample_mode(const std::string& s) {
  if (s == "train_random") return SampleMode::train_random;
  if (s == "train_uniform") return SampleMode::train_uniform;
  if (s == "eval_all") return SampleMode::eval_all;
  throw ValidationError("unknown frame sampling mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (steps == 0) throw ValidationError("train.steps must be positive");
  if (batch_pairs == 0) throw ValidationError("train.batch_pairs must be positive");
  if (frames_per_clip < 2) throw ValidationError("train.frames_per_clip must be at least 2");
  if (!(ratios.stm > 0.0 && ratios.stm <= 1.0)) throw ValidationError("ratios.stm must lie in (0, 1]");
  if (!(ratios.msm >= 0.0 && ratios.msm <= 1.0)) throw ValidationError("ratios.msm must lie in [0, 1]");
  if (!(ratios.mcm >= 0.0 && ratios.mcm <= 1.0)) throw ValidationError("ratios.mcm must lie in [0, 1]");
  if (!flags.enable_msm && !flags.enable_mcm) throw ValidationError("at least one of enable_msm / enable_mcm must be set");
  if (!(optimizer.lr > 0.0)) throw ValidationError("optimizer.lr must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ValidationError("optimizer betas must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ValidationError("optimizer.eps must be positive");
  if (frames_per_clip > arch.max_len) throw ValidationError("frames_per_clip exceeds arch.max_len");
  try {
    model::ArchConfig a = arch;
    a.d_in = std::max<std::size_t>(a.d_in, 1);
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

objectives::ObjectiveConfig TrainConfig::objective() const {
  objectives::ObjectiveConfig o;
  o.msm_ratio = ratios.msm;
  o.mcm_ratio = ratios.mcm;
  o.enable_msm = flags.enable_msm;
  o.enable_mcm = flags.enable_mcm;
  o.enable_causal = flags.enable_causal;
  o.masked_only_loss = flags.masked_only_loss;
  return o;
}

std::string to_jsonl(const StepRecord& r) {
  json j = {{"step", r.step},
            {"l_msm_ego", r.losses.l_msm_ego},
            {"l_msm_exo", r.losses.l_msm_exo},
            {"l_mcm_ego", r.losses.l_mcm_ego},
            {"l_mcm_exo", r.losses.l_mcm_exo},
            {"l_total", r.losses.l_total},
            {"ms", r.ms}};
  return j.dump();
}

StepRecord parse_jsonl(const std::string& line) {
  const json j = json::parse(line);
  StepRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.losses.l_msm_ego = j.at("l_msm_ego").get<double>();
  r.losses.l_msm_exo = j.at("l_msm_exo").get<double>();
  r.losses.l_mcm_ego = j.at("l_mcm_ego").get<double>();
  r.losses.l_mcm_exo = j.at("l_mcm_exo").get<double>();
  r.losses.l_total = j.at("l_total").get<double>();
  r.ms = j.at("ms").get<double>();
  return r;
}

TrainingData::TrainingData(const Dataset& dataset) : dataset_(dataset) {
  for (const VideoRecord* r : dataset_.select(Split::train)) {
    const int v = static_cast<int>(r->view);
    by_view_[v].push_back(r);
    by_class_[v][r->action_class].push_back(r);
    tokens_.emplace(r->video_id, load_token_embeddings(dataset_, *r));
  }
  for (const auto& [cls, vids] : by_class_[0]) {
    if (by_class_[1].contains(cls)) classes_.push_back(cls);
  }
}

const std::vector<const VideoRecord*>& TrainingData::videos(View view, const std::string& action_class) const {
  static const std::vector<const VideoRecord*> none;
  const auto& m = by_class_[static_cast<int>(view)];
  auto it = m.find(action_class);
  return it == m.end() ? none : it->second;
}

const TokenEmbeddingSequence& TrainingData::tokens(const VideoRecord& record) const {
  auto it = tokens_.find(record.video_id);
  if (it == tokens_.end()) throw DatasetError("video '" + record.video_id + "' is not in the training split");
  return it->second;
}

namespace {

template <class T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

}  // namespace

TrainingPair sample_training_pair(const TrainingData& data, Rng& rng, PairSampling mode) {
  const auto& classes = data.paired_classes();
  if (classes.empty()) throw DatasetError("no action class has training videos in both views");
  if (mode == PairSampling::class_first) {
    const std::string& cls = pick(classes, rng);
    const VideoRecord* ego = pick(data.videos(View::ego, cls), rng);
    const VideoRecord* exo = pick(data.videos(View::exo, cls), rng);
    return {ego, exo};
  }
  std::vector<const VideoRecord*> candidates;
  for (const VideoRecord* r : data.videos(View::ego)) {
    if (std::binary_search(classes.begin(), classes.end(), r->action_class)) candidates.push_back(r);
  }
  const VideoRecord* ego = pick(candidates, rng);
  const VideoRecord* exo = pick(data.videos(View::exo, ego->action_class), rng);
  return {ego, exo};
}

stm::FrameEmbeddingSequence prepare_clip(const TokenEmbeddingSequence& tokens, const TrainConfig& config, Rng& rng) {
  const auto idx = sample_frames(tokens.T, config.frames_per_clip, rng, config.sampling);
  const TokenEmbeddingSequence clip = tokens.frames(idx);
  if (config.flags.enable_stm) return stm::merge_selected(clip, config.ratios.stm).frames;
  return stm::mean_pool(clip);
}

objectives::LossBreakdown train_step(model::ModelParams<float>& params, num::AdamState<float>& opt,
                                     std::span<const TrainingPair> pairs, const TrainingData& data,
                                     const TrainConfig& config, Rng& rng) {
  if (pairs.empty()) throw num::ContractError("train_step: no training pairs");
  const auto objective = config.objective();
  objectives::LossBreakdown total;
  for (const auto& pair : pairs) {
    const auto ego = prepare_clip(data.tokens(*pair.ego), config, rng);
    const auto exo = prepare_clip(data.tokens(*pair.exo), config, rng);
    const auto l = objectives::joint_step_losses(params, ego, exo, rng, objective);
    total.l_msm_ego += l.l_msm_ego;
    total.l_msm_exo += l.l_msm_exo;
    total.l_mcm_ego += l.l_mcm_ego;
    total.l_mcm_exo += l.l_mcm_exo;
    total.l_total += l.l_total;
  }
  auto tensors = params.tensors();
  // Parameters outside every enabled loss get an explicit zero gradient.
  for (auto& t : tensors) t.mutable_grad();
  num::adam_step(tensors, opt);
  return total;
}

TrainState initial_state(const TrainConfig& config, std::size_t d_in) {
  model::ArchConfig arch = config.arch;
  arch.d_in = d_in;
  std::seed_seq init_seq{config.seed, std::uint64_t{0x1417}};
  Rng init_rng(init_seq);
  std::seed_seq train_seq{config.seed, std::uint64_t{0x7EA1}};
  TrainState s{model::ModelParams<float>::init(arch, init_rng), {}, Rng(train_seq), 0};
  s.opt = num::AdamState<float>::init(s.params.tensors(), config.optimizer);
  return s;
}

model::Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config) {
  model::Checkpoint ck;
  ck.arch = state.params.arch;
  ck.step = state.step;
  std::ostringstream rng;
  rng << state.rng;
  ck.rng_state = rng.str();
  ck.config = config::to_json(config);
  ck.params = state.params;
  ck.optimizer = state.opt;
  return ck;
}

TrainState state_from_checkpoint(const model::Checkpoint& ck) {
  if (!ck.optimizer) throw ValidationError("checkpoint has no optimizer state; cannot resume");
  if (ck.rng_state.empty()) throw ValidationError("checkpoint has no RNG state; cannot resume");
  TrainState s{ck.params, *ck.optimizer, Rng(), static_cast<std::size_t>(ck.step)};
  std::istringstream rng(ck.rng_state);
  rng >> s.rng;
  if (!rng) throw FormatError("checkpoint RNG state is malformed");
  return s;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::size_t step) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%07zu.byvc", step);
  return out_dir / "checkpoints" / name;
}

std::filesystem::path final_checkpoint_path(const std::filesystem::path& out_dir) { return out_dir / "final.byvc"; }

std::filesystem::path trainlog_path(const std::filesystem::path& out_dir) { return out_dir / "trainlog.jsonl"; }

namespace {

// Keeps the first `keep` records of an existing log so a resumed run
// continues contiguously.
void truncate_log(const std::filesystem::path& path, std::size_t keep) {
  std::vector<std::string> lines;
  if (std::ifstream in(path); in) {
    std::string line;
    while (lines.size() < keep && std::getline(in, line)) {
      if (!line.empty()) lines.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write training log " + path.string());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (parse_jsonl(lines[i]).step != i + 1) break;
    out << lines[i] << '\n';
  }
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainingData& data, const TrainOptions& options) {
  config.validate();
  const std::size_t d_in = data.dataset().meta.d;
  TrainResult result;
  if (options.resume_from) {
    result.state = state_from_checkpoint(model::load_checkpoint(*options.resume_from));
    if (result.state.params.arch.d_in != d_in) throw ValidationError("checkpoint width does not match the dataset");
    if (result.state.step > config.steps) throw ValidationError("checkpoint is past the configured step count");
    spdlog::info("resuming from {} at step {}", options.resume_from->string(), result.state.step);
  } else {
    result.state = initial_state(config, d_in);
  }
  TrainState& st = result.state;

  const bool persist = !config.out_dir.empty();
  std::ofstream log;
  if (persist) {
    std::filesystem::create_directories(config.out_dir);
    if (config.checkpoint_every) std::filesystem::create_directories(config.out_dir / "checkpoints");
    truncate_log(trainlog_path(config.out_dir), st.step);
    log.open(trainlog_path(config.out_dir), std::ios::app);
    if (!log) throw IoError("cannot append to training log in " + config.out_dir.string());
  }
  auto save = [&](const std::filesystem::path& path) {
    try {
      model::save_checkpoint(path, make_checkpoint(st, config));
    } catch (const IoError& e) {
      throw IoError(std::string(e.what()) + " (at step " + std::to_string(st.step) + ")");
    }
  };

  std::vector<TrainingPair> pairs(config.batch_pairs);
  while (st.step < config.steps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (auto& p : pairs) p = sample_training_pair(data, st.rng, config.pair_sampling);
    StepRecord rec;
    try {
      rec.losses = train_step(st.params, st.opt, pairs, data, config, st.rng);
    } catch (const num::NumericError& e) {
      throw num::NumericError(std::string(e.what()) + " at step " + std::to_string(st.step + 1));
    }
    ++st.step;
    rec.step = st.step;
    if (config.record_timing) {
      rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    result.log.push_back(rec);
    if (persist) {
      log << to_jsonl(rec) << '\n';
      if (!log) throw IoError("failed writing training log at step " + std::to_string(st.step));
      if (config.checkpoint_every && st.step % config.checkpoint_every == 0) save(checkpoint_path(config.out_dir, st.step));
    }
    if (options.on_step) options.on_step(rec);
    if (st.step % 100 == 0 || st.step == config.steps) {
      spdlog::info("step {}/{} l_total {:.5f}", st.step, config.steps, rec.losses.l_total);
    } else {
      spdlog::debug("step {} l_total {:.6f} ({:.1f} ms)", st.step, rec.losses.l_total, rec.ms);
    }
  }
  if (persist) {
    log.flush();
    result.final_checkpoint = final_checkpoint_path(config.out_dir);
    save(result.final_checkpoint);
  }
  return result;
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (config.manifest.empty()) throw ValidationError("train: no dataset manifest configured");
  const TrainingData data(load_manifest(config.manifest));
  return train(config, data, options);
}

}  // namespace byov::trainer
