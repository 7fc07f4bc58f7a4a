#include "byov/config.hpp"

#include <fstream>

namespace byov::config {

std::filesystem::path Paths::manifest_path() const {
  return manifest.empty() ? dataset_dir / "manifest.json" : manifest;
}

std::filesystem::path Paths::checkpoint_path() const {
  return checkpoint.empty() ? trainer::final_checkpoint_path(out_dir) : checkpoint;
}

void AblationConfig::validate() const {
  if (variants.empty() && ratio_sweeps.empty()) throw ValidationError("ablation: no variants requested");
  for (const auto& v : variants) {
    if (v != "full" && v != "-stm" && v != "-causal" && v != "-msm" && v != "-mcm") {
      throw ValidationError("ablation: unknown variant '" + v + "'");
    }
  }
  if (threads == 0) throw ValidationError("ablation.threads must be positive");
}

void RunConfig::finalize() {
  train.manifest = paths.manifest_path();
  train.out_dir = paths.out_dir;
  synth.validate();
  train.validate();
  eval.validate();
  ablation.validate();
}

json to_json(const SynthConfig& c) {
  return {{"num_videos_per_view", c.num_videos_per_view},
          {"frames_min", c.frames_min},
          {"frames_max", c.frames_max},
          {"num_phases", c.num_phases},
          {"num_classes", c.num_classes},
          {"d_latent_true", c.d_latent_true},
          {"N", c.N},
          {"d", c.d},
          {"view_noise_sigma", c.view_noise_sigma},
          {"drift_sigma", c.drift_sigma},
          {"clutter_sigma", c.clutter_sigma},
          {"view_offset_sigma", c.view_offset_sigma},
          {"train_fraction", c.train_fraction},
          {"val_fraction", c.val_fraction},
          {"seed", c.seed}};
}

json to_json(const trainer::TrainConfig& c) {
  return {{"seed", c.seed},
          {"steps", c.steps},
          {"batch_pairs", c.batch_pairs},
          {"frames_per_clip", c.frames_per_clip},
          {"ratios", {{"stm", c.ratios.stm}, {"msm", c.ratios.msm}, {"mcm", c.ratios.mcm}}},
          {"optimizer",
           {{"lr", c.optimizer.lr}, {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2}, {"eps", c.optimizer.eps}}},
          {"arch", model::arch_to_json(c.arch)},
          {"flags",
           {{"enable_msm", c.flags.enable_msm},
            {"enable_mcm", c.flags.enable_mcm},
            {"enable_causal", c.flags.enable_causal},
            {"enable_stm", c.flags.enable_stm},
            {"masked_only_loss", c.flags.masked_only_loss}}},
          {"checkpoint_every", c.checkpoint_every},
          {"sampling", trainer::to_string(c.sampling)},
          {"pair_sampling", trainer::to_string(c.pair_sampling)},
          {"record_timing", c.record_timing}};
}

json to_json(const eval::EvalConfig& c) {
  return {{"k_values", c.k_values},
          {"similarity", eval::to_string(c.similarity)},
          {"svm_c", c.svm_c},
          {"ridge_lambda", c.ridge_lambda},
          {"few_shot_percent", c.few_shot_percent ? json(*c.few_shot_percent) : json(nullptr)},
          {"few_shot_seed", c.few_shot_seed},
          {"threads", c.threads}};
}

json to_json(const Paths& c) {
  return {{"dataset_dir", c.dataset_dir.string()},
          {"manifest", c.manifest.string()},
          {"out_dir", c.out_dir.string()},
          {"checkpoint", c.checkpoint.string()}};
}

json to_json(const AblationConfig& c) {
  json sweeps = json::array();
  for (const auto& r : c.ratio_sweeps) sweeps.push_back({{"stm", r.stm}, {"msm", r.msm}, {"mcm", r.mcm}});
  return {{"variants", c.variants}, {"ratio_sweeps", sweeps}, {"seeds", c.seeds}, {"steps", c.steps}, {"threads", c.threads}};
}

json to_json(const RunConfig& c) {
  return {{"synth", to_json(c.synth)},
          {"train", to_json(c.train)},
          {"eval", to_json(c.eval)},
          {"paths", to_json(c.paths)},
          {"ablation", to_json(c.ablation)}};
}

namespace {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + ": missing or wrong type");
  }
}

trainer::Ratios ratios_from_json(const json& j, const std::string& where) {
  return {get<double>(j, "stm", where), get<double>(j, "msm", where), get<double>(j, "mcm", where)};
}

}  // namespace

SynthConfig synth_from_json(const json& j) {
  const std::string w = "synth";
  SynthConfig c;
  c.num_videos_per_view = get<std::size_t>(j, "num_videos_per_view", w);
  c.frames_min = get<std::size_t>(j, "frames_min", w);
  c.frames_max = get<std::size_t>(j, "frames_max", w);
  c.num_phases = get<std::size_t>(j, "num_phases", w);
  c.num_classes = get<std::size_t>(j, "num_classes", w);
  c.d_latent_true = get<std::size_t>(j, "d_latent_true", w);
  c.N = get<std::size_t>(j, "N", w);
  c.d = get<std::size_t>(j, "d", w);
  c.view_noise_sigma = get<double>(j, "view_noise_sigma", w);
  c.drift_sigma = get<double>(j, "drift_sigma", w);
  c.clutter_sigma = get<double>(j, "clutter_sigma", w);
  c.view_offset_sigma = get<double>(j, "view_offset_sigma", w);
  c.train_fraction = get<double>(j, "train_fraction", w);
  c.val_fraction = get<double>(j, "val_fraction", w);
  c.seed = get<std::uint64_t>(j, "seed", w);
  return c;
}

trainer::TrainConfig train_from_json(const json& j) {
  const std::string w = "train";
  trainer::TrainConfig c;
  c.seed = get<std::uint64_t>(j, "seed", w);
  c.steps = get<std::size_t>(j, "steps", w);
  c.batch_pairs = get<std::size_t>(j, "batch_pairs", w);
  c.frames_per_clip = get<std::size_t>(j, "frames_per_clip", w);
  c.ratios = ratios_from_json(j.at("ratios"), w + ".ratios");
  const json& o = j.at("optimizer");
  c.optimizer = {get<double>(o, "lr", w + ".optimizer"), get<double>(o, "beta1", w + ".optimizer"),
                 get<double>(o, "beta2", w + ".optimizer"), get<double>(o, "eps", w + ".optimizer")};
  try {
    const json& a = j.at("arch");
    c.arch.d_in = a.at("d_in").get<std::size_t>();
    c.arch.d_model = a.at("d_model").get<std::size_t>();
    c.arch.encoder_blocks = a.at("encoder_blocks").get<std::size_t>();
    c.arch.decoder_blocks = a.at("decoder_blocks").get<std::size_t>();
    c.arch.heads = a.at("heads").get<std::size_t>();
    c.arch.max_len = a.at("max_len").get<std::size_t>();
    c.arch.encoder_mlp_ratio = a.at("encoder_mlp_ratio").get<double>();
    c.arch.decoder_mlp_ratio = a.at("decoder_mlp_ratio").get<double>();
    c.arch.ln_eps = a.at("ln_eps").get<double>();
    c.arch.final_norm = a.at("final_norm").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train.arch: ") + e.what());
  }
  const json& f = j.at("flags");
  c.flags.enable_msm = get<bool>(f, "enable_msm", w + ".flags");
  c.flags.enable_mcm = get<bool>(f, "enable_mcm", w + ".flags");
  c.flags.enable_causal = get<bool>(f, "enable_causal", w + ".flags");
  c.flags.enable_stm = get<bool>(f, "enable_stm", w + ".flags");
  c.flags.masked_only_loss = get<bool>(f, "masked_only_loss", w + ".flags");
  c.checkpoint_every = get<std::size_t>(j, "checkpoint_every", w);
  c.sampling = trainer::parse_sample_mode(get<std::string>(j, "sampling", w));
  c.pair_sampling = trainer::parse_pair_sampling(get<std::string>(j, "pair_sampling", w));
  c.record_timing = get<bool>(j, "record_timing", w);
  return c;
}

eval::EvalConfig eval_from_json(const json& j) {
  const std::string w = "eval";
  eval::EvalConfig c;
  c.k_values = get<std::vector<std::size_t>>(j, "k_values", w);
  c.similarity = eval::parse_similarity(get<std::string>(j, "similarity", w));
  c.svm_c = get<double>(j, "svm_c", w);
  c.ridge_lambda = get<double>(j, "ridge_lambda", w);
  if (!j.at("few_shot_percent").is_null()) c.few_shot_percent = get<double>(j, "few_shot_percent", w);
  c.few_shot_seed = get<std::uint64_t>(j, "few_shot_seed", w);
  c.threads = get<std::size_t>(j, "threads", w);
  return c;
}

RunConfig run_from_json(const json& j) {
  RunConfig c;
  c.synth = synth_from_json(j.at("synth"));
  c.train = train_from_json(j.at("train"));
  c.eval = eval_from_json(j.at("eval"));
  const json& p = j.at("paths");
  c.paths.dataset_dir = get<std::string>(p, "dataset_dir", "paths");
  c.paths.manifest = get<std::string>(p, "manifest", "paths");
  c.paths.out_dir = get<std::string>(p, "out_dir", "paths");
  c.paths.checkpoint = get<std::string>(p, "checkpoint", "paths");
  const json& a = j.at("ablation");
  c.ablation.variants = get<std::vector<std::string>>(a, "variants", "ablation");
  for (const auto& r : a.at("ratio_sweeps")) c.ablation.ratio_sweeps.push_back(ratios_from_json(r, "ablation.ratio_sweeps"));
  c.ablation.seeds = get<std::vector<std::uint64_t>>(a, "seeds", "ablation");
  c.ablation.steps = get<std::size_t>(a, "steps", "ablation");
  c.ablation.threads = get<std::size_t>(a, "threads", "ablation");
  return c;
}

void merge_strict(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw ValidationError((where.empty() ? "config" : where) + ": expected an object");
  for (auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ValidationError("unknown config key '" + path + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, path);
    } else {
      slot = value;
    }
  }
}

namespace {

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (const auto& p : parts)
    if (p.empty()) throw ValidationError("malformed override key '" + key + "'");
  return parts;
}

json* find_path(json& root, const std::vector<std::string>& parts) {
  json* node = &root;
  for (const auto& p : parts) {
    if (!node->is_object() || !node->contains(p)) return nullptr;
    node = &(*node)[p];
  }
  return node;
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not KEY=VALUE");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  const auto parts = split_key(key);
  json* slot = find_path(doc, parts);
  if (!slot) {
    std::vector<std::string> hits;
    for (auto& [section, body] : doc.items()) {
      if (json* s = find_path(body, parts)) {
        hits.push_back(section);
        slot = s;
      }
    }
    if (hits.empty()) throw ValidationError("unknown config key '" + key + "'");
    if (hits.size() > 1) {
      std::string list;
      for (const auto& h : hits) list += (list.empty() ? "" : ", ") + h + "." + key;
      throw ValidationError("ambiguous override '" + key + "' (matches " + list + ")");
    }
  }
  if (slot->is_object()) throw ValidationError("override '" + key + "' names a section, not a value");
  *slot = std::move(value);
}

RunConfig load_run_config(const std::filesystem::path* file, const std::vector<std::string>& overrides) {
  json doc = to_json(RunConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw IoError("cannot read config " + file->string());
    json user = json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ValidationError("config " + file->string() + " is not valid JSON");
    merge_strict(doc, user);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig c;
  try {
    c = run_from_json(doc);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.finalize();
  return c;
}

}  // namespace byov::config
