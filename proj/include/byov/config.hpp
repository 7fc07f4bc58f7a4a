#pragma once

// JSON run configuration: sections synth, train, eval, paths and ablation.
// Documents are merged over the defaults; unknown keys are rejected.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "byov/data.hpp"
#include "byov/eval.hpp"
#include "byov/trainer.hpp"

namespace byov::config {

using nlohmann::json;

struct Paths {
  std::filesystem::path dataset_dir = "data/synth";
  std::filesystem::path manifest;    // default: <dataset_dir>/manifest.json
  std::filesystem::path out_dir = "runs/default";
  std::filesystem::path checkpoint;  // default: <out_dir>/final.byvc

  std::filesystem::path manifest_path() const;
  std::filesystem::path checkpoint_path() const;
};

struct AblationConfig {
  std::vector<std::string> variants{"full", "-stm", "-causal", "-msm", "-mcm"};
  std::vector<trainer::Ratios> ratio_sweeps;  // extra full-model rows
  std::vector<std::uint64_t> seeds;           // default: train.seed only
  std::size_t steps = 0;                      // 0: train.steps
  std::size_t threads = 1;

  void validate() const;
};

struct RunConfig {
  SynthConfig synth;
  trainer::TrainConfig train;
  eval::EvalConfig eval;
  Paths paths;
  AblationConfig ablation;

  // Copies paths into the train section and validates every section.
  void finalize();
};

json to_json(const SynthConfig& c);
json to_json(const trainer::TrainConfig& c);  // without dataset/output paths
json to_json(const eval::EvalConfig& c);
json to_json(const Paths& c);
json to_json(const AblationConfig& c);
json to_json(const RunConfig& c);

SynthConfig synth_from_json(const json& j);
trainer::TrainConfig train_from_json(const json& j);
eval::EvalConfig eval_from_json(const json& j);
RunConfig run_from_json(const json& j);

// Overlays `patch` onto `base`. Every key of the patch must already exist in
// the base; nested objects merge recursively. Throws ValidationError.
void merge_strict(json& base, const json& patch, const std::string& where = "");

// KEY=VALUE with a dotted key. Keys resolve from the document root first; a
// key that is not a full path is looked up inside each section and must match
// exactly one. VALUE is read as JSON when it parses, else as a string.
void apply_override(json& doc, const std::string& assignment);

// Defaults, then the optional file, then overrides. Throws ValidationError
// (schema or value problems) or IoError (unreadable file).
RunConfig load_run_config(const std::filesystem::path* file, const std::vector<std::string>& overrides);

}  // namespace byov::config
