#pragma once

// Component ablations and masking-ratio sweeps trained on one dataset with
// shared seeds, each scored by the standard evaluation.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "byov/config.hpp"
#include "byov/eval.hpp"
#include "byov/trainer.hpp"

namespace byov::trainer {

struct AblationVariant {
  std::string name;
  TrainConfig config;
};

// Flag variants in request order, then one full-model row per ratio tuple.
// Variants differ from base only in the flag or ratios they name.
std::vector<AblationVariant> make_variants(const TrainConfig& base, const config::AblationConfig& ablation);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  eval::MetricsReport report;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
  // variant,seed,status,f1,map@10,progression,tau,f1_ego2exo,f1_exo2ego,map@10_ego2exo,map@10_exo2ego
  std::string to_csv() const;
};

// Trains every (variant, seed) job on a bounded worker pool. A failed job is
// recorded with its error; the others still report.
AblationReport run_ablation_suite(const TrainConfig& base, const config::AblationConfig& ablation,
                                  const eval::EvalConfig& eval_config, const Dataset& dataset);

}  // namespace byov::trainer
