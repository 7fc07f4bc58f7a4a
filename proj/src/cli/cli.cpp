#include "byov/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "byov/ablation.hpp"
#include "byov/checkpoint.hpp"
#include "byov/config.hpp"
#include "byov/eval.hpp"
#include "byov/trainer.hpp"

namespace byov::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void setup_logging() {
  auto logger = spdlog::get("byov");
  if (!logger) {
    logger = spdlog::stderr_color_mt("byov");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("BYOV_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("BYOV_LOG='{}' not recognised; using info", level);
  }
}

struct Globals {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

config::RunConfig resolve(const Globals& g, bool out_is_dataset) {
  std::vector<std::string> overrides = g.overrides;
  if (g.seed) {
    overrides.push_back("synth.seed=" + std::to_string(*g.seed));
    overrides.push_back("train.seed=" + std::to_string(*g.seed));
  }
  if (g.threads) {
    overrides.push_back("eval.threads=" + std::to_string(*g.threads));
    overrides.push_back("ablation.threads=" + std::to_string(*g.threads));
  }
  if (g.out) overrides.push_back(std::string(out_is_dataset ? "paths.dataset_dir=" : "paths.out_dir=") + json(*g.out).dump());
  const fs::path file = g.config ? fs::path(*g.config) : fs::path();
  return config::load_run_config(g.config ? &file : nullptr, overrides);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

Dataset require_dataset(const fs::path& manifest) {
  if (!fs::exists(manifest)) throw ValidationError("dataset manifest not found: " + manifest.string());
  return load_manifest(manifest);
}

eval::EmbedSettings embed_settings(const model::Checkpoint& ck) {
  eval::EmbedSettings s;
  const json& c = ck.config;
  if (c.contains("ratios")) s.stm_ratio = c["ratios"].value("stm", s.stm_ratio);
  if (c.contains("flags")) s.enable_stm = c["flags"].value("enable_stm", s.enable_stm);
  return s;
}

int cmd_gen_synth(const Globals& g) {
  const auto cfg = resolve(g, true);
  const fs::path dir = cfg.paths.dataset_dir;
  const Dataset ds = generate_synthetic(cfg.synth, dir);
  std::size_t ego = 0, exo = 0, tmin = SIZE_MAX, tmax = 0;
  for (const auto& r : ds.records) {
    (r.view == View::ego ? ego : exo)++;
    tmin = std::min(tmin, r.num_frames);
    tmax = std::max(tmax, r.num_frames);
  }
  std::cout << "wrote " << ds.records.size() << " videos to " << dir.string() << "\n"
            << "  videos per view: ego " << ego << ", exo " << exo << "\n"
            << "  phases: " << ds.meta.num_phases << "\n"
            << "  frames: " << tmin << ".." << tmax << "\n";
  return kOk;
}

int cmd_train(const Globals& g, const std::optional<std::string>& resume) {
  const auto cfg = resolve(g, false);
  const Dataset ds = require_dataset(cfg.train.manifest);
  const trainer::TrainingData data(ds);
  trainer::TrainOptions opts;
  if (resume) opts.resume_from = fs::path(*resume);
  fs::create_directories(cfg.paths.out_dir);
  write_text(cfg.paths.out_dir / "config.json", config::to_json(cfg).dump(2) + "\n");
  const auto result = trainer::train(cfg.train, data, opts);
  std::cout << "trained to step " << result.state.step << "; checkpoint " << result.final_checkpoint.string() << "\n";
  if (!result.log.empty()) {
    const auto& l = result.log.back().losses;
    std::cout << "final losses: l_msm_ego " << l.l_msm_ego << ", l_msm_exo " << l.l_msm_exo << ", l_mcm_ego "
              << l.l_mcm_ego << ", l_mcm_exo " << l.l_mcm_exo << ", l_total " << l.l_total << "\n";
  }
  return kOk;
}

fs::path checkpoint_arg(const config::RunConfig& cfg, const std::optional<std::string>& arg) {
  const fs::path p = arg ? fs::path(*arg) : cfg.paths.checkpoint_path();
  if (!fs::exists(p)) throw ValidationError("checkpoint not found: " + p.string());
  return p;
}

fs::path manifest_arg(const config::RunConfig& cfg, const std::optional<std::string>& arg) {
  return arg ? fs::path(*arg) : cfg.train.manifest;
}

int cmd_embed(const Globals& g, const std::optional<std::string>& ckpt_arg, const std::optional<std::string>& man_arg,
              const std::string& split) {
  const auto cfg = resolve(g, false);
  const auto ck = model::load_checkpoint(checkpoint_arg(cfg, ckpt_arg));
  const Dataset ds = require_dataset(manifest_arg(cfg, man_arg));
  std::optional<Split> which;
  if (split != "all") which = parse_split(split);
  const auto settings = embed_settings(ck);
  const fs::path dir = cfg.paths.out_dir / "latents";
  fs::create_directories(dir);
  json index = json::array();
  for (const VideoRecord* r : ds.select(which)) {
    const auto v = eval::embed_video(ck.params, ds, *r, settings);
    TokenEmbeddingSequence seq{v.video_id, v.T, 1, v.dim, v.latents};
    const std::string file = v.video_id + ".byv";
    write_token_embeddings(dir / file, seq);
    index.push_back({{"video_id", v.video_id}, {"view", to_string(v.view)}, {"split", to_string(v.split)},
                     {"num_frames", v.T}, {"dim", v.dim}, {"path", file}});
  }
  write_text(dir / "index.json", index.dump(2) + "\n");
  std::cout << "embedded " << index.size() << " videos into " << dir.string() << "\n";
  return kOk;
}

int cmd_eval(const Globals& g, const std::optional<std::string>& ckpt_arg, const std::optional<std::string>& man_arg,
             const std::optional<double>& few_shot, bool raw) {
  auto cfg = resolve(g, false);
  if (few_shot) cfg.eval.few_shot_percent = *few_shot;
  cfg.eval.validate();
  const Dataset ds = require_dataset(manifest_arg(cfg, man_arg));
  eval::MetricsReport report;
  if (raw) {
    const eval::EmbedSettings settings{cfg.train.ratios.stm, cfg.train.flags.enable_stm};
    report = eval::evaluate(eval::raw_dataset(ds, settings), cfg.eval);
    report.config["embedding"] = {{"source", "raw"}, {"stm_ratio", settings.stm_ratio}, {"enable_stm", settings.enable_stm}};
  } else {
    const fs::path path = checkpoint_arg(cfg, ckpt_arg);
    const auto ck = model::load_checkpoint(path);
    report = eval::eval_all(ck.params, ds, embed_settings(ck), cfg.eval);
    report.config["checkpoint"] = path.string();
    report.config["checkpoint_step"] = ck.step;
  }
  write_text(cfg.paths.out_dir / "metrics.json", report.to_json().dump(2) + "\n");
  write_text(cfg.paths.out_dir / "metrics.csv", report.to_csv());
  std::cout << report.to_csv();
  return kOk;
}

int cmd_ablate(const Globals& g) {
  const auto cfg = resolve(g, false);
  const Dataset ds = require_dataset(cfg.train.manifest);
  const auto report = trainer::run_ablation_suite(cfg.train, cfg.ablation, cfg.eval, ds);
  write_text(cfg.paths.out_dir / "ablation.json", report.to_json().dump(2) + "\n");
  write_text(cfg.paths.out_dir / "ablation.csv", report.to_csv());
  std::cout << report.to_csv();
  for (const auto& r : report.rows)
    if (!r.ok) return kFailure;
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"Masked ego-exo representation learning from unpaired videos"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration JSON (sections synth, train, eval, paths, ablation)");
  app.add_option("--seed", g.seed, "Seed for data generation and training (sets synth.seed and train.seed)");
  app.add_option("--override", g.overrides, "Config override KEY=VALUE, dotted key; repeatable")->allow_extra_args(false);
  app.add_option("--out", g.out, "Output directory (dataset directory for gen-synth)");
  app.add_option("--threads", g.threads, "Worker threads for evaluation and the ablation suite")
      ->check(CLI::PositiveNumber);
  app.fallthrough();

  auto* gen = app.add_subcommand("gen-synth", "Generate the synthetic unpaired ego/exo dataset");
  auto* train = app.add_subcommand("train", "Train the encoder/decoder");
  std::optional<std::string> resume;
  train->add_option("--resume", resume, "Checkpoint to resume from");

  auto* embed = app.add_subcommand("embed", "Write per-frame latents for every video as BYV1 files (N = 1)");
  std::optional<std::string> ckpt, manifest;
  std::string split = "all";
  embed->add_option("--checkpoint", ckpt, "Checkpoint (default: <out>/final.byvc)");
  embed->add_option("--manifest", manifest, "Dataset manifest (default: from paths)");
  embed->add_option("--split", split, "Split to embed")->check(CLI::IsMember({"all", "train", "val", "test"}));

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; writes metrics.json and metrics.csv");
  std::optional<double> few_shot;
  bool raw = false;
  ev->add_option("--checkpoint", ckpt, "Checkpoint (default: <out>/final.byvc)");
  ev->add_option("--manifest", manifest, "Dataset manifest (default: from paths)");
  ev->add_option("--few-shot", few_shot, "Percent of training frames per label for the classifier")
      ->check(CLI::Range(0.0, 100.0));
  ev->add_flag("--raw", raw, "Evaluate the merged input features instead of a checkpoint");

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation variants; writes ablation.json/.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(g);
    if (train->parsed()) return cmd_train(g, resume);
    if (embed->parsed()) return cmd_embed(g, ckpt, manifest, split);
    if (ev->parsed()) return cmd_eval(g, ckpt, manifest, few_shot, raw);
    if (ablate->parsed()) return cmd_ablate(g);
  } catch (const ValidationError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  } catch (const DatasetError& e) {
    spdlog::error("dataset error: {}", e.what());
    return kConfigError;
  } catch (const IoError& e) {
    spdlog::error("I/O error: {}", e.what());
    return kIoError;
  } catch (const FormatError& e) {
    spdlog::error("format error: {}", e.what());
    return kIoError;
  } catch (const num::NumericError& e) {
    spdlog::error("numeric error: {}", e.what());
    return kNumericError;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("I/O error: {}", e.what());
    return kIoError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  return kFailure;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace byov::cli
