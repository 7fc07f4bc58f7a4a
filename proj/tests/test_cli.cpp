#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "byov/ablation.hpp"
#include "byov/checkpoint.hpp"
#include "byov/cli.hpp"
#include "byov/config.hpp"
#include "test_util.hpp"

using namespace byov;
using byov::testing::TempDir;
using byov::testing::read_bytes;
using byov::testing::write_text;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "byov");
  return cli::run(args);
}

std::string run_cli_stdout(std::vector<std::string> args, int* code) {
  ::testing::internal::CaptureStdout();
  *code = run_cli(std::move(args));
  return ::testing::internal::GetCapturedStdout();
}

// Small enough that every command finishes in seconds.
json tiny_config(const TempDir& dir) {
  return {{"synth",
           {{"num_videos_per_view", 8}, {"frames_min", 8}, {"frames_max", 14}, {"num_phases", 2}, {"N", 8}, {"d", 8},
            {"train_fraction", 0.5}, {"seed", 5}}},
          {"train",
           {{"steps", 200},
            {"frames_per_clip", 8},
            {"record_timing", false},
            {"arch", {{"d_model", 16}, {"encoder_blocks", 2}, {"decoder_blocks", 1}, {"heads", 2}, {"max_len", 64}}}}},
          {"paths", {{"dataset_dir", (dir / "data").string()}, {"out_dir", (dir / "run").string()}}}};
}

std::string write_config(const TempDir& dir, const json& cfg, const std::string& name = "config.json") {
  const fs::path p = dir / name;
  write_text(p, cfg.dump(2));
  return p.string();
}

std::map<std::string, std::vector<char>> tree_bytes(const fs::path& root) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_bytes(e.path());
  return out;
}

std::size_t count_lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

// ---- configuration ---------------------------------------------------------

TEST(Config, DefaultsRoundTrip) {
  const auto cfg = config::load_run_config(nullptr, {});
  EXPECT_EQ(cfg.train.steps, 2000u);
  EXPECT_EQ(cfg.train.optimizer.lr, 1e-4);
  EXPECT_EQ(cfg.paths.manifest_path(), fs::path("data/synth/manifest.json"));
  EXPECT_EQ(config::to_json(config::run_from_json(config::to_json(cfg))), config::to_json(cfg));
}

TEST(Config, OverridesResolveDottedAndShortKeys) {
  const auto cfg = config::load_run_config(
      nullptr, {"train.steps=7", "ratios.mcm=0", "arch.d_model=32", "synth.num_phases=4", "eval.similarity=euclidean"});
  EXPECT_EQ(cfg.train.steps, 7u);
  EXPECT_EQ(cfg.train.ratios.mcm, 0.0);
  EXPECT_EQ(cfg.train.arch.d_model, 32u);
  EXPECT_EQ(cfg.synth.num_phases, 4u);
  EXPECT_EQ(cfg.eval.similarity, eval::Similarity::euclidean);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config::load_run_config(nullptr, {"train.stepz=3"}), ValidationError);
  EXPECT_THROW(config::load_run_config(nullptr, {"nonsense"}), ValidationError);
  EXPECT_THROW(config::load_run_config(nullptr, {"train.steps=\"many\""}), ValidationError);
  EXPECT_THROW(config::load_run_config(nullptr, {"synth.num_phases=1"}), ValidationError);
  EXPECT_THROW(config::load_run_config(nullptr, {"ratios.msm=1.5"}), ValidationError);
  json doc = config::to_json(config::RunConfig{});
  EXPECT_THROW(config::merge_strict(doc, json{{"train", {{"bogus", 1}}}}), ValidationError);
}

TEST(Config, FileThenOverridesWin) {
  TempDir dir;
  const std::string path = write_config(dir, json{{"train", {{"steps", 5}, {"seed", 9}}}});
  const fs::path p(path);
  auto cfg = config::load_run_config(&p, {});
  EXPECT_EQ(cfg.train.steps, 5u);
  EXPECT_EQ(cfg.train.seed, 9u);
  cfg = config::load_run_config(&p, {"train.steps=6"});
  EXPECT_EQ(cfg.train.steps, 6u);
  const fs::path missing = dir / "missing.json";
  EXPECT_THROW(config::load_run_config(&missing, {}), IoError);
}

TEST(Config, McmRatioZeroOverrideMatchesSweepRow) {
  const auto overridden = config::load_run_config(nullptr, {"ratios.mcm=0"});
  const auto base = config::load_run_config(nullptr, {});
  config::AblationConfig ab;
  ab.variants.clear();
  ab.ratio_sweeps.push_back({base.train.ratios.stm, base.train.ratios.msm, 0.0});
  const auto rows = trainer::make_variants(base.train, ab);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(config::to_json(rows[0].config), config::to_json(overridden.train));
}

// ---- command surface ---------------------------------------------------------

TEST(Cli, HelpDocumentsEveryFlag) {
  int code = -1;
  const std::string top = run_cli_stdout({"--help"}, &code);
  EXPECT_EQ(code, 0);
  for (const char* flag : {"--config", "--seed", "--override", "--out", "--threads"})
    EXPECT_NE(top.find(flag), std::string::npos) << flag;
  for (const char* cmd : {"gen-synth", "train", "embed", "eval", "ablate"}) EXPECT_NE(top.find(cmd), std::string::npos);

  const std::map<std::string, std::vector<std::string>> flags{
      {"gen-synth", {}},
      {"train", {"--resume"}},
      {"embed", {"--checkpoint", "--manifest", "--split"}},
      {"eval", {"--checkpoint", "--manifest", "--few-shot", "--raw"}},
      {"ablate", {}}};
  for (const auto& [cmd, own] : flags) {
    const std::string help = run_cli_stdout({cmd, "--help"}, &code);
    EXPECT_EQ(code, 0) << cmd;
    for (const auto& f : own) EXPECT_NE(help.find(f), std::string::npos) << cmd << " " << f;
  }
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli({}), cli::kConfigError);
  EXPECT_EQ(run_cli({"frobnicate"}), cli::kConfigError);
  EXPECT_EQ(run_cli({"eval", "--few-shot", "250"}), cli::kConfigError);
  EXPECT_EQ(run_cli({"--threads", "0", "gen-synth"}), cli::kConfigError);
}

TEST(Cli, GenSynthDeterministicAndLoadable) {
  TempDir dir;
  const std::string cfg = write_config(dir, tiny_config(dir));
  int code = -1;
  const std::string out = run_cli_stdout({"--config", cfg, "--out", (dir / "a").string(), "gen-synth"}, &code);
  ASSERT_EQ(code, 0);
  EXPECT_NE(out.find("videos per view: ego 8, exo 8"), std::string::npos) << out;
  EXPECT_NE(out.find("phases: 2"), std::string::npos);
  const Dataset ds = load_manifest(dir / "a" / "manifest.json");
  EXPECT_EQ(ds.records.size(), 16u);
  ASSERT_EQ(run_cli({"--config", cfg, "--out", (dir / "b").string(), "gen-synth"}), 0);
  EXPECT_EQ(tree_bytes(dir / "a"), tree_bytes(dir / "b"));
  ASSERT_EQ(run_cli({"--config", cfg, "--seed", "6", "--out", (dir / "c").string(), "gen-synth"}), 0);
  EXPECT_NE(tree_bytes(dir / "a"), tree_bytes(dir / "c"));
}

TEST(Cli, ConfigProblemsExitTwo) {
  TempDir dir;
  const std::string cfg = write_config(dir, tiny_config(dir));
  EXPECT_EQ(run_cli({"--config", cfg, "--override", "synth.num_phases=1", "gen-synth"}), cli::kConfigError);
  EXPECT_EQ(run_cli({"--config", cfg, "--override", "synth.colour=3", "gen-synth"}), cli::kConfigError);
  json bad = tiny_config(dir);
  bad["train"]["unknown"] = 1;
  EXPECT_EQ(run_cli({"--config", write_config(dir, bad, "bad.json"), "train"}), cli::kConfigError);
  // No dataset has been generated yet.
  EXPECT_EQ(run_cli({"--config", cfg, "train"}), cli::kConfigError);
}

TEST(Cli, IoProblemsExitThree) {
  TempDir dir;
  EXPECT_EQ(run_cli({"--config", (dir / "absent.json").string(), "gen-synth"}), cli::kIoError);
  write_text(dir / "file", "x");
  EXPECT_EQ(run_cli({"--out", (dir / "file" / "sub").string(), "gen-synth"}), cli::kIoError);

  const std::string cfg = write_config(dir, tiny_config(dir));
  ASSERT_EQ(run_cli({"--config", cfg, "gen-synth"}), 0);
  write_text(dir / "broken.byvc", "not a checkpoint");
  EXPECT_EQ(run_cli({"--config", cfg, "eval", "--checkpoint", (dir / "broken.byvc").string()}), cli::kIoError);
}

TEST(Cli, NonFiniteLossExitsFour) {
  TempDir dir;
  const std::string cfg = write_config(dir, tiny_config(dir));
  ASSERT_EQ(run_cli({"--config", cfg, "gen-synth"}), 0);
  EXPECT_EQ(run_cli({"--config", cfg, "--override", "train.steps=20", "--override", "optimizer.lr=1e30", "train"}),
            cli::kNumericError);
}

// Generation, a 200-step smoke run, then every consumer of the checkpoint.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    cfg_ = write_config(*dir_, tiny_config(*dir_));
    ASSERT_EQ(run_cli({"--config", cfg_, "gen-synth"}), 0);
    const auto start = std::chrono::steady_clock::now();
    int code = -1;
    train_stdout_ = run_cli_stdout({"--config", cfg_, "train"}, &code);
    train_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ASSERT_EQ(code, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path run_dir() { return *dir_ / "run"; }

  static TempDir* dir_;
  static std::string cfg_;
  static std::string train_stdout_;
  static double train_seconds_;
};

TempDir* Pipeline::dir_ = nullptr;
std::string Pipeline::cfg_;
std::string Pipeline::train_stdout_;
double Pipeline::train_seconds_ = 0;

TEST_F(Pipeline, SmokeTrainingIsQuickAndComplete) {
  EXPECT_LT(train_seconds_, 60.0);
  EXPECT_NE(train_stdout_.find("trained to step 200"), std::string::npos) << train_stdout_;
  EXPECT_NE(train_stdout_.find("final losses: l_msm_ego"), std::string::npos);
  const auto ck = model::load_checkpoint(run_dir() / "final.byvc");
  EXPECT_EQ(ck.step, 200u);
  std::ifstream log(run_dir() / "trainlog.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, 200u);
  const json written = json::parse(std::ifstream(run_dir() / "config.json"));
  EXPECT_EQ(written["train"]["steps"], 200);
}

TEST_F(Pipeline, EvalWritesReportAndCsv) {
  int code = -1;
  const std::string out = run_cli_stdout({"--config", cfg_, "eval"}, &code);
  ASSERT_EQ(code, 0);
  const json j = json::parse(std::ifstream(run_dir() / "metrics.json"));
  const auto report = eval::MetricsReport::from_json(j);
  EXPECT_EQ(report.f1.size(), 3u);
  ASSERT_EQ(report.map_at.size(), 3u);
  std::size_t cells = report.f1.size() + 2;
  for (const auto& [k, row] : report.map_at) cells += row.size();
  std::ifstream csv(run_dir() / "metrics.csv");
  std::string text((std::istreambuf_iterator<char>(csv)), {});
  EXPECT_EQ(count_lines(text), 1 + cells);
  EXPECT_EQ(out, text);
  EXPECT_EQ(j["config"]["checkpoint_step"], 200);
  EXPECT_TRUE(j["config"]["few_shot_percent"].is_null());

  const auto first = read_bytes(run_dir() / "metrics.json");
  ASSERT_EQ(run_cli({"--config", cfg_, "eval"}), 0);
  EXPECT_EQ(read_bytes(run_dir() / "metrics.json"), first);
}

TEST_F(Pipeline, EvalFewShotAndRaw) {
  const std::string out = (*dir_ / "fewshot").string();
  ASSERT_EQ(run_cli({"--config", cfg_, "--out", out, "eval", "--checkpoint", (run_dir() / "final.byvc").string(),
                     "--few-shot", "10"}),
            0);
  const json j = json::parse(std::ifstream(fs::path(out) / "metrics.json"));
  EXPECT_EQ(j["config"]["few_shot_percent"], 10.0);

  const std::string raw = (*dir_ / "raw").string();
  ASSERT_EQ(run_cli({"--config", cfg_, "--out", raw, "eval", "--raw"}), 0);
  const json r = json::parse(std::ifstream(fs::path(raw) / "metrics.json"));
  EXPECT_EQ(r["config"]["embedding"]["source"], "raw");
}

TEST_F(Pipeline, EmbedWritesSingleTokenContainers) {
  const std::string out = (*dir_ / "embed").string();
  ASSERT_EQ(run_cli({"--config", cfg_, "--out", out, "embed", "--checkpoint", (run_dir() / "final.byvc").string(),
                     "--split", "test"}),
            0);
  const json index = json::parse(std::ifstream(fs::path(out) / "latents" / "index.json"));
  const Dataset ds = load_manifest(*dir_ / "data" / "manifest.json");
  EXPECT_EQ(index.size(), ds.select(Split::test).size());
  for (const auto& e : index) {
    const auto seq = read_token_embeddings(fs::path(out) / "latents" / e["path"].get<std::string>());
    EXPECT_EQ(seq.N, 1u);
    EXPECT_EQ(seq.d, 16u);
    EXPECT_EQ(seq.T, e["num_frames"].get<std::size_t>());
    EXPECT_EQ(e["split"], "test");
  }
}

TEST_F(Pipeline, ResumeContinuesFromCheckpoint) {
  const std::string out = (*dir_ / "resumed").string();
  ASSERT_EQ(run_cli({"--config", cfg_, "--out", out, "--override", "train.steps=210", "train", "--resume",
                     (run_dir() / "final.byvc").string()}),
            0);
  EXPECT_EQ(model::load_checkpoint(fs::path(out) / "final.byvc").step, 210u);
}

TEST_F(Pipeline, AblateReportsFiveVariantsDeterministically) {
  const std::string a = (*dir_ / "ablate_a").string(), b = (*dir_ / "ablate_b").string();
  const std::vector<std::string> common{"--config", cfg_, "--override", "ablation.steps=5"};
  auto args = common;
  args.insert(args.end(), {"--out", a, "ablate"});
  ASSERT_EQ(run_cli(args), 0);
  args = common;
  args.insert(args.end(), {"--out", b, "ablate"});
  ASSERT_EQ(run_cli(args), 0);
  std::ifstream csv(fs::path(a) / "ablation.csv");
  std::string text((std::istreambuf_iterator<char>(csv)), {});
  EXPECT_EQ(count_lines(text), 6u);
  for (const char* v : {"full", "-stm", "-causal", "-msm", "-mcm"}) EXPECT_NE(text.find(v), std::string::npos) << v;
  EXPECT_EQ(read_bytes(fs::path(a) / "ablation.json"), read_bytes(fs::path(b) / "ablation.json"));
}

TEST_F(Pipeline, AblateRatioSweepAddsRows) {
  const std::string out = (*dir_ / "sweep").string();
  ASSERT_EQ(run_cli({"--config", cfg_, "--out", out, "--override", "ablation.steps=3", "--override",
                     "ablation.variants=[\"full\"]", "--override",
                     "ablation.ratio_sweeps=[{\"stm\":0.3,\"msm\":0.4,\"mcm\":0.6},{\"stm\":0.5,\"msm\":0.2,\"mcm\":0.8}]",
                     "ablate"}),
            0);
  const json j = json::parse(std::ifstream(fs::path(out) / "ablation.json"));
  EXPECT_EQ(j["rows"].size(), 3u);
}
