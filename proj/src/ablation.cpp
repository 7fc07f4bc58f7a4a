#include "byov/ablation.hpp"

#include <cstdio>
#include <spdlog/spdlog.h>

#include "byov/parallel.hpp"

namespace byov::trainer {

using nlohmann::json;

std::vector<AblationVariant> make_variants(const TrainConfig& base, const config::AblationConfig& ablation) {
  ablation.validate();
  std::vector<AblationVariant> out;
  for (const auto& name : ablation.variants) {
    TrainConfig c = base;
    if (name == "-stm") c.flags.enable_stm = false;
    if (name == "-causal") c.flags.enable_causal = false;
    if (name == "-msm") c.flags.enable_msm = false;
    if (name == "-mcm") c.flags.enable_mcm = false;
    if (ablation.steps) c.steps = ablation.steps;
    out.push_back({name, c});
  }
  for (const auto& r : ablation.ratio_sweeps) {
    TrainConfig c = base;
    c.ratios = r;
    if (ablation.steps) c.steps = ablation.steps;
    char name[96];
    std::snprintf(name, sizeof name, "ratios(stm=%g,msm=%g,mcm=%g)", r.stm, r.msm, r.mcm);
    out.push_back({name, c});
  }
  return out;
}

AblationReport run_ablation_suite(const TrainConfig& base, const config::AblationConfig& ablation,
                                  const eval::EvalConfig& eval_config, const Dataset& dataset) {
  const auto variants = make_variants(base, ablation);
  const std::vector<std::uint64_t> seeds = ablation.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : ablation.seeds;
  const TrainingData data(dataset);

  struct Job {
    const AblationVariant* variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& v : variants)
    for (auto s : seeds) jobs.push_back({&v, s});

  AblationReport report;
  report.rows.resize(jobs.size());
  eval::EvalConfig ec = eval_config;
  ec.threads = 1;
  parallel_for(jobs.size(), ablation.threads, [&](std::size_t i) {
    AblationRow& row = report.rows[i];
    row.variant = jobs[i].variant->name;
    row.seed = jobs[i].seed;
    try {
      TrainConfig c = jobs[i].variant->config;
      c.seed = jobs[i].seed;
      c.out_dir.clear();
      const TrainResult trained = train(c, data);
      const eval::EmbedSettings es{c.ratios.stm, c.flags.enable_stm};
      row.report = eval::eval_all(trained.state.params, dataset, es, ec);
      row.ok = true;
      spdlog::info("ablation {} seed {}: tau {:.4f}", row.variant, row.seed, row.report.kendall_tau);
    } catch (const std::exception& e) {
      row.error = e.what();
      spdlog::error("ablation {} seed {} failed: {}", row.variant, row.seed, row.error);
    }
  });
  return report;
}

json AblationReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    json j = {{"variant", r.variant}, {"seed", r.seed}, {"status", r.ok ? "ok" : "failed"}};
    if (r.ok) {
      j["f1"] = r.report.f1.at(eval::Setting::regular);
      j["map@10"] = r.report.map_at.contains(10) ? json(r.report.map_at.at(10).at(eval::Setting::regular)) : json(nullptr);
      j["progression"] = r.report.r2_progression;
      j["tau"] = r.report.kendall_tau;
      j["report"] = r.report.to_json();
    } else {
      j["error"] = r.error;
    }
    rows_json.push_back(j);
  }
  return {{"rows", rows_json}};
}

std::string AblationReport::to_csv() const {
  std::string out = "variant,seed,status,f1,map@10,progression,tau,f1_ego2exo,f1_exo2ego,map@10_ego2exo,map@10_exo2ego\n";
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", v);
    return std::string(b);
  };
  for (const auto& r : rows) {
    std::string name = r.variant;
    if (name.find(',') != std::string::npos) name = "\"" + name + "\"";
    out += name + "," + std::to_string(r.seed) + "," + (r.ok ? "ok" : "failed");
    if (r.ok) {
      const auto& m = r.report;
      auto map10 = [&](eval::Setting s) { return m.map_at.contains(10) ? num(m.map_at.at(10).at(s)) : std::string(); };
      out += "," + num(m.f1.at(eval::Setting::regular)) + "," + map10(eval::Setting::regular) + "," + num(m.r2_progression) +
             "," + num(m.kendall_tau) + "," + num(m.f1.at(eval::Setting::ego2exo)) + "," +
             num(m.f1.at(eval::Setting::exo2ego)) + "," + map10(eval::Setting::ego2exo) + "," +
             map10(eval::Setting::exo2ego);
    } else {
      out += ",,,,,,,,";
    }
    out += "\n";
  }
  return out;
}

}  // namespace byov::trainer
