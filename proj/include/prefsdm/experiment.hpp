#pragma once

#include "prefsdm/config.hpp"
#include "prefsdm/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace prefsdm {

// Cartesian product range x prop_random x n_total x replicate, in that
// nesting order (replicate innermost).
std::vector<ScenarioSpec> scenario_grid(const ExperimentConfig& cfg);

// Simulates the scenario's dataset once and fits every requested model kind to it.
// Fit failures become rows with ok = false.
std::vector<ScenarioResult> evaluate_spec(const ScenarioSpec& sc, const ExperimentConfig& cfg,
                                          std::span<const ModelKind> models);

using SpecEvaluator = std::function<std::vector<ScenarioResult>(
    const ScenarioSpec&, const ExperimentConfig&, std::span<const ModelKind>)>;

struct RunOptions {
  bool resume = false;
  int jobs = 1;
  // Stop after this many specs have been processed (< 0: no limit).
  int max_specs = -1;
  SpecEvaluator evaluator;  // empty: evaluate_spec
  std::function<void(const std::string&)> log;
};

struct RunSummary {
  int specs_total = 0;
  int specs_skipped = 0;
  int specs_run = 0;
  int rows_written = 0;
  int failed_rows = 0;
};

inline constexpr const char* kResultsFile = "results.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

// Appends one JSON row per (scenario, model) to <outdir>/results.jsonl. With
// resume, rows already present are kept byte-for-byte and only missing
// (scenario, model) pairs are computed; without it an existing archive is an error.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& outdir,
                          const RunOptions& opts = {});

nlohmann::ordered_json to_json(const ScenarioResult& r);
ScenarioResult result_from_json(const nlohmann::json& j);

std::vector<ScenarioResult> read_results(const std::filesystem::path& jsonl);

inline constexpr const char* kResultsCsvHeader =
    "scenario_id,range,prop_random,n_total,replicate,model,status,waic,p_eff,rmse,"
    "abundance_est,abundance_true,abundance_ratio,log_evidence,converged,n_obs,eta,eta_star,"
    "beta,alpha,range_hat,sigma_hat,tau_hat";

std::string results_csv(const std::vector<ScenarioResult>& rows);

}  // namespace prefsdm
