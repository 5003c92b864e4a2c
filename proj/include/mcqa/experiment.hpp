#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcqa/backend.hpp"
#include "mcqa/benchmark.hpp"
#include "mcqa/eval.hpp"
#include "mcqa/metrics.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/prompt.hpp"
#include "mcqa/scoring.hpp"

namespace mcqa {

inline constexpr const char* kToolVersion = "0.1.0";

// One backend entry: exactly one of synthetic / http is set.
struct ModelConfig {
    std::string name;
    std::optional<SyntheticModelSpec> synthetic;
    std::optional<HttpEndpointConfig> http;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& obj);
};

struct NamedPerturbation {
    std::string name;
    PerturbationSpec spec;
};

struct BenchmarkSource {
    std::string format = "jsonl";  // "jsonl" or "mmlu_csv"
    std::string test;              // file (jsonl) or directory (mmlu_csv)
    std::string dev;               // optional

    nlohmann::json to_json() const;
    static BenchmarkSource from_json(const nlohmann::json& obj);
};

struct ItemFilters {
    std::vector<std::string> subjects;  // empty = all
    bool include_unsafe_items = false;
    std::optional<int> max_items;
};

// Declarative description of a (models x methods x perturbations) matrix.
struct ExperimentConfig {
    std::string name = "experiment";
    BenchmarkSource benchmark;
    std::vector<ModelConfig> models;
    std::vector<ScoringMethod> methods;
    PromptOptions prompt;
    std::vector<NamedPerturbation> perturbations;
    std::string baseline;  // perturbation name deltas compare against
    std::uint64_t seed = 0;
    std::string cache_dir;
    std::string out_dir = "out";
    ItemFilters filters;
    std::string trivial_dir = "data";  // trivial_examples_v{1,2,3}.jsonl location

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& obj);
    static ExperimentConfig load(const std::filesystem::path& path);

    std::string config_hash() const;
};

// Throws ConfigInvalid with the offending field named.
void validate_config(const ExperimentConfig& config);

struct CellStatus {
    std::string id;
    std::string model;
    std::string method_label;
    std::string perturbation;
    std::string status;  // "done", "resumed" or "failed"
    int n_items = 0;
    int n_scored = 0;
    int unscored = 0;
    int tie_count = 0;
    int fallback_items = 0;
    std::string error;

    nlohmann::json to_json() const;
    static CellStatus from_json(const nlohmann::json& obj);
};

struct RunManifest {
    std::string experiment;
    std::string config_hash;
    std::string code_version = kToolVersion;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> models;       // config order
    std::vector<std::string> methods;      // method labels, config order
    std::vector<std::string> perturbations;
    std::string baseline;
    int universe_items = 0;
    int universe_positions = 0;
    std::vector<CellStatus> cells;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& obj);
    static RunManifest load(const std::filesystem::path& path);
};

// Stable file-system-safe cell identifier.
std::string cell_id(const std::string& model, const ScoringMethod& method,
                    const std::string& perturbation);

// Item universe shared by every cell: subject filter, then the safety rule
// (unsafe items stay only when every perturbation tolerates them or the
// config says include), then max_items.
std::vector<const McqItem*> select_universe(const BenchmarkSet& set,
                                            const ExperimentConfig& config);

// Builds the provider for one model entry, wrapping HTTP backends in the
// score cache when cache_dir is set.
std::shared_ptr<LogprobProvider> make_provider(const ModelConfig& model,
                                               const std::shared_ptr<ScoreCache>& cache);

struct RunOutcome {
    RunManifest manifest;
    int exit_code = 0;  // 0 clean, 2 partial
};

// Evaluates every cell, writing raw results to out/results/<cell>.jsonl, a
// per-cell EvalReport to out/reports/<cell>.json and the manifest to
// out/manifest.json. Cells whose results file already matches the universe
// are reused, not re-scored. A failing backend marks its cells failed and
// the run continues.
RunOutcome run_experiment(const ExperimentConfig& config);

// Derives tables from a finished run directory: per-method accuracy and RStd
// matrices with deltas and a k_tau footer, a long-form cells.csv, rank-shift
// tables and a markdown summary; with_charts adds per-cell delta SVG bars.
// Returns 0, or 2 when any cell is failed/partial. Throws MissingBaseline if
// the manifest names a baseline that is not among its perturbations.
int write_reports(const std::filesystem::path& out_dir, bool with_charts = false);

// "model,score" rows, optional header line. Backs the standalone ktau
// comparison of two leaderboard files.
std::vector<std::pair<std::string, double>> read_leaderboard_csv(
    const std::filesystem::path& path);

}  // namespace mcqa
