#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcqa/backend.hpp"
#include "mcqa/benchmark.hpp"
#include "mcqa/metrics.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/prompt.hpp"
#include "mcqa/scoring.hpp"

namespace mcqa {

// One item's scoring record. A backend failure leaves scored == false with
// the reason in error; the item is reported, never dropped.
struct ItemResult {
    std::string item_id;
    std::string method_label;
    int gold_position = 0;
    int chosen_position = -1;
    bool scored = false;
    bool tie = false;
    bool correct = false;
    std::vector<ContinuationScore> scores;
    bool via_fallback = false;
    bool from_cache = false;
    std::string error;

    nlohmann::json to_json() const;
    static ItemResult from_json(const nlohmann::json& obj);
};

// Scores one rendered query. Backend and selection errors are captured into
// an unscored result carrying the item id.
ItemResult score_item(const RenderedQuery& query, LogprobProvider& provider);

// Everything needed to evaluate one (perturbation, prompt, method) cell over
// a fixed item universe.
struct CellTask {
    const BenchmarkSet* set = nullptr;
    std::vector<const McqItem*> items;
    PerturbationSpec perturbation;
    PromptOptions options;
    ScoringMethod method;
    std::uint64_t seed = 0;
    const std::vector<McqItem>* trivial_pool = nullptr;
    bool allow_unsafe = false;
};

// Renders and scores every item in order. evaluate_parallel fans the items
// out with OpenMP and returns results identical to evaluate_serial, which is
// the reference implementation the tests compare against.
std::vector<ItemResult> evaluate_serial(const CellTask& task, LogprobProvider& provider);
std::vector<ItemResult> evaluate_parallel(const CellTask& task, LogprobProvider& provider);

// Per-item pipeline shared by both loops: perturb, build fewshot, render.
RenderedQuery render_task_item(const CellTask& task, const McqItem& item);

std::vector<ItemOutcome> outcomes_from_results(const std::vector<ItemResult>& results);

}  // namespace mcqa
