#include "mcqa/eval.hpp"

#include <exception>

#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"

namespace mcqa {

using nlohmann::json;

json ItemResult::to_json() const {
    json obj{{"item", item_id},
             {"method", method_label},
             {"gold", gold_position},
             {"chosen", chosen_position},
             {"correct", correct},
             {"tie", tie}};
    if (scored) {
        json scores_json = json::array();
        for (const ContinuationScore& s : scores) {
            scores_json.push_back(json{{"logprob_sum", s.logprob_sum},
                                       {"token_count", s.token_count},
                                       {"byte_length", s.byte_length}});
        }
        obj["scores"] = std::move(scores_json);
        if (via_fallback) obj["fallback"] = true;
        if (from_cache) obj["cached"] = true;
    } else {
        obj["error"] = error;
    }
    return obj;
}

ItemResult ItemResult::from_json(const json& obj) {
    ItemResult result;
    result.item_id = obj.at("item").get<std::string>();
    result.method_label = obj.at("method").get<std::string>();
    result.gold_position = obj.at("gold").get<int>();
    result.chosen_position = obj.at("chosen").get<int>();
    result.correct = obj.at("correct").get<bool>();
    result.tie = obj.at("tie").get<bool>();
    if (obj.contains("error")) {
        result.scored = false;
        result.error = obj.at("error").get<std::string>();
    } else {
        result.scored = true;
        int index = 0;
        for (const json& s : obj.at("scores")) {
            ContinuationScore score;
            score.continuation_index = index++;
            score.logprob_sum = s.at("logprob_sum").get<double>();
            score.token_count = s.at("token_count").get<int>();
            score.byte_length = s.at("byte_length").get<int>();
            result.scores.push_back(score);
        }
        result.via_fallback = obj.value("fallback", false);
        result.from_cache = obj.value("cached", false);
    }
    return result;
}

ItemResult score_item(const RenderedQuery& query, LogprobProvider& provider) {
    ItemResult result;
    result.item_id = query.item_ref;
    result.method_label = query.method.label();
    result.gold_position = query.presented_answer_index;
    try {
        const ScoreResponse response = provider.score_batch(ScoreRequest::from_query(query));
        if (response.scores.size() != query.continuations.size()) {
            throw Error(ErrorKind::Transport,
                        "backend returned " + std::to_string(response.scores.size()) +
                            " scores for " + std::to_string(query.continuations.size()) +
                            " continuations on item " + query.item_ref);
        }
        const SelectResult selection = select_answer(response.scores, query.method);
        result.scored = true;
        result.chosen_position = selection.chosen;
        result.tie = selection.tie;
        result.correct = selection.chosen == query.presented_answer_index;
        result.scores = response.scores;
        result.via_fallback = response.via_fallback;
        result.from_cache = response.from_cache;
    } catch (const std::exception& e) {
        result.scored = false;
        result.chosen_position = -1;
        result.error = e.what();
    }
    return result;
}

RenderedQuery render_task_item(const CellTask& task, const McqItem& item) {
    // the perturbation's symbol set is the cell's presentation set, so
    // fewshot examples carry the same labels as the target
    PerturbationSpec spec = task.perturbation;
    spec.seed = mix_seed(task.seed, spec.seed);
    PromptOptions options = task.options;
    options.symbol_set = spec.symbols;

    PerturbResult perturbed = apply_perturbation(item, spec, task.allow_unsafe);
    if (options.fewshot_mode == FewshotMode::FixedPosition &&
        options.question_mode == QuestionMode::Matched) {
        // the matched arm moves the target's gold to the probed position too
        perturbed.presented.item =
            fix_answer_position(perturbed.presented.item, options.fixed_target);
    }
    const std::vector<McqItem> fewshot =
        build_fewshot(*task.set, item, options, task.seed, task.trivial_pool);
    return render(perturbed.presented, options, task.method, fewshot);
}

namespace {

ItemResult evaluate_one(const CellTask& task, const McqItem& item, LogprobProvider& provider) {
    try {
        return score_item(render_task_item(task, item), provider);
    } catch (const std::exception& e) {
        // rendering failures also land as unscored results
        ItemResult result;
        result.item_id = item.id;
        result.method_label = task.method.label();
        result.gold_position = item.answer_index;
        result.error = e.what();
        return result;
    }
}

}  // namespace

std::vector<ItemResult> evaluate_serial(const CellTask& task, LogprobProvider& provider) {
    std::vector<ItemResult> results;
    results.reserve(task.items.size());
    for (const McqItem* item : task.items) {
        results.push_back(evaluate_one(task, *item, provider));
    }
    return results;
}

std::vector<ItemResult> evaluate_parallel(const CellTask& task, LogprobProvider& provider) {
    std::vector<ItemResult> results(task.items.size());
    std::exception_ptr failure = nullptr;
    const auto n = static_cast<std::ptrdiff_t>(task.items.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            results[static_cast<std::size_t>(i)] =
                evaluate_one(task, *task.items[static_cast<std::size_t>(i)], provider);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

std::vector<ItemOutcome> outcomes_from_results(const std::vector<ItemResult>& results) {
    std::vector<ItemOutcome> outcomes;
    outcomes.reserve(results.size());
    for (const ItemResult& r : results) {
        ItemOutcome outcome;
        outcome.item_id = r.item_id;
        outcome.gold_position = r.gold_position;
        outcome.chosen_position = r.chosen_position;
        outcome.scored = r.scored;
        outcome.tie = r.tie;
        outcomes.push_back(outcome);
    }
    return outcomes;
}

}  // namespace mcqa
