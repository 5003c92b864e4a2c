#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "mcqa/benchmark.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/scoring.hpp"
#include "mcqa/symbols.hpp"

namespace mcqa {

// How the few-shot block before the target question is put together.
enum class FewshotMode {
    Standard,                 // the subject's dev items, file order
    CorrectAnswerInjected,    // target appears as the last example with its gold answer
    IncorrectAnswerInjected,  // target appears as the last example with a wrong answer
    TrivialExamples,          // formatting-only examples from a shipped pool
    OutOfDomain,              // seeded dev sample from other domain groups
    FixedPosition,            // dev examples with gold moved to one position
};

// FixedPosition only: whether the target question's gold moves too.
enum class QuestionMode { Unchanged, Matched };

const char* to_string(FewshotMode mode);
const char* to_string(QuestionMode mode);
FewshotMode fewshot_mode_from_string(const std::string& s);
QuestionMode question_mode_from_string(const std::string& s);

struct PromptOptions {
    bool include_subject = true;
    std::string answer_label = "Answer:";  // or "Correct Answer:"
    int k_shot = 0;
    FewshotMode fewshot_mode = FewshotMode::Standard;
    int trivial_version = 1;                             // TrivialExamples only
    int fixed_target = 0;                                // FixedPosition only
    QuestionMode question_mode = QuestionMode::Unchanged;  // FixedPosition only
    ChoiceSymbolSet symbol_set;
    std::string template_id = "base";  // "base" has a header line, "bare" does not

    PromptOptions();
    nlohmann::json to_json() const;
    static PromptOptions from_json(const nlohmann::json& obj);
};

// Throws ConfigInvalid / TemplateUnknown on out-of-contract options.
void validate_prompt_options(const PromptOptions& options);

// A prompt ending at the answer cue plus the candidate continuations to score.
// For symbol scoring the continuations are " {label}"; for hybrid and cloze
// they are " {choice text}". Cloze prompts list no choices.
struct RenderedQuery {
    std::string prompt;
    std::vector<std::string> continuations;
    ScoringMethod method;
    std::string item_ref;
    int presented_answer_index = 0;
    std::vector<std::string> labels;  // displayed symbols for the target block
    std::string answer_cue;
    std::string stem;
    std::string subject;

    nlohmann::json to_json() const;
};

// Assembles the few-shot examples for one target item. `seed` drives the
// out-of-domain sample; `trivial_pool` backs TrivialExamples mode.
std::vector<McqItem> build_fewshot(const BenchmarkSet& set, const McqItem& item,
                                   const PromptOptions& options, std::uint64_t seed,
                                   const std::vector<McqItem>* trivial_pool = nullptr);

// Renders the already-presented target after `fewshot` examples. Few-shot
// examples use options.symbol_set labels; the target keeps the labels it was
// presented with.
RenderedQuery render(const PresentedItem& target, const PromptOptions& options,
                     const ScoringMethod& method, const std::vector<McqItem>& fewshot);

// Convenience: presents `item` with options.symbol_set first.
RenderedQuery render(const McqItem& item, const PromptOptions& options,
                     const ScoringMethod& method, const std::vector<McqItem>& fewshot);

// Super-domain group for an MMLU subject ("STEM", "humanities",
// "social_sciences", "other"); empty string when unknown.
std::string mmlu_domain_group(const std::string& subject);

// "college_mathematics" and "high_school_mathematics" share the stem
// "mathematics" and count as similar.
std::string subject_stem(const std::string& subject);
bool similar_subjects(const std::string& a, const std::string& b);

}  // namespace mcqa
