#include "mcqa/prompt.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"

namespace mcqa {

using nlohmann::json;

const char* to_string(FewshotMode mode) {
    switch (mode) {
        case FewshotMode::Standard: return "standard";
        case FewshotMode::CorrectAnswerInjected: return "correct_answer_injected";
        case FewshotMode::IncorrectAnswerInjected: return "incorrect_answer_injected";
        case FewshotMode::TrivialExamples: return "trivial_examples";
        case FewshotMode::OutOfDomain: return "out_of_domain";
        case FewshotMode::FixedPosition: return "fixed_position";
    }
    return "?";
}

const char* to_string(QuestionMode mode) {
    return mode == QuestionMode::Matched ? "matched" : "unchanged";
}

FewshotMode fewshot_mode_from_string(const std::string& s) {
    for (FewshotMode mode :
         {FewshotMode::Standard, FewshotMode::CorrectAnswerInjected,
          FewshotMode::IncorrectAnswerInjected, FewshotMode::TrivialExamples,
          FewshotMode::OutOfDomain, FewshotMode::FixedPosition}) {
        if (s == to_string(mode)) return mode;
    }
    throw Error(ErrorKind::ConfigInvalid, "unknown fewshot mode '" + s + "'");
}

QuestionMode question_mode_from_string(const std::string& s) {
    if (s == "unchanged") return QuestionMode::Unchanged;
    if (s == "matched") return QuestionMode::Matched;
    throw Error(ErrorKind::ConfigInvalid, "unknown question mode '" + s + "'");
}

PromptOptions::PromptOptions() : symbol_set(default_symbols()) {}

json PromptOptions::to_json() const {
    json obj{{"include_subject", include_subject},
             {"answer_label", answer_label},
             {"k_shot", k_shot},
             {"fewshot_mode", to_string(fewshot_mode)},
             {"template_id", template_id}};
    if (fewshot_mode == FewshotMode::TrivialExamples) obj["trivial_version"] = trivial_version;
    if (fewshot_mode == FewshotMode::FixedPosition) {
        obj["fixed_target"] = fixed_target;
        obj["question_mode"] = to_string(question_mode);
    }
    if (symbol_set.name != "default") {
        if (symbol_set.name == "set1" || symbol_set.name == "set2") {
            obj["symbol_set"] = symbol_set.name;
        } else {
            obj["symbol_set"] = symbol_set.symbols;
        }
    }
    return obj;
}

PromptOptions PromptOptions::from_json(const json& obj) {
    PromptOptions options;
    if (obj.contains("include_subject")) options.include_subject = obj.at("include_subject");
    if (obj.contains("answer_label")) options.answer_label = obj.at("answer_label");
    if (obj.contains("k_shot")) options.k_shot = obj.at("k_shot");
    if (obj.contains("fewshot_mode")) {
        options.fewshot_mode = fewshot_mode_from_string(obj.at("fewshot_mode"));
    }
    if (obj.contains("trivial_version")) options.trivial_version = obj.at("trivial_version");
    if (obj.contains("fixed_target")) options.fixed_target = obj.at("fixed_target");
    if (obj.contains("question_mode")) {
        options.question_mode = question_mode_from_string(obj.at("question_mode"));
    }
    if (obj.contains("symbol_set")) {
        const json& sym = obj.at("symbol_set");
        if (sym.is_string()) {
            options.symbol_set = builtin_symbol_set(sym.get<std::string>());
        } else {
            options.symbol_set =
                ChoiceSymbolSet{"custom", sym.get<std::vector<std::string>>()};
        }
    }
    if (obj.contains("template_id")) options.template_id = obj.at("template_id");
    validate_prompt_options(options);
    return options;
}

void validate_prompt_options(const PromptOptions& options) {
    if (options.template_id != "base" && options.template_id != "bare") {
        throw Error(ErrorKind::TemplateUnknown, "template '" + options.template_id + "'");
    }
    if (options.answer_label != "Answer:" && options.answer_label != "Correct Answer:") {
        throw Error(ErrorKind::ConfigInvalid,
                    "answer_label must be \"Answer:\" or \"Correct Answer:\", got \"" +
                        options.answer_label + "\"");
    }
    if (options.k_shot < 0) {
        throw Error(ErrorKind::ConfigInvalid, "k_shot must be >= 0");
    }
    if (options.fewshot_mode != FewshotMode::Standard && options.k_shot < 1) {
        throw Error(ErrorKind::ConfigInvalid,
                    std::string("fewshot mode ") + to_string(options.fewshot_mode) +
                        " requires k_shot >= 1");
    }
    if (options.fewshot_mode == FewshotMode::TrivialExamples &&
        (options.trivial_version < 1 || options.trivial_version > 3)) {
        throw Error(ErrorKind::ConfigInvalid, "trivial_version must be 1, 2 or 3");
    }
    if (options.fewshot_mode == FewshotMode::FixedPosition) {
        if (options.fixed_target < 0 ||
            static_cast<std::size_t>(options.fixed_target) >= options.symbol_set.symbols.size()) {
            throw Error(ErrorKind::ConfigInvalid,
                        "fixed_target " + std::to_string(options.fixed_target) +
                            " outside symbol set of size " +
                            std::to_string(options.symbol_set.symbols.size()));
        }
    }
    if (options.symbol_set.symbols.empty()) {
        throw Error(ErrorKind::ConfigInvalid, "symbol set is empty");
    }
}

json RenderedQuery::to_json() const {
    return json{{"item", item_ref},
                {"method", method.label()},
                {"prompt", prompt},
                {"continuations", continuations},
                {"labels", labels},
                {"answer_cue", answer_cue},
                {"presented_answer_index", presented_answer_index},
                {"subject", subject}};
}

namespace {

// Super-domain grouping for the 57 MMLU subjects, after the reference
// categorization shipped with the benchmark.
const std::map<std::string, std::string>& domain_table() {
    static const std::map<std::string, std::string> table = {
        {"abstract_algebra", "STEM"},
        {"anatomy", "other"},
        {"astronomy", "STEM"},
        {"business_ethics", "other"},
        {"clinical_knowledge", "other"},
        {"college_biology", "STEM"},
        {"college_chemistry", "STEM"},
        {"college_computer_science", "STEM"},
        {"college_mathematics", "STEM"},
        {"college_medicine", "other"},
        {"college_physics", "STEM"},
        {"computer_security", "STEM"},
        {"conceptual_physics", "STEM"},
        {"econometrics", "social_sciences"},
        {"electrical_engineering", "STEM"},
        {"elementary_mathematics", "STEM"},
        {"formal_logic", "humanities"},
        {"global_facts", "other"},
        {"high_school_biology", "STEM"},
        {"high_school_chemistry", "STEM"},
        {"high_school_computer_science", "STEM"},
        {"high_school_european_history", "humanities"},
        {"high_school_geography", "social_sciences"},
        {"high_school_government_and_politics", "social_sciences"},
        {"high_school_macroeconomics", "social_sciences"},
        {"high_school_mathematics", "STEM"},
        {"high_school_microeconomics", "social_sciences"},
        {"high_school_physics", "STEM"},
        {"high_school_psychology", "social_sciences"},
        {"high_school_statistics", "STEM"},
        {"high_school_us_history", "humanities"},
        {"high_school_world_history", "humanities"},
        {"human_aging", "other"},
        {"human_sexuality", "social_sciences"},
        {"international_law", "humanities"},
        {"jurisprudence", "humanities"},
        {"logical_fallacies", "humanities"},
        {"machine_learning", "STEM"},
        {"management", "other"},
        {"marketing", "other"},
        {"medical_genetics", "other"},
        {"miscellaneous", "other"},
        {"moral_disputes", "humanities"},
        {"moral_scenarios", "humanities"},
        {"nutrition", "other"},
        {"philosophy", "humanities"},
        {"prehistory", "humanities"},
        {"professional_accounting", "other"},
        {"professional_law", "humanities"},
        {"professional_medicine", "other"},
        {"professional_psychology", "social_sciences"},
        {"public_relations", "social_sciences"},
        {"security_studies", "social_sciences"},
        {"sociology", "social_sciences"},
        {"us_foreign_policy", "social_sciences"},
        {"virology", "other"},
        {"world_religions", "humanities"},
    };
    return table;
}

std::string display_subject(const std::string& subject) {
    std::string out = subject;
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::string header_line(const PromptOptions& options, const std::string& subject) {
    if (options.include_subject) {
        return "The following are multiple choice questions (with answers) about " +
               display_subject(subject) + ".";
    }
    return "The following are multiple choice questions (with answers).";
}

// One question block, no trailing newline. `gold` < 0 renders the target
// form that stops at the answer cue.
std::string question_block(const McqItem& item, const std::vector<std::string>& labels,
                           const PromptOptions& options, const ScoringMethod& method,
                           int gold) {
    std::string block = item.stem;
    if (method.kind != ScoringMethodKind::Cloze) {
        for (std::size_t i = 0; i < item.choices.size(); ++i) {
            block += "\n" + labels[i] + ". " + item.choices[i];
        }
    }
    block += "\n" + options.answer_label;
    if (gold >= 0) {
        const std::size_t g = static_cast<std::size_t>(gold);
        block += " ";
        block += method.kind == ScoringMethodKind::Symbol ? labels[g] : item.choices[g];
    }
    return block;
}

bool fewshot_shares_subject(FewshotMode mode) {
    return mode == FewshotMode::Standard || mode == FewshotMode::CorrectAnswerInjected ||
           mode == FewshotMode::IncorrectAnswerInjected || mode == FewshotMode::FixedPosition;
}

std::vector<McqItem> standard_dev(const BenchmarkSet& set, const McqItem& item, int count,
                                  const char* what) {
    const std::vector<const McqItem*> dev = set.dev_for_subject(item.subject);
    if (static_cast<int>(dev.size()) < count) {
        throw Error(ErrorKind::EmptyDevPool,
                    std::string(what) + " needs " + std::to_string(count) +
                        " dev items for subject '" + item.subject + "', pool has " +
                        std::to_string(dev.size()));
    }
    std::vector<McqItem> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(*dev[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace

std::string mmlu_domain_group(const std::string& subject) {
    const auto& table = domain_table();
    const auto it = table.find(subject);
    return it == table.end() ? std::string{} : it->second;
}

std::string subject_stem(const std::string& subject) {
    for (const char* prefix : {"college_", "high_school_", "elementary_", "professional_"}) {
        const std::string p(prefix);
        if (subject.size() > p.size() && subject.compare(0, p.size(), p) == 0) {
            return subject.substr(p.size());
        }
    }
    return subject;
}

bool similar_subjects(const std::string& a, const std::string& b) {
    return subject_stem(a) == subject_stem(b);
}

std::vector<McqItem> build_fewshot(const BenchmarkSet& set, const McqItem& item,
                                   const PromptOptions& options, std::uint64_t seed,
                                   const std::vector<McqItem>* trivial_pool) {
    validate_prompt_options(options);
    const int k = options.k_shot;
    if (k == 0) return {};

    switch (options.fewshot_mode) {
        case FewshotMode::Standard:
            return standard_dev(set, item, k, "standard fewshot");

        case FewshotMode::CorrectAnswerInjected:
        case FewshotMode::IncorrectAnswerInjected: {
            std::vector<McqItem> out =
                k > 1 ? standard_dev(set, item, k - 1, "answer injection") : std::vector<McqItem>{};
            McqItem injected = item;
            if (options.fewshot_mode == FewshotMode::IncorrectAnswerInjected) {
                injected.answer_index = (item.answer_index + 1) % item.choice_count();
            }
            out.push_back(std::move(injected));
            return out;
        }

        case FewshotMode::TrivialExamples: {
            if (trivial_pool == nullptr || static_cast<int>(trivial_pool->size()) < k) {
                throw Error(ErrorKind::EmptyDevPool,
                            "trivial example pool v" + std::to_string(options.trivial_version) +
                                " has " +
                                std::to_string(trivial_pool ? trivial_pool->size() : 0) +
                                " items, need " + std::to_string(k));
            }
            return {trivial_pool->begin(), trivial_pool->begin() + k};
        }

        case FewshotMode::OutOfDomain: {
            const std::string group = mmlu_domain_group(item.subject);
            std::vector<const McqItem*> eligible;
            for (const McqItem& dev : set.dev_items) {
                if (dev.subject == item.subject) continue;
                if (similar_subjects(dev.subject, item.subject)) continue;
                const std::string dev_group = mmlu_domain_group(dev.subject);
                if (!group.empty() && dev_group == group) continue;
                eligible.push_back(&dev);
            }
            if (static_cast<int>(eligible.size()) < k) {
                throw Error(ErrorKind::DomainGroupExhausted,
                            "only " + std::to_string(eligible.size()) +
                                " out-of-domain dev items for subject '" + item.subject + "'");
            }
            // partial Fisher-Yates over the eligible pool, seeded per item
            Rng rng(mix_seed(seed, fnv1a64(item.id)));
            std::vector<McqItem> out;
            out.reserve(static_cast<std::size_t>(k));
            for (int i = 0; i < k; ++i) {
                const std::size_t j =
                    static_cast<std::size_t>(i) +
                    static_cast<std::size_t>(rng.below(eligible.size() - static_cast<std::size_t>(i)));
                std::swap(eligible[static_cast<std::size_t>(i)], eligible[j]);
                out.push_back(*eligible[static_cast<std::size_t>(i)]);
            }
            return out;
        }

        case FewshotMode::FixedPosition: {
            std::vector<McqItem> out = standard_dev(set, item, k, "fixed-position fewshot");
            for (McqItem& dev : out) {
                dev = fix_answer_position(dev, options.fixed_target);
            }
            return out;
        }
    }
    throw Error(ErrorKind::ConfigInvalid, "unhandled fewshot mode");
}

RenderedQuery render(const PresentedItem& target, const PromptOptions& options,
                     const ScoringMethod& method, const std::vector<McqItem>& fewshot) {
    validate_prompt_options(options);
    if (static_cast<int>(fewshot.size()) != options.k_shot) {
        throw Error(ErrorKind::FewshotCountMismatch,
                    "got " + std::to_string(fewshot.size()) + " fewshot items, options say " +
                        std::to_string(options.k_shot));
    }
    if (fewshot_shares_subject(options.fewshot_mode)) {
        for (const McqItem& f : fewshot) {
            if (f.subject != target.item.subject) {
                throw Error(ErrorKind::SubjectMismatch,
                            "fewshot item '" + f.id + "' has subject '" + f.subject +
                                "', target '" + target.item.id + "' has '" +
                                target.item.subject + "'");
            }
        }
    }

    std::vector<std::string> parts;
    if (options.template_id == "base") {
        parts.push_back(header_line(options, target.item.subject));
    }
    for (const McqItem& f : fewshot) {
        // cloze blocks print no labels, so small symbol sets stay usable
        const std::vector<std::string> labels =
            method.kind == ScoringMethodKind::Cloze ? std::vector<std::string>{}
                                                    : present(f, options.symbol_set).labels;
        parts.push_back(question_block(f, labels, options, method, f.answer_index));
    }
    parts.push_back(question_block(target.item, target.labels, options, method, -1));

    RenderedQuery query;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) query.prompt += "\n\n";
        query.prompt += parts[i];
    }
    for (std::size_t i = 0; i < target.item.choices.size(); ++i) {
        query.continuations.push_back(
            " " + (method.kind == ScoringMethodKind::Symbol ? target.labels[i]
                                                            : target.item.choices[i]));
    }
    query.method = method;
    query.item_ref = target.item.id;
    query.presented_answer_index = target.item.answer_index;
    query.labels = target.labels;
    query.answer_cue = options.answer_label;
    query.stem = target.item.stem;
    query.subject = target.item.subject;
    return query;
}

RenderedQuery render(const McqItem& item, const PromptOptions& options,
                     const ScoringMethod& method, const std::vector<McqItem>& fewshot) {
    return render(present(item, options.symbol_set), options, method, fewshot);
}

}  // namespace mcqa
