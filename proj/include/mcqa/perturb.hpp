#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcqa/benchmark.hpp"
#include "mcqa/symbols.hpp"

namespace mcqa {

enum class PerturbationKind {
    Identity,
    FixedSwaps,
    DerangementShuffle,
    FixAnswerPosition,
    ReplaceSymbols,
    ShuffleSymbolsOnly,
    ShuffleContentOnly,
    ShuffleFullOptions,
};

const char* to_string(PerturbationKind kind);
PerturbationKind perturbation_kind_from_string(const std::string& s);

// Declarative description of one transformation. Serializes to the JSON object
// embedded in experiment configs; kind/param names are the stable contract.
//
// All content permutations are written in gather form: perm[new_pos] = old_pos.
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::Identity;
    std::vector<int> swaps;                   // fixed_swaps
    int target = 0;                           // fix_answer_position
    ChoiceSymbolSet symbols = default_symbols();
    std::uint64_t seed = 0;

    // Kinds that move choice content between positions.
    bool reorders_content() const;
    // Kinds valid on permutation-unsafe items without an override.
    bool safe_on_unsafe_items() const;

    nlohmann::json to_json() const;
    static PerturbationSpec from_json(const nlohmann::json& obj);
};

// An item as shown to a model: content order plus the display symbol attached
// to each position.
struct PresentedItem {
    McqItem item;
    std::vector<std::string> labels;
};

// Identity presentation with the given symbol set.
PresentedItem present(const McqItem& item, const ChoiceSymbolSet& symbols);

struct PerturbResult {
    PresentedItem presented;
    std::vector<int> position_map;  // old content index -> new content index
};

// Deterministic in (item.id, spec.seed): per-item randomness derives from
// hash(seed, id), so subsetting a benchmark never changes an item's draw.
PerturbResult apply_perturbation(const McqItem& item, const PerturbationSpec& spec,
                                 bool allow_unsafe = false);

// Fixed-point-free permutation of {0..k-1}, uniform over derangements
// (rejection sampling; expected < e draws).
std::vector<int> derangement(std::uint64_t seed, int k);

// Moves the gold choice to `target`; all other choices keep their relative
// order. Idempotent.
McqItem fix_answer_position(const McqItem& item, int target);

}  // namespace mcqa
