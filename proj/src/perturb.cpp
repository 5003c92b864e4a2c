#include "mcqa/perturb.hpp"

#include <algorithm>

#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"

namespace mcqa {

using nlohmann::json;

const char* to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::Identity: return "identity";
        case PerturbationKind::FixedSwaps: return "fixed_swaps";
        case PerturbationKind::DerangementShuffle: return "derangement_shuffle";
        case PerturbationKind::FixAnswerPosition: return "fix_answer_position";
        case PerturbationKind::ReplaceSymbols: return "replace_symbols";
        case PerturbationKind::ShuffleSymbolsOnly: return "shuffle_symbols_only";
        case PerturbationKind::ShuffleContentOnly: return "shuffle_content_only";
        case PerturbationKind::ShuffleFullOptions: return "shuffle_full_options";
    }
    return "?";
}

PerturbationKind perturbation_kind_from_string(const std::string& s) {
    for (PerturbationKind kind :
         {PerturbationKind::Identity, PerturbationKind::FixedSwaps,
          PerturbationKind::DerangementShuffle, PerturbationKind::FixAnswerPosition,
          PerturbationKind::ReplaceSymbols, PerturbationKind::ShuffleSymbolsOnly,
          PerturbationKind::ShuffleContentOnly, PerturbationKind::ShuffleFullOptions}) {
        if (s == to_string(kind)) return kind;
    }
    throw Error(ErrorKind::ConfigInvalid, "unknown perturbation kind '" + s + "'");
}

bool PerturbationSpec::reorders_content() const {
    switch (kind) {
        case PerturbationKind::FixedSwaps:
        case PerturbationKind::DerangementShuffle:
        case PerturbationKind::FixAnswerPosition:
        case PerturbationKind::ShuffleContentOnly:
        case PerturbationKind::ShuffleFullOptions:
            return true;
        default:
            return false;
    }
}

bool PerturbationSpec::safe_on_unsafe_items() const {
    return kind == PerturbationKind::Identity || kind == PerturbationKind::ReplaceSymbols;
}

json PerturbationSpec::to_json() const {
    json obj{{"kind", to_string(kind)}};
    switch (kind) {
        case PerturbationKind::FixedSwaps:
            obj["swaps"] = swaps;
            break;
        case PerturbationKind::FixAnswerPosition:
            obj["target"] = target;
            break;
        default:
            break;
    }
    if (kind != PerturbationKind::Identity && kind != PerturbationKind::FixedSwaps &&
        kind != PerturbationKind::FixAnswerPosition) {
        obj["seed"] = seed;
    }
    if (symbols.name != "default") {
        if (symbols.name == "set1" || symbols.name == "set2") {
            obj["symbols"] = symbols.name;
        } else {
            obj["symbols"] = symbols.symbols;
        }
    }
    return obj;
}

PerturbationSpec PerturbationSpec::from_json(const json& obj) {
    PerturbationSpec spec;
    if (!obj.is_object() || !obj.contains("kind")) {
        throw Error(ErrorKind::ConfigInvalid, "perturbation needs a \"kind\" field");
    }
    spec.kind = perturbation_kind_from_string(obj.at("kind").get<std::string>());
    if (obj.contains("swaps")) spec.swaps = obj.at("swaps").get<std::vector<int>>();
    if (obj.contains("target")) spec.target = obj.at("target").get<int>();
    if (obj.contains("seed")) spec.seed = obj.at("seed").get<std::uint64_t>();
    if (obj.contains("symbols")) {
        const json& sym = obj.at("symbols");
        if (sym.is_string()) {
            spec.symbols = builtin_symbol_set(sym.get<std::string>());
        } else {
            spec.symbols =
                ChoiceSymbolSet{"custom", sym.get<std::vector<std::string>>()};
        }
    }
    if (spec.kind == PerturbationKind::FixedSwaps && spec.swaps.empty()) {
        throw Error(ErrorKind::InvalidSwapSet, "fixed_swaps requires a \"swaps\" permutation");
    }
    return spec;
}

PresentedItem present(const McqItem& item, const ChoiceSymbolSet& symbols) {
    if (!symbols.valid_for(item.choices.size())) {
        throw Error(ErrorKind::SymbolSetTooSmall,
                    "symbol set '" + symbols.name + "' has " +
                        std::to_string(symbols.symbols.size()) + " symbols, item '" + item.id +
                        "' has " + std::to_string(item.choices.size()) + " choices");
    }
    PresentedItem out;
    out.item = item;
    out.labels.assign(symbols.symbols.begin(),
                      symbols.symbols.begin() + item.choice_count());
    return out;
}

std::vector<int> derangement(std::uint64_t seed, int k) {
    if (k < 2) {
        throw Error(ErrorKind::ImpossibleDerangement,
                    "no derangement exists for k=" + std::to_string(k));
    }
    Rng rng(seed);
    for (;;) {
        std::vector<int> perm = random_permutation(rng, k);
        bool fixed_point = false;
        for (int i = 0; i < k; ++i) {
            if (perm[static_cast<std::size_t>(i)] == i) {
                fixed_point = true;
                break;
            }
        }
        if (!fixed_point) return perm;
    }
}

namespace {

void validate_swap_set(const std::vector<int>& swaps, int k) {
    if (static_cast<int>(swaps.size()) != k) {
        throw Error(ErrorKind::InvalidSwapSet,
                    "swap set has " + std::to_string(swaps.size()) + " entries for " +
                        std::to_string(k) + " choices");
    }
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int v : swaps) {
        if (v < 0 || v >= k || seen[static_cast<std::size_t>(v)]) {
            throw Error(ErrorKind::InvalidSwapSet, "swap set is not a permutation of 0.." +
                                                       std::to_string(k - 1));
        }
        seen[static_cast<std::size_t>(v)] = true;
    }
}

// new_choices[i] = old_choices[perm[i]]
McqItem gather_content(const McqItem& item, const std::vector<int>& perm) {
    McqItem out = item;
    for (int i = 0; i < item.choice_count(); ++i) {
        const int old_pos = perm[static_cast<std::size_t>(i)];
        out.choices[static_cast<std::size_t>(i)] =
            item.choices[static_cast<std::size_t>(old_pos)];
        if (old_pos == item.answer_index) out.answer_index = i;
    }
    return out;
}

std::vector<int> invert(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
    }
    return inv;
}

// gather permutation implementing the displacement rule: pull the gold choice
// out, insert it at `target`, keep everything else in relative order
std::vector<int> fix_position_perm(int answer_index, int target, int k) {
    std::vector<int> perm;
    perm.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        if (i != answer_index) perm.push_back(i);
    }
    perm.insert(perm.begin() + target, answer_index);
    return perm;
}

}  // namespace

McqItem fix_answer_position(const McqItem& item, int target) {
    const int k = item.choice_count();
    if (target < 0 || target >= k) {
        throw Error(ErrorKind::InvalidSwapSet,
                    "target position " + std::to_string(target) + " with " + std::to_string(k) +
                        " choices");
    }
    if (item.answer_index == target) return item;
    return gather_content(item, fix_position_perm(item.answer_index, target, k));
}

PerturbResult apply_perturbation(const McqItem& item, const PerturbationSpec& spec,
                                 bool allow_unsafe) {
    if (!item.permutation_safe && !spec.safe_on_unsafe_items() && !allow_unsafe) {
        throw Error(ErrorKind::UnsafePermutation,
                    "item '" + item.id + "' cross-references choice positions; pass the unsafe "
                                         "override to permute it anyway");
    }

    const int k = item.choice_count();
    const std::uint64_t item_seed = mix_seed(spec.seed, fnv1a64(item.id));
    Rng rng(item_seed);

    PerturbResult result;
    result.position_map = identity_permutation(k);

    switch (spec.kind) {
        case PerturbationKind::Identity: {
            result.presented = present(item, spec.symbols);
            break;
        }
        case PerturbationKind::FixedSwaps: {
            validate_swap_set(spec.swaps, k);
            result.presented = present(gather_content(item, spec.swaps), spec.symbols);
            result.position_map = invert(spec.swaps);
            break;
        }
        case PerturbationKind::DerangementShuffle: {
            const std::vector<int> perm = derangement(item_seed, k);
            result.presented = present(gather_content(item, perm), spec.symbols);
            result.position_map = invert(perm);
            break;
        }
        case PerturbationKind::FixAnswerPosition: {
            if (spec.target >= k) {
                throw Error(ErrorKind::InvalidSwapSet,
                            "target " + std::to_string(spec.target) + " with " +
                                std::to_string(k) + " choices on item '" + item.id + "'");
            }
            const std::vector<int> perm = fix_position_perm(item.answer_index, spec.target, k);
            result.presented = present(gather_content(item, perm), spec.symbols);
            result.position_map = invert(perm);
            break;
        }
        case PerturbationKind::ReplaceSymbols: {
            result.presented = present(item, spec.symbols);
            break;
        }
        case PerturbationKind::ShuffleSymbolsOnly: {
            result.presented = present(item, spec.symbols);
            const std::vector<int> perm = random_permutation(rng, k);
            for (int i = 0; i < k; ++i) {
                result.presented.labels[static_cast<std::size_t>(i)] =
                    spec.symbols.symbols[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
            }
            break;
        }
        case PerturbationKind::ShuffleContentOnly: {
            const std::vector<int> perm = random_permutation(rng, k);
            result.presented = present(gather_content(item, perm), spec.symbols);
            result.position_map = invert(perm);
            break;
        }
        case PerturbationKind::ShuffleFullOptions: {
            const std::vector<int> perm = random_permutation(rng, k);
            result.presented = present(gather_content(item, perm), spec.symbols);
            // labels travel with their content
            for (int i = 0; i < k; ++i) {
                result.presented.labels[static_cast<std::size_t>(i)] =
                    spec.symbols.symbols[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
            }
            result.position_map = invert(perm);
            break;
        }
    }
    return result;
}

}  // namespace mcqa
