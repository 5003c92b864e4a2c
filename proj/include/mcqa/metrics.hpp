#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mcqa {

// Minimal per-item record the metrics need. gold/chosen are presented
// (post-perturbation) positions.
struct ItemOutcome {
    std::string item_id;
    int gold_position = 0;
    int chosen_position = -1;
    bool scored = false;
    bool tie = false;

    bool correct() const { return scored && chosen_position == gold_position; }
};

// Per-model evaluation summary for one experiment cell. accuracy is a
// fraction over scored items; recalls and rstd are computed over scored items
// only, with unscored counted separately.
struct EvalReport {
    std::string model;
    int n_items = 0;
    int n_scored = 0;
    int n_correct = 0;
    double accuracy = 0.0;
    std::vector<std::optional<double>> position_recalls;
    std::optional<double> rstd_pp;
    int unscored = 0;
    int tie_count = 0;
    std::uint64_t universe_hash = 0;  // order-independent hash of scored item ids

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& obj);
};

// recall[p] = correct / items among scored outcomes with gold at p, for
// p in [0, positions); std::nullopt where no gold landed.
std::vector<std::optional<double>> position_recalls(const std::vector<ItemOutcome>& outcomes,
                                                    int positions);

// Population standard deviation of the defined recalls, in percentage
// points. Throws InsufficientPositions when fewer than 2 are defined.
double rstd(const std::vector<std::optional<double>>& recalls);

EvalReport build_report(const std::string& model, const std::vector<ItemOutcome>& outcomes,
                        int positions);

struct RankEntry {
    std::string model;
    double score = 0.0;
    bool tied = false;  // equal score with a neighbor, broken by name order
};

// Strictly ordered after the tie policy (descending score, then name).
struct RankingTable {
    std::vector<RankEntry> entries;

    int rank_of(const std::string& model) const;  // 1-based, -1 when absent
};

// Descending by score; equal scores ordered by model name and flagged.
RankingTable rank_models(const std::vector<EvalReport>& reports);
RankingTable rank_by_score(const std::vector<std::pair<std::string, double>>& scores);

// Agreement in [0, 1]: 1 - discordant_pairs / (n(n-1)/2). Identical orders
// give 1.0, exact reversal 0.0. Symmetric. Throws ModelSetMismatch unless
// both tables hold the same >= 2 models.
double kendall_k_tau(const RankingTable& reference, const RankingTable& other);

struct DeltaReport {
    double delta_acc_pp = 0.0;
    std::optional<double> delta_rstd_pp;
};

// Perturbed minus baseline, in percentage points. Throws UniverseMismatch
// when the reports cover different models or item sets.
DeltaReport delta_report(const EvalReport& baseline, const EvalReport& perturbed);

struct RankShift {
    std::string model;
    int old_rank = 0;  // 1-based
    int new_rank = 0;

    int delta() const { return new_rank - old_rank; }  // positive = dropped
};

// Per-model movement between two tables over the same model set, listed in
// reference order.
std::vector<RankShift> rank_shift(const RankingTable& reference, const RankingTable& other);

// Order-independent FNV combination of item ids, for universe checks.
std::uint64_t universe_fingerprint(const std::vector<ItemOutcome>& outcomes);

}  // namespace mcqa
