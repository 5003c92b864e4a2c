#include "mcqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"

namespace mcqa {

using nlohmann::json;

json EvalReport::to_json() const {
    json recalls = json::array();
    for (const auto& r : position_recalls) {
        if (r) {
            recalls.push_back(*r);
        } else {
            recalls.push_back(nullptr);
        }
    }
    json obj{{"model", model},
             {"n_items", n_items},
             {"n_scored", n_scored},
             {"n_correct", n_correct},
             {"accuracy", accuracy},
             {"position_recalls", recalls},
             {"unscored", unscored},
             {"tie_count", tie_count},
             {"universe_hash", universe_hash}};
    if (rstd_pp) obj["rstd_pp"] = *rstd_pp;
    return obj;
}

EvalReport EvalReport::from_json(const json& obj) {
    EvalReport report;
    report.model = obj.at("model").get<std::string>();
    report.n_items = obj.at("n_items").get<int>();
    report.n_scored = obj.at("n_scored").get<int>();
    report.n_correct = obj.at("n_correct").get<int>();
    report.accuracy = obj.at("accuracy").get<double>();
    for (const json& r : obj.at("position_recalls")) {
        if (r.is_null()) {
            report.position_recalls.push_back(std::nullopt);
        } else {
            report.position_recalls.push_back(r.get<double>());
        }
    }
    report.unscored = obj.at("unscored").get<int>();
    report.tie_count = obj.at("tie_count").get<int>();
    report.universe_hash = obj.at("universe_hash").get<std::uint64_t>();
    if (obj.contains("rstd_pp")) report.rstd_pp = obj.at("rstd_pp").get<double>();
    return report;
}

std::vector<std::optional<double>> position_recalls(const std::vector<ItemOutcome>& outcomes,
                                                    int positions) {
    std::vector<int> total(static_cast<std::size_t>(positions), 0);
    std::vector<int> correct(static_cast<std::size_t>(positions), 0);
    for (const ItemOutcome& o : outcomes) {
        if (!o.scored) continue;
        if (o.gold_position < 0 || o.gold_position >= positions) continue;
        const auto p = static_cast<std::size_t>(o.gold_position);
        ++total[p];
        if (o.correct()) ++correct[p];
    }
    std::vector<std::optional<double>> recalls(static_cast<std::size_t>(positions));
    for (std::size_t p = 0; p < recalls.size(); ++p) {
        if (total[p] > 0) {
            recalls[p] = static_cast<double>(correct[p]) / static_cast<double>(total[p]);
        }
    }
    return recalls;
}

double rstd(const std::vector<std::optional<double>>& recalls) {
    std::vector<double> defined;
    for (const auto& r : recalls) {
        if (r) defined.push_back(*r * 100.0);
    }
    if (defined.size() < 2) {
        throw Error(ErrorKind::InsufficientPositions,
                    std::to_string(defined.size()) + " defined recall positions, need >= 2");
    }
    double mean = 0.0;
    for (double v : defined) mean += v;
    mean /= static_cast<double>(defined.size());
    double variance = 0.0;
    for (double v : defined) variance += (v - mean) * (v - mean);
    variance /= static_cast<double>(defined.size());  // population, all positions present
    return std::sqrt(variance);
}

std::uint64_t universe_fingerprint(const std::vector<ItemOutcome>& outcomes) {
    // XOR of per-id hashes: order-independent, id multiset sensitive
    std::uint64_t fp = 0;
    for (const ItemOutcome& o : outcomes) {
        fp ^= mix_seed(fnv1a64(o.item_id), 0x5851f42d4c957f2dULL);
    }
    return fp;
}

EvalReport build_report(const std::string& model, const std::vector<ItemOutcome>& outcomes,
                        int positions) {
    EvalReport report;
    report.model = model;
    report.n_items = static_cast<int>(outcomes.size());
    for (const ItemOutcome& o : outcomes) {
        if (!o.scored) {
            ++report.unscored;
            continue;
        }
        ++report.n_scored;
        if (o.correct()) ++report.n_correct;
        if (o.tie) ++report.tie_count;
    }
    report.accuracy = report.n_scored > 0
                          ? static_cast<double>(report.n_correct) / report.n_scored
                          : 0.0;
    report.position_recalls = position_recalls(outcomes, positions);
    int defined = 0;
    for (const auto& r : report.position_recalls) {
        if (r) ++defined;
    }
    if (defined >= 2) report.rstd_pp = rstd(report.position_recalls);
    report.universe_hash = universe_fingerprint(outcomes);
    return report;
}

namespace {

bool rank_less(const RankEntry& a, const RankEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.model < b.model;
}

// counts inversions with a merge sort; the O(n^2) scan lives in the tests
std::uint64_t count_inversions(std::vector<int>& values, std::vector<int>& scratch,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t count = count_inversions(values, scratch, lo, mid) +
                          count_inversions(values, scratch, mid, hi);
    std::size_t a = lo;
    std::size_t b = mid;
    for (std::size_t out = lo; out < hi; ++out) {
        if (a < mid && (b >= hi || values[a] <= values[b])) {
            scratch[out] = values[a++];
        } else {
            count += mid - a;
            scratch[out] = values[b++];
        }
    }
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
              scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              values.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

}  // namespace

int RankingTable::rank_of(const std::string& model) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].model == model) return static_cast<int>(i) + 1;
    }
    return -1;
}

RankingTable rank_by_score(const std::vector<std::pair<std::string, double>>& scores) {
    RankingTable table;
    table.entries.reserve(scores.size());
    for (const auto& [model, score] : scores) {
        table.entries.push_back(RankEntry{model, score, false});
    }
    std::sort(table.entries.begin(), table.entries.end(), rank_less);
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        const bool tied_prev = i > 0 && table.entries[i - 1].score == table.entries[i].score;
        const bool tied_next =
            i + 1 < table.entries.size() && table.entries[i + 1].score == table.entries[i].score;
        table.entries[i].tied = tied_prev || tied_next;
    }
    return table;
}

RankingTable rank_models(const std::vector<EvalReport>& reports) {
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(reports.size());
    for (const EvalReport& r : reports) {
        scores.emplace_back(r.model, r.accuracy);
    }
    return rank_by_score(scores);
}

double kendall_k_tau(const RankingTable& reference, const RankingTable& other) {
    const std::size_t n = reference.entries.size();
    if (n < 2) {
        throw Error(ErrorKind::ModelSetMismatch,
                    "need >= 2 models to compare rankings, got " + std::to_string(n));
    }
    if (other.entries.size() != n) {
        throw Error(ErrorKind::ModelSetMismatch,
                    "rankings cover " + std::to_string(n) + " vs " +
                        std::to_string(other.entries.size()) + " models");
    }
    std::map<std::string, int> ref_rank;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ref_rank.emplace(reference.entries[i].model, static_cast<int>(i)).second) {
            throw Error(ErrorKind::ModelSetMismatch,
                        "duplicate model '" + reference.entries[i].model + "' in ranking");
        }
    }
    std::vector<int> sequence;
    sequence.reserve(n);
    for (const RankEntry& e : other.entries) {
        const auto it = ref_rank.find(e.model);
        if (it == ref_rank.end()) {
            throw Error(ErrorKind::ModelSetMismatch, "model '" + e.model + "' only in one ranking");
        }
        sequence.push_back(it->second);
    }
    if (sequence.size() != ref_rank.size()) {
        throw Error(ErrorKind::ModelSetMismatch, "duplicate models in second ranking");
    }

    std::vector<int> scratch(sequence.size());
    const std::uint64_t discordant = count_inversions(sequence, scratch, 0, sequence.size());
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return 1.0 - static_cast<double>(discordant) / pairs;
}

DeltaReport delta_report(const EvalReport& baseline, const EvalReport& perturbed) {
    if (baseline.model != perturbed.model) {
        throw Error(ErrorKind::UniverseMismatch,
                    "models differ: '" + baseline.model + "' vs '" + perturbed.model + "'");
    }
    if (baseline.universe_hash != perturbed.universe_hash) {
        throw Error(ErrorKind::UniverseMismatch,
                    "item universes differ for model '" + baseline.model + "'");
    }
    DeltaReport delta;
    delta.delta_acc_pp = (perturbed.accuracy - baseline.accuracy) * 100.0;
    if (baseline.rstd_pp && perturbed.rstd_pp) {
        delta.delta_rstd_pp = *perturbed.rstd_pp - *baseline.rstd_pp;
    }
    return delta;
}

std::vector<RankShift> rank_shift(const RankingTable& reference, const RankingTable& other) {
    std::vector<RankShift> shifts;
    shifts.reserve(reference.entries.size());
    for (std::size_t i = 0; i < reference.entries.size(); ++i) {
        const std::string& model = reference.entries[i].model;
        const int new_rank = other.rank_of(model);
        if (new_rank < 0) {
            throw Error(ErrorKind::ModelSetMismatch, "model '" + model + "' only in one ranking");
        }
        shifts.push_back(RankShift{model, static_cast<int>(i) + 1, new_rank});
    }
    if (other.entries.size() != reference.entries.size()) {
        throw Error(ErrorKind::ModelSetMismatch, "rankings cover different model counts");
    }
    return shifts;
}

}  // namespace mcqa
