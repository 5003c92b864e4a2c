#include "mcqa/scoring.hpp"

#include "mcqa/error.hpp"

namespace mcqa {

const char* to_string(ScoringMethodKind kind) {
    switch (kind) {
        case ScoringMethodKind::Symbol: return "symbol";
        case ScoringMethodKind::Hybrid: return "hybrid";
        case ScoringMethodKind::Cloze: return "cloze";
    }
    return "?";
}

const char* to_string(Normalization norm) {
    return norm == Normalization::ByteLength ? "byte_length" : "token_count";
}

ScoringMethodKind scoring_method_kind_from_string(const std::string& s) {
    if (s == "symbol") return ScoringMethodKind::Symbol;
    if (s == "hybrid") return ScoringMethodKind::Hybrid;
    if (s == "cloze") return ScoringMethodKind::Cloze;
    throw Error(ErrorKind::ConfigInvalid, "unknown scoring method '" + s + "'");
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "token_count") return Normalization::TokenCount;
    if (s == "byte_length") return Normalization::ByteLength;
    throw Error(ErrorKind::ConfigInvalid, "unknown normalization '" + s + "'");
}

std::string ScoringMethod::label() const {
    if (kind == ScoringMethodKind::Symbol) return "symbol";
    return std::string(to_string(kind)) + "/" + to_string(normalization);
}

ScoringMethod scoring_method_from_label(const std::string& label) {
    ScoringMethod method;
    const auto slash = label.find('/');
    if (slash == std::string::npos) {
        method.kind = scoring_method_kind_from_string(label);
    } else {
        method.kind = scoring_method_kind_from_string(label.substr(0, slash));
        method.normalization = normalization_from_string(label.substr(slash + 1));
    }
    return method;
}

SelectResult select_answer(const std::vector<ContinuationScore>& scores,
                           const ScoringMethod& method) {
    if (scores.empty()) {
        throw Error(ErrorKind::EmptyScores, "select_answer called with no scores");
    }
    auto key = [&](const ContinuationScore& s) {
        if (method.kind == ScoringMethodKind::Symbol) return s.logprob_sum;
        const int norm = method.normalization == Normalization::ByteLength ? s.byte_length
                                                                           : s.token_count;
        if (norm <= 0) {
            throw Error(ErrorKind::NonPositiveNormalizer,
                        std::string(to_string(method.normalization)) + " = " +
                            std::to_string(norm) + " for continuation " +
                            std::to_string(s.continuation_index));
        }
        return s.logprob_sum / static_cast<double>(norm);
    };

    SelectResult result;
    double best = key(scores[0]);
    for (std::size_t i = 1; i < scores.size(); ++i) {
        const double k = key(scores[i]);
        if (k > best) {
            best = k;
            result.chosen = static_cast<int>(i);
            result.tie = false;
        } else if (k == best) {
            result.tie = true;
        }
    }
    return result;
}

}  // namespace mcqa
