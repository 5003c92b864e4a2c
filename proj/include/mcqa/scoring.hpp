#pragma once

#include <string>
#include <vector>

namespace mcqa {

// How a model's continuation log-probabilities turn into a chosen answer.
//
//   symbol  argmax of the summed logprob of the label symbol continuation
//   hybrid  argmax of length-normalized logprob of the choice text,
//           with all choices listed in the prompt
//   cloze   argmax of length-normalized logprob of the choice text,
//           with no choice list in the prompt
enum class ScoringMethodKind { Symbol, Hybrid, Cloze };

// Length normalizer for hybrid/cloze. Symbol scoring ignores it.
enum class Normalization { TokenCount, ByteLength };

const char* to_string(ScoringMethodKind kind);
const char* to_string(Normalization norm);
ScoringMethodKind scoring_method_kind_from_string(const std::string& s);
Normalization normalization_from_string(const std::string& s);

struct ScoringMethod {
    ScoringMethodKind kind = ScoringMethodKind::Symbol;
    Normalization normalization = Normalization::TokenCount;

    // "symbol", "hybrid/token_count", "cloze/byte_length", ...
    std::string label() const;
};

ScoringMethod scoring_method_from_label(const std::string& label);

// One continuation's score as reported by a backend. logprob_sum is a
// natural-log sum; synthetic backends may emit positive values.
struct ContinuationScore {
    int continuation_index = 0;
    double logprob_sum = 0.0;
    int token_count = 1;
    int byte_length = 1;
};

struct SelectResult {
    int chosen = 0;
    bool tie = false;  // the maximum was attained by more than one index
};

// Argmax per the method's rule. Ties go to the lowest index and are flagged.
// Throws EmptyScores on an empty list, NonPositiveNormalizer when a
// hybrid/cloze normalizer is < 1.
SelectResult select_answer(const std::vector<ContinuationScore>& scores,
                           const ScoringMethod& method);

}  // namespace mcqa
