#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"
#include "mcqa/scoring.hpp"

using namespace mcqa;

namespace {

std::vector<ContinuationScore> make_scores(const std::vector<double>& sums,
                                           const std::vector<int>& tokens = {},
                                           const std::vector<int>& bytes = {}) {
    std::vector<ContinuationScore> scores;
    for (std::size_t i = 0; i < sums.size(); ++i) {
        ContinuationScore s;
        s.continuation_index = static_cast<int>(i);
        s.logprob_sum = sums[i];
        s.token_count = tokens.empty() ? 1 : tokens[i];
        s.byte_length = bytes.empty() ? 1 : bytes[i];
        scores.push_back(s);
    }
    return scores;
}

const ScoringMethod kSymbol{ScoringMethodKind::Symbol, Normalization::TokenCount};
const ScoringMethod kHybridTok{ScoringMethodKind::Hybrid, Normalization::TokenCount};
const ScoringMethod kHybridByte{ScoringMethodKind::Hybrid, Normalization::ByteLength};
const ScoringMethod kClozeTok{ScoringMethodKind::Cloze, Normalization::TokenCount};

}  // namespace

TEST_CASE("symbol selection is the raw argmax") {
    auto scores = make_scores({-1.2, -0.3, -4.0, -2.2});
    SelectResult result = select_answer(scores, kSymbol);
    CHECK(result.chosen == 1);
    CHECK_FALSE(result.tie);
}

TEST_CASE("length normalization flips the argmax on the pinned fixture") {
    // raw sums favor index 0; per-token means are -1.0 vs -0.9 and favor 1
    auto scores = make_scores({-4.0, -4.5}, {4, 5});
    CHECK(select_answer(scores, kSymbol).chosen == 0);
    CHECK(select_answer(scores, kHybridTok).chosen == 1);
    CHECK(select_answer(scores, kClozeTok).chosen == 1);
}

TEST_CASE("byte_length normalization uses byte counts") {
    // per-token both -1.5; per-byte -0.5 vs -0.375
    auto scores = make_scores({-3.0, -3.0}, {2, 2}, {6, 8});
    CHECK(select_answer(scores, kHybridByte).chosen == 1);
    SelectResult per_token = select_answer(scores, kHybridTok);
    CHECK(per_token.chosen == 0);
    CHECK(per_token.tie);
}

TEST_CASE("exact ties go to the lowest index and are flagged") {
    auto scores = make_scores({-1.0, -1.0});
    SelectResult result = select_answer(scores, kSymbol);
    CHECK(result.chosen == 0);
    CHECK(result.tie);

    auto three = make_scores({-2.0, -1.0, -1.0});
    SelectResult mid = select_answer(three, kSymbol);
    CHECK(mid.chosen == 1);
    CHECK(mid.tie);
}

TEST_CASE("empty score list is an error") {
    try {
        select_answer({}, kSymbol);
        FAIL("expected EmptyScores");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyScores);
    }
}

TEST_CASE("non-positive normalizers are rejected for normalized methods only") {
    auto scores = make_scores({-1.0, -2.0}, {0, 1});
    try {
        select_answer(scores, kHybridTok);
        FAIL("expected NonPositiveNormalizer");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonPositiveNormalizer);
    }
    // symbol ignores normalizers entirely
    CHECK(select_answer(scores, kSymbol).chosen == 0);

    auto bad_bytes = make_scores({-1.0, -2.0}, {1, 1}, {1, -3});
    CHECK_THROWS_AS(select_answer(bad_bytes, kHybridByte), Error);
}

TEST_CASE("equal normalizers make hybrid agree with symbol") {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(7));
        std::vector<double> sums;
        std::vector<int> tokens;
        const int shared = 1 + static_cast<int>(rng.below(8));
        for (int i = 0; i < k; ++i) {
            sums.push_back(-static_cast<double>(rng.below(1 << 20)) * 0x1.0p-15);
            tokens.push_back(shared);
        }
        auto scores = make_scores(sums, tokens);
        CHECK(select_answer(scores, kHybridTok).chosen == select_answer(scores, kSymbol).chosen);
    }
}

TEST_CASE("argmax is shift-invariant") {
    // Keys live on a coarse binary lattice and normalizers are powers of two,
    // so every sum, product and quotient below is exact in double precision
    // and the comparison cannot be disturbed by rounding.
    Rng rng(99);
    const int norms[4] = {1, 2, 4, 8};
    for (int trial = 0; trial < 2000; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(7));
        std::vector<double> keys;
        for (int i = 0; i < k; ++i) {
            keys.push_back(-static_cast<double>(rng.below(1 << 25)) * 0x1.0p-20);
        }
        const double shift =
            (static_cast<double>(rng.below(1 << 21)) - (1 << 20)) * 0x1.0p-20;

        {
            // symbol: shift the sums directly
            auto base = make_scores(keys);
            std::vector<double> shifted = keys;
            for (double& v : shifted) v += shift;
            auto moved = make_scores(shifted);
            CHECK(select_answer(moved, kSymbol).chosen == select_answer(base, kSymbol).chosen);
        }
        {
            // hybrid/cloze: a uniform per-token shift scales by the normalizer
            std::vector<double> sums;
            std::vector<double> shifted;
            std::vector<int> tokens;
            for (int i = 0; i < k; ++i) {
                const int n = norms[rng.below(4)];
                tokens.push_back(n);
                sums.push_back(keys[static_cast<std::size_t>(i)] * n);
                shifted.push_back((keys[static_cast<std::size_t>(i)] + shift) * n);
            }
            auto base = make_scores(sums, tokens);
            auto moved = make_scores(shifted, tokens);
            CHECK(select_answer(moved, kHybridTok).chosen ==
                  select_answer(base, kHybridTok).chosen);
            CHECK(select_answer(moved, kClozeTok).chosen ==
                  select_answer(base, kClozeTok).chosen);
        }
    }
}

TEST_CASE("selection is total on infinities") {
    const double inf = std::numeric_limits<double>::infinity();
    auto all_neg_inf = make_scores({-inf, -inf, -inf});
    SelectResult r = select_answer(all_neg_inf, kSymbol);
    CHECK(r.chosen == 0);
    CHECK(r.tie);

    auto one_finite = make_scores({-inf, -3.0, -inf});
    CHECK(select_answer(one_finite, kSymbol).chosen == 1);
    CHECK(select_answer(one_finite, kHybridTok).chosen == 1);
}

TEST_CASE("method labels round-trip") {
    CHECK(kSymbol.label() == "symbol");
    CHECK(kHybridTok.label() == "hybrid/token_count");
    CHECK(kHybridByte.label() == "hybrid/byte_length");
    CHECK(kClozeTok.label() == "cloze/token_count");

    ScoringMethod parsed = scoring_method_from_label("cloze/byte_length");
    CHECK(parsed.kind == ScoringMethodKind::Cloze);
    CHECK(parsed.normalization == Normalization::ByteLength);
    CHECK(scoring_method_from_label("symbol").kind == ScoringMethodKind::Symbol);
    CHECK(scoring_method_from_label("hybrid").normalization == Normalization::TokenCount);

    CHECK_THROWS_AS(scoring_method_from_label("viterbi"), Error);
    CHECK_THROWS_AS(scoring_method_from_label("hybrid/word_count"), Error);
}

TEST_CASE("enum string conversions reject unknown names") {
    CHECK(scoring_method_kind_from_string("cloze") == ScoringMethodKind::Cloze);
    CHECK(normalization_from_string("byte_length") == Normalization::ByteLength);
    CHECK_THROWS_AS(scoring_method_kind_from_string(""), Error);
    CHECK_THROWS_AS(normalization_from_string("chars"), Error);
}
