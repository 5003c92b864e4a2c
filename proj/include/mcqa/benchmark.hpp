#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcqa/symbols.hpp"

namespace mcqa {

enum class Split { Test, Dev };

const char* to_string(Split split);
Split split_from_string(std::string_view s);

struct McqItem {
    std::string id;           // stable across runs, unique within a BenchmarkSet
    std::string subject;
    std::string stem;
    std::vector<std::string> choices;  // length 2..26, non-empty texts
    int answer_index = 0;              // 0-based index into choices
    bool permutation_safe = true;
    Split source_split = Split::Test;

    int choice_count() const { return static_cast<int>(choices.size()); }
    const std::string& gold_text() const { return choices[static_cast<std::size_t>(answer_index)]; }
};

struct BenchmarkSet {
    std::string name;
    std::vector<McqItem> test_items;
    std::vector<McqItem> dev_items;

    // Dev items for a subject, in source order. Empty when the subject has no
    // dev pool.
    std::vector<const McqItem*> dev_for_subject(const std::string& subject) const;

    std::vector<std::string> subjects() const;  // sorted unique test subjects
};

// ---------------------------------------------------------------------------
// Cross-reference detection
//
// Flags choices whose text depends on where choices sit ("All of the above",
// "Both A and B", "A and C", "the first option"). Matching is case- and
// whitespace-insensitive; flags attach to choice *content*, so they survive
// reordering. The default pattern list is deliberately a superset of the
// canonical forms and can be extended with user regexes.
// ---------------------------------------------------------------------------

enum class CrossRefReason {
    AllOfTheAbove,
    NoneOfTheAbove,
    SymbolReference,   // "Both A and B", "A and C", "B or D"
    OrdinalReference,  // "the first option"
    CustomPattern,
};

const char* to_string(CrossRefReason reason);

struct CrossReference {
    int choice_index;
    CrossRefReason reason;
};

class CrossRefDetector {
  public:
    explicit CrossRefDetector(ChoiceSymbolSet symbols = default_symbols(),
                              std::vector<std::string> extra_patterns = {});
    ~CrossRefDetector();
    CrossRefDetector(CrossRefDetector&&) noexcept;
    CrossRefDetector& operator=(CrossRefDetector&&) noexcept;

    std::vector<CrossReference> detect(const McqItem& item) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<CrossReference> detect_cross_references(const McqItem& item,
                                                    const ChoiceSymbolSet& symbols);

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

// One MMLU-style CSV file: stem, K choice columns, answer letter; no header.
// `source` names the file in error messages.
std::vector<McqItem> parse_mmlu_csv(std::string_view content, const std::string& subject,
                                    Split split, const std::string& source);

// Canonical JSON Lines: {"id","subject","question","choices","answer","split"}.
// "answer" may be a 0-based index or a letter; both normalize to answer_index.
BenchmarkSet parse_jsonl(std::string_view content, const std::string& name);

std::string to_jsonl(const BenchmarkSet& set);

// Loads an MMLU-shaped directory tree: test_dir/*_test.csv, dev_dir/*_dev.csv,
// subject inferred from the filename. Files are parsed in parallel; item order
// follows sorted filenames.
BenchmarkSet load_mmlu_dirs(const std::filesystem::path& test_dir,
                            const std::filesystem::path& dev_dir, const std::string& name);

BenchmarkSet load_benchmark(const std::string& format, const std::filesystem::path& input,
                            const std::optional<std::filesystem::path>& dev_input,
                            const std::string& name);

// Checks McqItem/BenchmarkSet invariants and stamps permutation_safe flags.
// Throws naming the offending record. Every parse entry point calls this.
void validate_benchmark(BenchmarkSet& set, const CrossRefDetector& detector);

// ---------------------------------------------------------------------------
// Subject statistics
// ---------------------------------------------------------------------------

struct SubjectStats {
    std::string subject;
    int item_count = 0;
    std::vector<int> answer_histogram;  // by answer position, up to max K
};

struct SubjectStatsTable {
    std::vector<SubjectStats> rows;  // sorted by subject
    std::vector<int> totals;         // per position, summed over subjects
    int total_items = 0;
    int max_choices = 0;
    bool heterogeneous_choice_count = false;
};

SubjectStatsTable subject_stats(const BenchmarkSet& set);

}  // namespace mcqa
