#include "mcqa/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "mcqa/error.hpp"

namespace mcqa {

using nlohmann::json;

const char* to_string(Split split) { return split == Split::Test ? "test" : "dev"; }

Split split_from_string(std::string_view s) {
    if (s == "test") return Split::Test;
    if (s == "dev") return Split::Dev;
    throw Error(ErrorKind::MalformedRow, "unknown split '" + std::string(s) + "'");
}

std::vector<const McqItem*> BenchmarkSet::dev_for_subject(const std::string& subject) const {
    std::vector<const McqItem*> out;
    for (const McqItem& item : dev_items) {
        if (item.subject == subject) out.push_back(&item);
    }
    return out;
}

std::vector<std::string> BenchmarkSet::subjects() const {
    std::set<std::string> uniq;
    for (const McqItem& item : test_items) uniq.insert(item.subject);
    return {uniq.begin(), uniq.end()};
}

// ---------------------------------------------------------------------------
// Cross-reference detection
// ---------------------------------------------------------------------------

const char* to_string(CrossRefReason reason) {
    switch (reason) {
        case CrossRefReason::AllOfTheAbove: return "AllOfTheAbove";
        case CrossRefReason::NoneOfTheAbove: return "NoneOfTheAbove";
        case CrossRefReason::SymbolReference: return "SymbolReference";
        case CrossRefReason::OrdinalReference: return "OrdinalReference";
        case CrossRefReason::CustomPattern: return "CustomPattern";
    }
    return "?";
}

namespace {

std::string regex_escape(const std::string& s) {
    static const std::string special = R"(\^$.|?*+()[]{})";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

struct PatternSet {
    std::regex all_of_above;
    std::regex none_of_above;
    std::regex both_pair;
    std::regex bare_pair;
    std::regex ordinal;
};

PatternSet build_patterns(const ChoiceSymbolSet& symbols, int k) {
    std::string alt = "(?:";
    for (int i = 0; i < k; ++i) {
        if (i > 0) alt += '|';
        alt += regex_escape(symbols.symbols[static_cast<std::size_t>(i)]);
    }
    alt += ')';

    const auto flags = std::regex_constants::ECMAScript | std::regex_constants::icase;
    PatternSet p;
    p.all_of_above = std::regex(R"(all\s+of\s+the\s+above)", flags);
    p.none_of_above = std::regex(R"(none\s+of\s+the\s+above)", flags);
    p.both_pair = std::regex("both\\s+" + alt + "\\s*(?:,|and)\\s*" + alt, flags);
    // standalone symbols joined by and/or: "A and C", "B or D"
    p.bare_pair = std::regex("(?:^|[^A-Za-z0-9])" + alt + "\\s+(?:and|or)\\s+" + alt +
                                 "(?![A-Za-z0-9])",
                             flags);
    p.ordinal = std::regex(
        R"(the\s+(?:first|second|third|fourth|fifth|sixth|seventh|eighth|last)\s+(?:option|choice|answer))",
        flags);
    return p;
}

}  // namespace

struct CrossRefDetector::Impl {
    ChoiceSymbolSet symbols;
    std::vector<std::regex> extra;
    mutable std::mutex mu;
    mutable std::map<int, PatternSet> by_k;  // compiled lazily, guarded by mu

    const PatternSet& patterns_for(int k) const {
        std::lock_guard<std::mutex> lock(mu);
        auto it = by_k.find(k);
        if (it == by_k.end()) {
            it = by_k.emplace(k, build_patterns(symbols, k)).first;
        }
        return it->second;
    }
};

CrossRefDetector::CrossRefDetector(ChoiceSymbolSet symbols, std::vector<std::string> extra_patterns)
    : impl_(std::make_unique<Impl>()) {
    impl_->symbols = std::move(symbols);
    const auto flags = std::regex_constants::ECMAScript | std::regex_constants::icase;
    for (const std::string& pat : extra_patterns) {
        try {
            impl_->extra.emplace_back(pat, flags);
        } catch (const std::regex_error& e) {
            throw Error(ErrorKind::ConfigInvalid,
                        "bad cross-reference pattern '" + pat + "': " + e.what());
        }
    }
}

CrossRefDetector::~CrossRefDetector() = default;
CrossRefDetector::CrossRefDetector(CrossRefDetector&&) noexcept = default;
CrossRefDetector& CrossRefDetector::operator=(CrossRefDetector&&) noexcept = default;

std::vector<CrossReference> CrossRefDetector::detect(const McqItem& item) const {
    const int k = std::min(item.choice_count(),
                           static_cast<int>(impl_->symbols.symbols.size()));
    const PatternSet& p = impl_->patterns_for(std::max(k, 1));

    std::vector<CrossReference> refs;
    for (int i = 0; i < item.choice_count(); ++i) {
        const std::string& text = item.choices[static_cast<std::size_t>(i)];
        if (std::regex_search(text, p.all_of_above)) {
            refs.push_back({i, CrossRefReason::AllOfTheAbove});
        } else if (std::regex_search(text, p.none_of_above)) {
            refs.push_back({i, CrossRefReason::NoneOfTheAbove});
        } else if (std::regex_search(text, p.both_pair) || std::regex_search(text, p.bare_pair)) {
            refs.push_back({i, CrossRefReason::SymbolReference});
        } else if (std::regex_search(text, p.ordinal)) {
            refs.push_back({i, CrossRefReason::OrdinalReference});
        } else {
            for (const std::regex& re : impl_->extra) {
                if (std::regex_search(text, re)) {
                    refs.push_back({i, CrossRefReason::CustomPattern});
                    break;
                }
            }
        }
    }
    return refs;
}

std::vector<CrossReference> detect_cross_references(const McqItem& item,
                                                    const ChoiceSymbolSet& symbols) {
    CrossRefDetector detector(symbols);
    return detector.detect(item);
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180: quoted fields, "" escapes, newlines allowed inside quotes)
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field_started && field.empty()) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    field.push_back(c);
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
                break;
        }
    }
    if (field_started || !field.empty() || !row.empty()) {
        end_row();
    }
    return rows;
}

int normalize_answer_key(const std::string& raw, int choice_count, const std::string& where) {
    std::string key = raw;
    while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
    std::size_t start = 0;
    while (start < key.size() && std::isspace(static_cast<unsigned char>(key[start]))) ++start;
    key = key.substr(start);
    if (key.empty()) {
        throw Error(ErrorKind::MalformedRow, where + ": empty answer key");
    }

    int index;
    if (key.size() == 1 && std::isalpha(static_cast<unsigned char>(key[0]))) {
        index = std::toupper(static_cast<unsigned char>(key[0])) - 'A';
    } else {
        try {
            index = std::stoi(key);
        } catch (const std::exception&) {
            throw Error(ErrorKind::MalformedRow, where + ": unparseable answer key '" + raw + "'");
        }
    }
    if (index < 0 || index >= choice_count) {
        throw Error(ErrorKind::AnswerKeyOutOfRange,
                    where + ": answer '" + raw + "' does not address any of the " +
                        std::to_string(choice_count) + " choices");
    }
    return index;
}

void check_item_shape(const McqItem& item, const std::string& where) {
    if (item.choices.size() < 2 || item.choices.size() > 26) {
        throw Error(ErrorKind::MalformedRow,
                    where + ": item has " + std::to_string(item.choices.size()) +
                        " choices, expected 2..26");
    }
    for (std::size_t i = 0; i < item.choices.size(); ++i) {
        if (item.choices[i].empty()) {
            throw Error(ErrorKind::EmptyChoice,
                        where + ": choice " + std::to_string(i) + " is empty");
        }
    }
    if (item.answer_index < 0 || item.answer_index >= item.choice_count()) {
        throw Error(ErrorKind::AnswerKeyOutOfRange,
                    where + ": answer index " + std::to_string(item.answer_index) +
                        " out of range");
    }
}

}  // namespace

std::vector<McqItem> parse_mmlu_csv(std::string_view content, const std::string& subject,
                                    Split split, const std::string& source) {
    std::vector<McqItem> items;
    const auto rows = parse_csv(content);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = source + " row " + std::to_string(r);
        if (row.size() < 4) {
            throw Error(ErrorKind::MalformedRow,
                        where + ": expected stem, choices, answer; got " +
                            std::to_string(row.size()) + " fields");
        }
        McqItem item;
        item.id = subject + "/" + to_string(split) + "/" + std::to_string(r);
        item.subject = subject;
        item.stem = row.front();
        item.choices.assign(row.begin() + 1, row.end() - 1);
        item.source_split = split;
        if (item.choices.size() > 26) {
            throw Error(ErrorKind::MalformedRow,
                        where + ": " + std::to_string(row.size()) + " fields imply " +
                            std::to_string(item.choices.size()) + " choices, max is 26");
        }
        item.answer_index = normalize_answer_key(row.back(), item.choice_count(), where);
        check_item_shape(item, where);
        items.push_back(std::move(item));
    }
    return items;
}

// ---------------------------------------------------------------------------
// JSON Lines
// ---------------------------------------------------------------------------

BenchmarkSet parse_jsonl(std::string_view content, const std::string& name) {
    BenchmarkSet set;
    set.name = name;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string_view::npos) eol = content.size();
        std::string_view line = content.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        const std::string where = name + " line " + std::to_string(line_no);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::MalformedRow, where + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("question") || !obj.contains("choices") ||
            !obj.contains("answer")) {
            throw Error(ErrorKind::MalformedRow,
                        where + ": required fields are question, choices, answer");
        }
        McqItem item;
        item.subject = obj.value("subject", std::string("default"));
        item.stem = obj.at("question").get<std::string>();
        if (!obj.at("choices").is_array()) {
            throw Error(ErrorKind::MalformedRow, where + ": choices must be an array");
        }
        for (const auto& c : obj.at("choices")) item.choices.push_back(c.get<std::string>());
        item.source_split = split_from_string(obj.value("split", std::string("test")));
        item.id = obj.value("id", std::string());
        if (item.id.empty()) {
            item.id = item.subject + "/" + to_string(item.source_split) + "/" +
                      std::to_string(line_no - 1);
        }
        if (obj.at("answer").is_number_integer()) {
            item.answer_index = obj.at("answer").get<int>();
        } else {
            item.answer_index =
                normalize_answer_key(obj.at("answer").get<std::string>(),
                                     item.choice_count(), where);
        }
        if (item.answer_index < 0 || item.answer_index >= item.choice_count()) {
            throw Error(ErrorKind::AnswerKeyOutOfRange,
                        where + ": answer index " + std::to_string(item.answer_index) +
                            " with " + std::to_string(item.choice_count()) + " choices");
        }
        check_item_shape(item, where);
        if (item.source_split == Split::Test) {
            set.test_items.push_back(std::move(item));
        } else {
            set.dev_items.push_back(std::move(item));
        }
    }
    CrossRefDetector detector;
    validate_benchmark(set, detector);
    return set;
}

std::string to_jsonl(const BenchmarkSet& set) {
    std::string out;
    auto emit = [&out](const McqItem& item) {
        json obj{{"id", item.id},
                 {"subject", item.subject},
                 {"question", item.stem},
                 {"choices", item.choices},
                 {"answer", item.answer_index},
                 {"split", to_string(item.source_split)}};
        out += obj.dump();
        out += '\n';
    };
    for (const McqItem& item : set.test_items) emit(item);
    for (const McqItem& item : set.dev_items) emit(item);
    return out;
}

// ---------------------------------------------------------------------------
// Directory loading
// ---------------------------------------------------------------------------

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::ConfigInvalid, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string subject_from_filename(const std::filesystem::path& path, Split split) {
    std::string stem = path.stem().string();
    const std::string suffix = split == Split::Test ? "_test" : "_dev";
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
        stem.resize(stem.size() - suffix.size());
    }
    return stem;
}

std::vector<std::filesystem::path> sorted_csvs(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<McqItem> parse_csv_files(const std::vector<std::filesystem::path>& files,
                                     Split split) {
    std::vector<std::vector<McqItem>> per_file(files.size());
    std::exception_ptr first_error;

#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < files.size(); ++i) {
        try {
            const std::string subject = subject_from_filename(files[i], split);
            per_file[i] = parse_mmlu_csv(read_file(files[i]), subject, split,
                                         files[i].filename().string());
        } catch (...) {
#pragma omp critical
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<McqItem> items;
    for (auto& chunk : per_file) {
        items.insert(items.end(), std::make_move_iterator(chunk.begin()),
                     std::make_move_iterator(chunk.end()));
    }
    return items;
}

}  // namespace

BenchmarkSet load_mmlu_dirs(const std::filesystem::path& test_dir,
                            const std::filesystem::path& dev_dir, const std::string& name) {
    BenchmarkSet set;
    set.name = name;
    set.test_items = parse_csv_files(sorted_csvs(test_dir), Split::Test);
    if (!dev_dir.empty() && std::filesystem::is_directory(dev_dir)) {
        set.dev_items = parse_csv_files(sorted_csvs(dev_dir), Split::Dev);
    }
    CrossRefDetector detector;
    validate_benchmark(set, detector);
    return set;
}

BenchmarkSet load_benchmark(const std::string& format, const std::filesystem::path& input,
                            const std::optional<std::filesystem::path>& dev_input,
                            const std::string& name) {
    // Callers often pass a config string here; "" means no dev split.
    const bool has_dev = dev_input && !dev_input->empty();
    if (format == "mmlu_csv") {
        return load_mmlu_dirs(input, has_dev ? *dev_input : std::filesystem::path{}, name);
    }
    if (format == "jsonl") {
        std::string content = read_file(input);
        if (has_dev) content += read_file(*dev_input);
        return parse_jsonl(content, name);
    }
    throw Error(ErrorKind::ConfigInvalid,
                "unknown benchmark format '" + format + "' (expected mmlu_csv or jsonl)");
}

void validate_benchmark(BenchmarkSet& set, const CrossRefDetector& detector) {
    std::unordered_set<std::string> ids;
    std::unordered_set<std::string> test_subjects;
    for (const McqItem& item : set.test_items) test_subjects.insert(item.subject);

    auto check = [&](McqItem& item) {
        check_item_shape(item, item.id);
        if (!ids.insert(item.id).second) {
            throw Error(ErrorKind::DuplicateId, "item id '" + item.id + "' appears twice");
        }
        item.permutation_safe = detector.detect(item).empty();
    };
    for (McqItem& item : set.test_items) check(item);
    for (McqItem& item : set.dev_items) {
        check(item);
        // dev-only files (e.g. example pools) have no test split to match
        if (!test_subjects.empty() && !test_subjects.contains(item.subject)) {
            throw Error(ErrorKind::SubjectMismatch,
                        "dev item '" + item.id + "' has subject '" + item.subject +
                            "' absent from the test split");
        }
    }
}

// ---------------------------------------------------------------------------
// Subject statistics
// ---------------------------------------------------------------------------

SubjectStatsTable subject_stats(const BenchmarkSet& set) {
    SubjectStatsTable table;
    if (set.test_items.empty()) return table;

    int min_k = set.test_items.front().choice_count();
    for (const McqItem& item : set.test_items) {
        table.max_choices = std::max(table.max_choices, item.choice_count());
        min_k = std::min(min_k, item.choice_count());
    }
    table.heterogeneous_choice_count = min_k != table.max_choices;

    std::map<std::string, SubjectStats> by_subject;
    for (const McqItem& item : set.test_items) {
        SubjectStats& stats = by_subject[item.subject];
        stats.subject = item.subject;
        stats.answer_histogram.resize(static_cast<std::size_t>(table.max_choices), 0);
        ++stats.item_count;
        ++stats.answer_histogram[static_cast<std::size_t>(item.answer_index)];
    }

    table.totals.assign(static_cast<std::size_t>(table.max_choices), 0);
    for (auto& [subject, stats] : by_subject) {
        for (std::size_t p = 0; p < table.totals.size(); ++p) {
            table.totals[p] += stats.answer_histogram[p];
        }
        table.total_items += stats.item_count;
        table.rows.push_back(std::move(stats));
    }
    return table;
}

}  // namespace mcqa
