// Command-line front end: ingest/validate benchmarks, dump rendered prompts,
// run experiment matrices, derive report tables, compare leaderboards.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcqa/backend.hpp"
#include "mcqa/benchmark.hpp"
#include "mcqa/error.hpp"
#include "mcqa/eval.hpp"
#include "mcqa/experiment.hpp"
#include "mcqa/metrics.hpp"
#include "mcqa/perturb.hpp"
#include "mcqa/prompt.hpp"

namespace {

using mcqa::BenchmarkSet;
using mcqa::Error;
using mcqa::ExperimentConfig;
using mcqa::McqItem;

struct SourceArgs {
    std::string format = "jsonl";
    std::string input;
    std::string dev;
    std::string name = "benchmark";
};

void add_source_options(CLI::App* cmd, SourceArgs& args) {
    cmd->add_option("--format", args.format, "benchmark format: jsonl or mmlu_csv")
        ->check(CLI::IsMember({"jsonl", "mmlu_csv"}));
    cmd->add_option("--input", args.input, "test split: JSONL file or MMLU csv directory")
        ->required();
    cmd->add_option("--dev", args.dev, "dev split file/directory");
    cmd->add_option("--name", args.name, "benchmark name used in item ids");
}

BenchmarkSet load_source(const SourceArgs& args) {
    return mcqa::load_benchmark(args.format, args.input, args.dev, args.name);
}

void print_stats(const BenchmarkSet& set) {
    const mcqa::SubjectStatsTable stats = mcqa::subject_stats(set);
    std::cout << "benchmark: " << set.name << "\n";
    std::cout << "subjects: " << stats.rows.size() << "\n";
    std::cout << "test items: " << stats.total_items << "\n";
    std::cout << "dev items: " << set.dev_items.size() << "\n";
    std::cout << "max choices: " << stats.max_choices;
    if (stats.heterogeneous_choice_count) std::cout << " (varies per item)";
    std::cout << "\n";
    std::cout << "answer position totals:";
    const mcqa::ChoiceSymbolSet symbols = mcqa::default_symbols();
    for (std::size_t p = 0; p < stats.totals.size(); ++p) {
        const std::string label =
            p < symbols.symbols.size() ? symbols.symbols[p] : std::to_string(p);
        std::cout << ' ' << label << ':' << stats.totals[p];
    }
    std::cout << "\n";

    int unsafe = 0;
    std::map<std::string, int> reasons;
    for (const McqItem& item : set.test_items) {
        if (item.permutation_safe) continue;
        ++unsafe;
        for (const mcqa::CrossReference& ref :
             mcqa::detect_cross_references(item, mcqa::default_symbols())) {
            ++reasons[mcqa::to_string(ref.reason)];
        }
    }
    std::cout << "permutation-unsafe items: " << unsafe << "\n";
    for (const auto& [reason, count] : reasons) {
        std::cout << "  " << reason << ": " << count << "\n";
    }
}

int cmd_ingest(const SourceArgs& args, const std::string& out_path) {
    BenchmarkSet set = load_source(args);
    print_stats(set);
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(mcqa::ErrorKind::IoError, "cannot write " + out_path);
        }
        out << mcqa::to_jsonl(set);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_validate(const SourceArgs& args) {
    BenchmarkSet set = load_source(args);  // load_benchmark validates
    print_stats(set);
    std::cout << "ok\n";
    return 0;
}

int cmd_render(const std::string& config_path, const std::string& dump_path,
               std::string method_label, std::string perturbation_name,
               std::optional<int> max_items, std::optional<std::uint64_t> seed) {
    ExperimentConfig config = ExperimentConfig::load(config_path);
    if (seed) config.seed = *seed;
    if (max_items) config.filters.max_items = *max_items;

    if (method_label.empty()) method_label = config.methods.front().label();
    const mcqa::ScoringMethod method = mcqa::scoring_method_from_label(method_label);
    if (perturbation_name.empty()) perturbation_name = config.perturbations.front().name;
    const mcqa::NamedPerturbation* perturbation = nullptr;
    for (const mcqa::NamedPerturbation& p : config.perturbations) {
        if (p.name == perturbation_name) perturbation = &p;
    }
    if (perturbation == nullptr) {
        throw Error(mcqa::ErrorKind::ConfigInvalid,
                    "perturbation '" + perturbation_name + "' not in config");
    }

    BenchmarkSet set = mcqa::load_benchmark(config.benchmark.format, config.benchmark.test,
                                            config.benchmark.dev, config.name);
    const std::vector<const McqItem*> universe = mcqa::select_universe(set, config);

    std::vector<McqItem> trivial_pool;
    mcqa::CellTask task;
    task.set = &set;
    task.items = universe;
    task.perturbation = perturbation->spec;
    task.options = config.prompt;
    task.method = method;
    task.seed = config.seed;
    task.allow_unsafe = config.filters.include_unsafe_items;
    if (config.prompt.fewshot_mode == mcqa::FewshotMode::TrivialExamples) {
        const std::filesystem::path pool_path =
            std::filesystem::path(config.trivial_dir) /
            ("trivial_examples_v" + std::to_string(config.prompt.trivial_version) + ".jsonl");
        std::ifstream in(pool_path, std::ios::binary);
        if (!in) {
            throw Error(mcqa::ErrorKind::IoError, "cannot read " + pool_path.string());
        }
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        BenchmarkSet pool = mcqa::parse_jsonl(content, pool_path.stem().string());
        trivial_pool = pool.dev_items.empty() ? pool.test_items : pool.dev_items;
        task.trivial_pool = &trivial_pool;
    }

    std::ofstream out(dump_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(mcqa::ErrorKind::IoError, "cannot write " + dump_path);
    }
    for (const McqItem* item : universe) {
        out << mcqa::render_task_item(task, *item).to_json().dump() << "\n";
    }
    std::cout << "rendered " << universe.size() << " queries (" << method.label() << ", "
              << perturbation_name << ") to " << dump_path << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& cache_dir, const std::string& out_dir, bool include_unsafe,
            std::optional<int> max_items) {
    ExperimentConfig config = ExperimentConfig::load(config_path);
    if (seed) config.seed = *seed;
    if (!cache_dir.empty()) config.cache_dir = cache_dir;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (include_unsafe) config.filters.include_unsafe_items = true;
    if (max_items) config.filters.max_items = *max_items;

    const mcqa::RunOutcome outcome = mcqa::run_experiment(config);
    for (const mcqa::CellStatus& cell : outcome.manifest.cells) {
        std::cout << cell.id << ": " << cell.status << ", scored " << cell.n_scored << "/"
                  << cell.n_items;
        if (cell.unscored > 0) std::cout << ", unscored " << cell.unscored;
        if (!cell.error.empty()) std::cout << " (" << cell.error << ")";
        std::cout << "\n";
    }
    std::cout << "manifest: " << (std::filesystem::path(config.out_dir) / "manifest.json").string()
              << "\n";
    if (outcome.exit_code != 0) std::cout << "partial run\n";
    return outcome.exit_code;
}

int cmd_report(const std::string& out_dir, bool charts) {
    const int code = mcqa::write_reports(out_dir, charts);
    std::cout << "reports written under " << out_dir << "\n";
    if (code != 0) std::cout << "partial run\n";
    return code;
}

int cmd_ktau(const std::string& file_a, const std::string& file_b) {
    const mcqa::RankingTable a = mcqa::rank_by_score(mcqa::read_leaderboard_csv(file_a));
    const mcqa::RankingTable b = mcqa::rank_by_score(mcqa::read_leaderboard_csv(file_b));
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.4f", mcqa::kendall_k_tau(a, b));
    std::cout << buffer << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MCQ benchmark robustness auditing harness"};
    app.require_subcommand(1);

    SourceArgs ingest_args;
    std::string ingest_out;
    CLI::App* ingest = app.add_subcommand("ingest", "load a benchmark, print stats, export JSONL");
    add_source_options(ingest, ingest_args);
    ingest->add_option("--out", ingest_out, "write canonical JSONL here");

    SourceArgs validate_args;
    CLI::App* validate =
        app.add_subcommand("validate", "check benchmark shape and choice cross-references");
    add_source_options(validate, validate_args);

    std::string render_config;
    std::string render_dump;
    std::string render_method;
    std::string render_perturbation;
    std::optional<int> render_max_items;
    std::optional<std::uint64_t> render_seed;
    CLI::App* render = app.add_subcommand("render", "dump rendered prompts for one cell");
    render->add_option("--config", render_config, "experiment config JSON")->required();
    render->add_option("--dump", render_dump, "output JSONL path")->required();
    render->add_option("--method", render_method, "scoring method label (default: first)");
    render->add_option("--perturbation", render_perturbation,
                       "perturbation name (default: first)");
    render->add_option("--max-items", render_max_items, "cap the item universe");
    render->add_option("--seed", render_seed, "override the config seed");

    std::string run_config;
    std::optional<std::uint64_t> run_seed;
    std::string run_cache;
    std::string run_out;
    bool run_unsafe = false;
    std::optional<int> run_max_items;
    CLI::App* run = app.add_subcommand("run", "evaluate the whole experiment matrix");
    run->add_option("--config", run_config, "experiment config JSON")->required();
    run->add_option("--seed", run_seed, "override the config seed");
    run->add_option("--cache-dir", run_cache, "override the score cache directory");
    run->add_option("--out", run_out, "override the output directory");
    run->add_flag("--include-unsafe-items", run_unsafe,
                  "evaluate items with cross-referencing choices too");
    run->add_option("--max-items", run_max_items, "cap the item universe");

    std::string report_out;
    bool report_charts = false;
    CLI::App* report = app.add_subcommand("report", "derive tables from a finished run");
    report->add_option("--out", report_out, "run output directory")->required();
    report->add_flag("--charts", report_charts, "also write delta bar charts (SVG)");

    std::string ktau_a;
    std::string ktau_b;
    CLI::App* ktau = app.add_subcommand("ktau", "ranking agreement of two model,score CSVs");
    ktau->add_option("first", ktau_a, "first leaderboard CSV")->required();
    ktau->add_option("second", ktau_b, "second leaderboard CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_args, ingest_out);
        if (validate->parsed()) return cmd_validate(validate_args);
        if (render->parsed()) {
            return cmd_render(render_config, render_dump, render_method, render_perturbation,
                              render_max_items, render_seed);
        }
        if (run->parsed()) {
            return cmd_run(run_config, run_seed, run_cache, run_out, run_unsafe, run_max_items);
        }
        if (report->parsed()) return cmd_report(report_out, report_charts);
        if (ktau->parsed()) return cmd_ktau(ktau_a, ktau_b);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
