#include "mcqa/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"

namespace mcqa {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot read " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    const std::filesystem::path temp = path.string() + ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::IoError, "cannot write " + temp.string());
        }
        out << content;
    }
    std::filesystem::rename(temp, path, ec);
    if (ec) {
        throw Error(ErrorKind::IoError, "cannot move " + temp.string() + " to " + path.string());
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

std::string sanitize_component(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
        out += ok ? c : '-';
    }
    return out;
}

}  // namespace

json ModelConfig::to_json() const {
    json obj{{"name", name}};
    if (synthetic) obj["synthetic"] = synthetic->to_json();
    if (http) obj["http"] = http->to_json();
    return obj;
}

ModelConfig ModelConfig::from_json(const json& obj) {
    ModelConfig model;
    if (obj.contains("synthetic")) {
        model.synthetic = SyntheticModelSpec::from_json(obj.at("synthetic"));
    }
    if (obj.contains("http")) {
        model.http = HttpEndpointConfig::from_json(obj.at("http"));
    }
    if (obj.contains("name")) {
        model.name = obj.at("name").get<std::string>();
    } else if (model.synthetic) {
        model.name = model.synthetic->name.empty() ? to_string(model.synthetic->kind)
                                                   : model.synthetic->name;
    } else if (model.http) {
        model.name = model.http->model;
    }
    if (model.synthetic.has_value() == model.http.has_value()) {
        throw Error(ErrorKind::ConfigInvalid,
                    "model '" + model.name + "' needs exactly one of synthetic/http");
    }
    if (model.name.empty()) {
        throw Error(ErrorKind::ConfigInvalid, "model entry without a name");
    }
    return model;
}

json BenchmarkSource::to_json() const {
    json obj{{"format", format}, {"test", test}};
    if (!dev.empty()) obj["dev"] = dev;
    return obj;
}

BenchmarkSource BenchmarkSource::from_json(const json& obj) {
    BenchmarkSource source;
    source.format = obj.value("format", std::string("jsonl"));
    source.test = obj.at("test").get<std::string>();
    source.dev = obj.value("dev", std::string{});
    if (source.format != "jsonl" && source.format != "mmlu_csv") {
        throw Error(ErrorKind::ConfigInvalid,
                    "benchmark format must be 'jsonl' or 'mmlu_csv', got '" + source.format + "'");
    }
    return source;
}

namespace {

json filters_to_json(const ItemFilters& filters) {
    json obj{{"include_unsafe_items", filters.include_unsafe_items}};
    if (!filters.subjects.empty()) obj["subjects"] = filters.subjects;
    if (filters.max_items) obj["max_items"] = *filters.max_items;
    return obj;
}

}  // namespace

json ExperimentConfig::to_json() const {
    json models_json = json::array();
    for (const ModelConfig& m : models) models_json.push_back(m.to_json());
    json methods_json = json::array();
    for (const ScoringMethod& m : methods) methods_json.push_back(m.label());
    json perturbations_json = json::array();
    for (const NamedPerturbation& p : perturbations) {
        perturbations_json.push_back(json{{"name", p.name}, {"spec", p.spec.to_json()}});
    }
    return json{{"name", name},
                {"benchmark", benchmark.to_json()},
                {"models", models_json},
                {"methods", methods_json},
                {"prompt", prompt.to_json()},
                {"perturbations", perturbations_json},
                {"baseline", baseline},
                {"seed", seed},
                {"cache_dir", cache_dir},
                {"out_dir", out_dir},
                {"filters", filters_to_json(filters)},
                {"trivial_dir", trivial_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const json& obj) {
    ExperimentConfig config;
    config.name = obj.value("name", std::string("experiment"));
    config.benchmark = BenchmarkSource::from_json(obj.at("benchmark"));
    for (const json& m : obj.at("models")) {
        config.models.push_back(ModelConfig::from_json(m));
    }
    for (const json& m : obj.at("methods")) {
        config.methods.push_back(scoring_method_from_label(m.get<std::string>()));
    }
    if (obj.contains("prompt")) config.prompt = PromptOptions::from_json(obj.at("prompt"));
    for (const json& p : obj.at("perturbations")) {
        NamedPerturbation named;
        named.name = p.at("name").get<std::string>();
        named.spec = PerturbationSpec::from_json(p.at("spec"));
        config.perturbations.push_back(std::move(named));
    }
    config.baseline = obj.value("baseline", std::string{});
    if (config.baseline.empty() && !config.perturbations.empty()) {
        config.baseline = config.perturbations.front().name;
    }
    if (obj.contains("seed")) config.seed = obj.at("seed").get<std::uint64_t>();
    config.cache_dir = obj.value("cache_dir", std::string{});
    config.out_dir = obj.value("out_dir", std::string("out"));
    if (obj.contains("filters")) {
        const json& f = obj.at("filters");
        if (f.contains("subjects")) {
            config.filters.subjects = f.at("subjects").get<std::vector<std::string>>();
        }
        config.filters.include_unsafe_items = f.value("include_unsafe_items", false);
        if (f.contains("max_items") && !f.at("max_items").is_null()) {
            config.filters.max_items = f.at("max_items").get<int>();
        }
    }
    config.trivial_dir = obj.value("trivial_dir", std::string("data"));
    validate_config(config);
    return config;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
    }
}

std::string ExperimentConfig::config_hash() const {
    // hash only what changes results; where outputs land is not part of it
    json obj = to_json();
    obj.erase("cache_dir");
    obj.erase("out_dir");
    std::ostringstream out;
    out << std::hex << fnv1a64(obj.dump());
    return out.str();
}

void validate_config(const ExperimentConfig& config) {
    if (config.models.empty()) {
        throw Error(ErrorKind::ConfigInvalid, "no models configured");
    }
    if (config.methods.empty()) {
        throw Error(ErrorKind::ConfigInvalid, "no scoring methods configured");
    }
    if (config.perturbations.empty()) {
        throw Error(ErrorKind::ConfigInvalid, "no perturbations configured");
    }
    std::set<std::string> names;
    for (const ModelConfig& m : config.models) {
        if (!names.insert(m.name).second) {
            throw Error(ErrorKind::ConfigInvalid, "duplicate model name '" + m.name + "'");
        }
    }
    names.clear();
    bool baseline_found = false;
    for (const NamedPerturbation& p : config.perturbations) {
        if (p.name.empty()) {
            throw Error(ErrorKind::ConfigInvalid, "perturbation with empty name");
        }
        if (!names.insert(p.name).second) {
            throw Error(ErrorKind::ConfigInvalid, "duplicate perturbation name '" + p.name + "'");
        }
        baseline_found = baseline_found || p.name == config.baseline;
    }
    if (!config.baseline.empty() && !baseline_found) {
        throw Error(ErrorKind::ConfigInvalid,
                    "baseline '" + config.baseline + "' is not a configured perturbation");
    }
    if (config.filters.max_items && *config.filters.max_items < 1) {
        throw Error(ErrorKind::ConfigInvalid, "max_items must be >= 1");
    }
    validate_prompt_options(config.prompt);
}

json CellStatus::to_json() const {
    json obj{{"id", id},
             {"model", model},
             {"method", method_label},
             {"perturbation", perturbation},
             {"status", status},
             {"n_items", n_items},
             {"n_scored", n_scored},
             {"unscored", unscored},
             {"ties", tie_count},
             {"fallback_items", fallback_items}};
    if (!error.empty()) obj["error"] = error;
    return obj;
}

CellStatus CellStatus::from_json(const json& obj) {
    CellStatus cell;
    cell.id = obj.at("id").get<std::string>();
    cell.model = obj.at("model").get<std::string>();
    cell.method_label = obj.at("method").get<std::string>();
    cell.perturbation = obj.at("perturbation").get<std::string>();
    cell.status = obj.at("status").get<std::string>();
    cell.n_items = obj.at("n_items").get<int>();
    cell.n_scored = obj.at("n_scored").get<int>();
    cell.unscored = obj.at("unscored").get<int>();
    cell.tie_count = obj.at("ties").get<int>();
    cell.fallback_items = obj.at("fallback_items").get<int>();
    cell.error = obj.value("error", std::string{});
    return cell;
}

json RunManifest::to_json() const {
    json cells_json = json::array();
    for (const CellStatus& c : cells) cells_json.push_back(c.to_json());
    return json{{"experiment", experiment},
                {"config_hash", config_hash},
                {"code_version", code_version},
                {"started_at", started_at},
                {"finished_at", finished_at},
                {"models", models},
                {"methods", methods},
                {"perturbations", perturbations},
                {"baseline", baseline},
                {"universe_items", universe_items},
                {"universe_positions", universe_positions},
                {"cells", cells_json}};
}

RunManifest RunManifest::from_json(const json& obj) {
    RunManifest manifest;
    manifest.experiment = obj.at("experiment").get<std::string>();
    manifest.config_hash = obj.at("config_hash").get<std::string>();
    manifest.code_version = obj.at("code_version").get<std::string>();
    manifest.started_at = obj.at("started_at").get<std::string>();
    manifest.finished_at = obj.at("finished_at").get<std::string>();
    manifest.models = obj.at("models").get<std::vector<std::string>>();
    manifest.methods = obj.at("methods").get<std::vector<std::string>>();
    manifest.perturbations = obj.at("perturbations").get<std::vector<std::string>>();
    manifest.baseline = obj.at("baseline").get<std::string>();
    manifest.universe_items = obj.at("universe_items").get<int>();
    manifest.universe_positions = obj.at("universe_positions").get<int>();
    for (const json& c : obj.at("cells")) {
        manifest.cells.push_back(CellStatus::from_json(c));
    }
    return manifest;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::IoError, path.string() + ": " + e.what());
    }
}

std::string cell_id(const std::string& model, const ScoringMethod& method,
                    const std::string& perturbation) {
    std::string method_label = method.label();
    std::replace(method_label.begin(), method_label.end(), '/', '-');
    return sanitize_component(model) + "__" + sanitize_component(method_label) + "__" +
           sanitize_component(perturbation);
}

std::vector<const McqItem*> select_universe(const BenchmarkSet& set,
                                            const ExperimentConfig& config) {
    const std::vector<std::string> known = set.subjects();
    for (const std::string& subject : config.filters.subjects) {
        if (std::find(known.begin(), known.end(), subject) == known.end()) {
            throw Error(ErrorKind::ConfigInvalid,
                        "subject '" + subject + "' not present in benchmark '" + set.name + "'");
        }
    }
    const std::set<std::string> wanted(config.filters.subjects.begin(),
                                       config.filters.subjects.end());

    // unsafe items are kept only when every perturbation leaves choice
    // references intact, so every cell scores the same item universe
    bool all_safe_on_unsafe = true;
    for (const NamedPerturbation& p : config.perturbations) {
        all_safe_on_unsafe = all_safe_on_unsafe && p.spec.safe_on_unsafe_items();
    }
    const bool keep_unsafe = config.filters.include_unsafe_items || all_safe_on_unsafe;

    std::vector<const McqItem*> universe;
    for (const McqItem& item : set.test_items) {
        if (!wanted.empty() && wanted.count(item.subject) == 0) continue;
        if (!keep_unsafe && !item.permutation_safe) continue;
        universe.push_back(&item);
        if (config.filters.max_items &&
            static_cast<int>(universe.size()) >= *config.filters.max_items) {
            break;
        }
    }
    return universe;
}

std::shared_ptr<LogprobProvider> make_provider(const ModelConfig& model,
                                               const std::shared_ptr<ScoreCache>& cache) {
    if (model.synthetic) {
        SyntheticModelSpec spec = *model.synthetic;
        if (spec.name.empty()) spec.name = model.name;
        return std::make_shared<SyntheticProvider>(std::move(spec));
    }
    std::shared_ptr<LogprobProvider> http =
        std::make_shared<HttpProvider>(*model.http, model.name);
    if (cache) {
        return std::make_shared<CachingProvider>(std::move(http), cache);
    }
    return http;
}

namespace {

// reusable when the ids line up with the universe, line for line
bool results_match_universe(const std::filesystem::path& path,
                            const std::vector<const McqItem*>& universe,
                            std::vector<ItemResult>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::vector<ItemResult> results;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            results.push_back(ItemResult::from_json(json::parse(line)));
        } catch (const std::exception&) {
            return false;
        }
    }
    if (results.size() != universe.size()) return false;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].item_id != universe[i]->id) return false;
    }
    out = std::move(results);
    return true;
}

std::vector<McqItem> load_trivial_pool(const ExperimentConfig& config) {
    const std::filesystem::path path =
        std::filesystem::path(config.trivial_dir) /
        ("trivial_examples_v" + std::to_string(config.prompt.trivial_version) + ".jsonl");
    BenchmarkSet pool = parse_jsonl(read_file(path), path.stem().string());
    // example pools ship their items in the dev split
    return pool.dev_items.empty() ? pool.test_items : pool.dev_items;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    BenchmarkSet set = load_benchmark(config.benchmark.format, config.benchmark.test,
                                      config.benchmark.dev, config.name);
    const std::vector<const McqItem*> universe = select_universe(set, config);
    if (universe.empty()) {
        throw Error(ErrorKind::ConfigInvalid, "item universe is empty after filters");
    }
    int positions = 0;
    for (const McqItem* item : universe) {
        positions = std::max(positions, item->choice_count());
    }

    std::vector<McqItem> trivial_pool;
    if (config.prompt.fewshot_mode == FewshotMode::TrivialExamples) {
        trivial_pool = load_trivial_pool(config);
    }

    std::shared_ptr<ScoreCache> cache;
    if (!config.cache_dir.empty()) {
        cache = std::make_shared<ScoreCache>(config.cache_dir);
    }

    const std::filesystem::path out_dir(config.out_dir);
    std::filesystem::create_directories(out_dir / "results");
    std::filesystem::create_directories(out_dir / "reports");

    RunManifest manifest;
    manifest.experiment = config.name;
    manifest.config_hash = config.config_hash();
    manifest.started_at = utc_timestamp();
    for (const ModelConfig& m : config.models) manifest.models.push_back(m.name);
    for (const ScoringMethod& m : config.methods) manifest.methods.push_back(m.label());
    for (const NamedPerturbation& p : config.perturbations) {
        manifest.perturbations.push_back(p.name);
    }
    manifest.baseline = config.baseline;
    manifest.universe_items = static_cast<int>(universe.size());
    manifest.universe_positions = positions;

    bool partial = false;
    for (const ModelConfig& model : config.models) {
        std::shared_ptr<LogprobProvider> provider;
        std::string provider_error;
        try {
            provider = make_provider(model, cache);
        } catch (const std::exception& e) {
            provider_error = e.what();
        }

        for (const ScoringMethod& method : config.methods) {
            for (const NamedPerturbation& perturbation : config.perturbations) {
                CellStatus cell;
                cell.id = cell_id(model.name, method, perturbation.name);
                cell.model = model.name;
                cell.method_label = method.label();
                cell.perturbation = perturbation.name;
                cell.n_items = static_cast<int>(universe.size());

                if (!provider_error.empty()) {
                    cell.status = "failed";
                    cell.error = provider_error;
                    partial = true;
                    manifest.cells.push_back(std::move(cell));
                    continue;
                }

                const std::filesystem::path results_path =
                    out_dir / "results" / (cell.id + ".jsonl");
                std::vector<ItemResult> results;
                try {
                    if (results_match_universe(results_path, universe, results)) {
                        cell.status = "resumed";
                    } else {
                        CellTask task;
                        task.set = &set;
                        task.items = universe;
                        task.perturbation = perturbation.spec;
                        task.options = config.prompt;
                        task.method = method;
                        task.seed = config.seed;
                        task.trivial_pool = trivial_pool.empty() ? nullptr : &trivial_pool;
                        task.allow_unsafe = config.filters.include_unsafe_items;
                        results = evaluate_parallel(task, *provider);

                        std::string lines;
                        for (const ItemResult& r : results) {
                            lines += r.to_json().dump();
                            lines += '\n';
                        }
                        write_file_atomic(results_path, lines);
                        cell.status = "done";
                    }

                    EvalReport report =
                        build_report(model.name, outcomes_from_results(results), positions);
                    write_file_atomic(out_dir / "reports" / (cell.id + ".json"),
                                      report.to_json().dump(2) + "\n");

                    cell.n_scored = report.n_scored;
                    cell.unscored = report.unscored;
                    cell.tie_count = report.tie_count;
                    for (const ItemResult& r : results) {
                        if (r.via_fallback) ++cell.fallback_items;
                    }
                    if (cell.unscored > 0) partial = true;
                } catch (const std::exception& e) {
                    cell.status = "failed";
                    cell.error = e.what();
                    partial = true;
                }
                manifest.cells.push_back(std::move(cell));
            }
        }
    }

    manifest.finished_at = utc_timestamp();
    write_file_atomic(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");

    RunOutcome outcome;
    outcome.manifest = std::move(manifest);
    outcome.exit_code = partial ? 2 : 0;
    return outcome;
}

}  // namespace mcqa
