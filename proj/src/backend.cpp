#include "mcqa/backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "mcqa/error.hpp"
#include "mcqa/rng.hpp"

namespace mcqa {

using nlohmann::json;

ScoreRequest ScoreRequest::from_query(const RenderedQuery& query) {
    ScoreRequest request;
    request.prompt = query.prompt;
    request.continuations = query.continuations;
    request.item_ref = query.item_ref;
    request.gold_index = query.presented_answer_index;
    request.labels = query.labels;
    request.answer_cue = query.answer_cue;
    return request;
}

const char* to_string(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::Oracle: return "oracle";
        case SyntheticKind::AntiOracle: return "anti_oracle";
        case SyntheticKind::SeededUniform: return "seeded_uniform";
        case SyntheticKind::PositionBiased: return "position_biased";
        case SyntheticKind::SymbolBiased: return "symbol_biased";
        case SyntheticKind::Echo: return "echo";
    }
    return "?";
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
    for (SyntheticKind kind :
         {SyntheticKind::Oracle, SyntheticKind::AntiOracle, SyntheticKind::SeededUniform,
          SyntheticKind::PositionBiased, SyntheticKind::SymbolBiased, SyntheticKind::Echo}) {
        if (s == to_string(kind)) return kind;
    }
    throw Error(ErrorKind::ConfigInvalid, "unknown synthetic model kind '" + s + "'");
}

json SyntheticModelSpec::to_json() const {
    json obj{{"kind", to_string(kind)}, {"seed", seed}};
    if (kind == SyntheticKind::PositionBiased) obj["position"] = position;
    if (kind == SyntheticKind::SymbolBiased) obj["symbol"] = symbol;
    if (beta != 5.0) obj["beta"] = beta;
    if (!name.empty()) obj["name"] = name;
    return obj;
}

SyntheticModelSpec SyntheticModelSpec::from_json(const json& obj) {
    SyntheticModelSpec spec;
    spec.kind = synthetic_kind_from_string(obj.at("kind").get<std::string>());
    if (obj.contains("seed")) spec.seed = obj.at("seed").get<std::uint64_t>();
    if (obj.contains("position")) spec.position = obj.at("position").get<int>();
    if (obj.contains("symbol")) spec.symbol = obj.at("symbol").get<std::string>();
    if (obj.contains("beta")) spec.beta = obj.at("beta").get<double>();
    if (obj.contains("name")) spec.name = obj.at("name").get<std::string>();
    if (spec.beta <= 0) {
        throw Error(ErrorKind::ConfigInvalid, "synthetic beta must be > 0");
    }
    if (spec.kind == SyntheticKind::PositionBiased && spec.position < 0) {
        throw Error(ErrorKind::ConfigInvalid, "position_biased position must be >= 0");
    }
    if (spec.kind == SyntheticKind::SymbolBiased && spec.symbol.empty()) {
        throw Error(ErrorKind::ConfigInvalid, "symbol_biased needs a symbol");
    }
    return spec;
}

namespace {

// reproducible noise in [-1, 0): exact power-of-two scaling of a 53-bit hash
double hash_noise(std::uint64_t seed, const std::string& prompt, const std::string& continuation) {
    const std::uint64_t h = fnv1a64(continuation, mix_seed(seed, fnv1a64(prompt)));
    return static_cast<double>(h >> 11) * 0x1.0p-53 - 1.0;
}

int word_count(const std::string& s) {
    int count = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = c == ' ' || c == '\t' || c == '\n';
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count > 0 ? count : 1;
}

}  // namespace

SyntheticProvider::SyntheticProvider(SyntheticModelSpec spec) : spec_(std::move(spec)) {}

std::string SyntheticProvider::name() const {
    return spec_.name.empty() ? to_string(spec_.kind) : spec_.name;
}

std::string SyntheticProvider::identity() const {
    std::ostringstream material;
    material.precision(17);
    material << to_string(spec_.kind) << '|' << spec_.seed << '|' << spec_.position << '|'
             << spec_.symbol << '|' << spec_.beta;
    std::ostringstream id;
    id << name() << '#' << std::hex << fnv1a64(material.str());
    return id.str();
}

ScoreResponse SyntheticProvider::score_batch(const ScoreRequest& request) {
    ScoreResponse response;
    response.scores.reserve(request.continuations.size());
    for (std::size_t i = 0; i < request.continuations.size(); ++i) {
        const std::string& cont = request.continuations[i];
        ContinuationScore score;
        score.continuation_index = static_cast<int>(i);
        score.token_count = word_count(cont);
        score.byte_length = cont.empty() ? 1 : static_cast<int>(cont.size());

        const bool is_gold = static_cast<int>(i) == request.gold_index;
        double value = 0.0;
        switch (spec_.kind) {
            case SyntheticKind::Oracle:
                value = is_gold ? 0.0 : -spec_.beta;
                break;
            case SyntheticKind::AntiOracle:
                value = is_gold ? -spec_.beta : 0.0;
                break;
            case SyntheticKind::SeededUniform:
                value = hash_noise(spec_.seed, request.prompt, cont);
                break;
            case SyntheticKind::PositionBiased:
                value = hash_noise(spec_.seed, request.prompt, cont) +
                        (static_cast<int>(i) == spec_.position ? spec_.beta : 0.0);
                break;
            case SyntheticKind::SymbolBiased:
                value = hash_noise(spec_.seed, request.prompt, cont) +
                        (i < request.labels.size() && request.labels[i] == spec_.symbol
                             ? spec_.beta
                             : 0.0);
                break;
            case SyntheticKind::Echo: {
                // an answered example shows "{cue} {text}" followed by a blank
                // line; the target cue at the prompt end has no newline, so it
                // never matches itself
                const bool seen =
                    !request.answer_cue.empty() &&
                    request.prompt.find(request.answer_cue + cont + "\n") != std::string::npos;
                value = hash_noise(spec_.seed, request.prompt, cont) + (seen ? spec_.beta : 0.0);
                break;
            }
        }
        score.logprob_sum = value;
        response.scores.push_back(score);
    }
    return response;
}

json HttpEndpointConfig::to_json() const {
    return json{{"base_url", base_url},
                {"model", model},
                {"api", api},
                {"auth_env", auth_env},
                {"timeout_ms", timeout_ms},
                {"max_attempts", max_attempts},
                {"backoff_initial_ms", backoff_initial_ms},
                {"backoff_factor", backoff_factor},
                {"max_in_flight", max_in_flight}};
}

HttpEndpointConfig HttpEndpointConfig::from_json(const json& obj) {
    HttpEndpointConfig config;
    config.base_url = obj.at("base_url").get<std::string>();
    config.model = obj.at("model").get<std::string>();
    if (obj.contains("api")) config.api = obj.at("api").get<std::string>();
    if (obj.contains("auth_env")) config.auth_env = obj.at("auth_env").get<std::string>();
    if (obj.contains("timeout_ms")) config.timeout_ms = obj.at("timeout_ms").get<int>();
    if (obj.contains("max_attempts")) config.max_attempts = obj.at("max_attempts").get<int>();
    if (obj.contains("backoff_initial_ms")) {
        config.backoff_initial_ms = obj.at("backoff_initial_ms").get<int>();
    }
    if (obj.contains("backoff_factor")) config.backoff_factor = obj.at("backoff_factor").get<double>();
    if (obj.contains("max_in_flight")) config.max_in_flight = obj.at("max_in_flight").get<int>();
    if (config.api != "completions" && config.api != "score") {
        throw Error(ErrorKind::ConfigInvalid, "api must be 'completions' or 'score'");
    }
    if (config.max_attempts < 1 || config.max_in_flight < 1) {
        throw Error(ErrorKind::ConfigInvalid, "max_attempts and max_in_flight must be >= 1");
    }
    return config;
}

struct HttpProvider::Impl {
    HttpEndpointConfig config;
    std::string display_name;
    std::string auth_header;
    std::counting_semaphore<> gate;
    std::atomic<std::uint64_t> requests{0};
    std::mutex jitter_mu;
    Rng jitter;

    explicit Impl(HttpEndpointConfig cfg, std::string name)
        : config(std::move(cfg)),
          display_name(std::move(name)),
          gate(config.max_in_flight),
          jitter(fnv1a64(config.base_url + "|" + config.model)) {
        if (!config.auth_env.empty()) {
            const char* token = std::getenv(config.auth_env.c_str());
            if (token == nullptr || *token == '\0') {
                throw Error(ErrorKind::ConfigInvalid,
                            "auth env var " + config.auth_env + " is not set");
            }
            auth_header = std::string("Bearer ") + token;
        }
    }

    void backoff(int attempt) {
        const double scale = std::pow(config.backoff_factor, attempt - 1);
        const auto base = static_cast<std::uint64_t>(config.backoff_initial_ms * scale);
        std::uint64_t delay = base / 2;
        {
            std::lock_guard<std::mutex> lock(jitter_mu);
            delay += jitter.below(base / 2 + 1);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }

    // one POST with retries on transport errors and transient status codes
    json post_json(const std::string& path, const json& body, const std::string& item_ref) {
        std::string last_failure;
        for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
            gate.acquire();
            httplib::Client client(config.base_url);
            client.set_connection_timeout(std::chrono::milliseconds(config.timeout_ms));
            client.set_read_timeout(std::chrono::milliseconds(config.timeout_ms));
            client.set_write_timeout(std::chrono::milliseconds(config.timeout_ms));
            httplib::Headers headers;
            if (!auth_header.empty()) headers.emplace("Authorization", auth_header);
            requests.fetch_add(1);
            httplib::Result result = client.Post(path, headers, body.dump(), "application/json");
            gate.release();

            if (!result) {
                last_failure = std::string("transport: ") + httplib::to_string(result.error());
            } else if (result->status == 200) {
                try {
                    return json::parse(result->body);
                } catch (const json::exception& e) {
                    throw Error(ErrorKind::Transport,
                                "invalid JSON from " + path + " for item " + item_ref + ": " +
                                    e.what());
                }
            } else if (result->status == 408 || result->status == 429 ||
                       result->status >= 500) {
                last_failure = "status " + std::to_string(result->status);
            } else {
                throw Error(ErrorKind::HttpStatus,
                            std::to_string(result->status) + " from " + path + " for item " +
                                item_ref);
            }
            if (attempt < config.max_attempts) backoff(attempt);
        }
        throw Error(ErrorKind::RetryBudgetExhausted,
                    std::to_string(config.max_attempts) + " attempts on " + path + " for item " +
                        item_ref + ", last: " + last_failure);
    }
};

namespace {

struct EchoedLogprobs {
    std::vector<double> logprobs;     // nulls -> 0.0
    std::vector<std::size_t> offsets;  // empty when the server sends none
    int null_count = 0;
};

EchoedLogprobs parse_completion(const json& response, const std::string& item_ref) {
    if (!response.contains("choices") || !response.at("choices").is_array() ||
        response.at("choices").empty()) {
        throw Error(ErrorKind::Transport, "completions response has no choices for " + item_ref);
    }
    const json& choice = response.at("choices").at(0);
    if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
        throw Error(ErrorKind::Transport, "completions response has no logprobs for " + item_ref);
    }
    const json& lp = choice.at("logprobs");
    if (!lp.contains("token_logprobs")) {
        throw Error(ErrorKind::Transport,
                    "completions response has no token_logprobs for " + item_ref);
    }
    EchoedLogprobs out;
    for (const json& v : lp.at("token_logprobs")) {
        if (v.is_null()) {
            out.logprobs.push_back(0.0);
            ++out.null_count;
        } else {
            out.logprobs.push_back(v.get<double>());
        }
    }
    if (lp.contains("text_offset") && lp.at("text_offset").is_array()) {
        for (const json& v : lp.at("text_offset")) {
            out.offsets.push_back(v.get<std::size_t>());
        }
        if (out.offsets.size() != out.logprobs.size()) {
            throw Error(ErrorKind::SpanAlignment,
                        "text_offset and token_logprobs length mismatch for " + item_ref);
        }
    }
    return out;
}

double sum_all(const EchoedLogprobs& echoed) {
    double sum = 0.0;
    for (double v : echoed.logprobs) sum += v;
    return sum;
}

}  // namespace

HttpProvider::HttpProvider(HttpEndpointConfig config, std::string display_name)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(display_name))) {}

HttpProvider::~HttpProvider() = default;

std::string HttpProvider::name() const {
    return impl_->display_name.empty() ? impl_->config.model : impl_->display_name;
}

std::string HttpProvider::identity() const {
    const std::string material =
        impl_->config.base_url + "|" + impl_->config.model + "|" + impl_->config.api;
    std::ostringstream id;
    id << name() << '#' << std::hex << fnv1a64(material);
    return id.str();
}

std::uint64_t HttpProvider::requests_issued() const { return impl_->requests.load(); }

ScoreResponse HttpProvider::score_batch(const ScoreRequest& request) {
    ScoreResponse response;
    response.scores.reserve(request.continuations.size());

    if (impl_->config.api == "score") {
        const json body{{"model", impl_->config.model},
                        {"prompt", request.prompt},
                        {"continuations", request.continuations}};
        const json reply = impl_->post_json("/v1/score", body, request.item_ref);
        if (!reply.contains("scores") || !reply.at("scores").is_array() ||
            reply.at("scores").size() != request.continuations.size()) {
            throw Error(ErrorKind::Transport,
                        "score response size mismatch for " + request.item_ref);
        }
        for (std::size_t i = 0; i < request.continuations.size(); ++i) {
            const json& s = reply.at("scores").at(i);
            ContinuationScore score;
            score.continuation_index = static_cast<int>(i);
            score.logprob_sum = s.at("logprob_sum").get<double>();
            score.token_count = s.value("token_count", word_count(request.continuations[i]));
            score.byte_length =
                s.value("byte_length", static_cast<int>(request.continuations[i].size()));
            response.scores.push_back(score);
        }
        return response;
    }

    // completions API: one echoed request per continuation
    bool prompt_only_known = false;
    double prompt_only_sum = 0.0;
    std::size_t prompt_only_tokens = 0;

    for (std::size_t i = 0; i < request.continuations.size(); ++i) {
        const std::string& cont = request.continuations[i];
        const std::string full_text = request.prompt + cont;
        const json body{{"model", impl_->config.model},
                        {"prompt", full_text},
                        {"echo", true},
                        {"logprobs", 1},
                        {"max_tokens", 0}};
        const EchoedLogprobs echoed =
            parse_completion(impl_->post_json("/v1/completions", body, request.item_ref),
                             request.item_ref);

        ContinuationScore score;
        score.continuation_index = static_cast<int>(i);
        score.byte_length = cont.empty() ? 1 : static_cast<int>(cont.size());

        if (!echoed.offsets.empty()) {
            // locate the first token at or past the prompt boundary
            std::size_t t0 = echoed.offsets.size();
            for (std::size_t t = 0; t < echoed.offsets.size(); ++t) {
                if (echoed.offsets[t] >= request.prompt.size()) {
                    t0 = t;
                    break;
                }
            }
            if (t0 == echoed.offsets.size()) {
                throw Error(ErrorKind::SpanAlignment,
                            "no tokens in continuation span for " + request.item_ref);
            }
            if (echoed.offsets[t0] != request.prompt.size()) {
                throw Error(ErrorKind::SpanAlignment,
                            "token straddles the prompt boundary at offset " +
                                std::to_string(echoed.offsets[t0]) + " for " + request.item_ref);
            }
            double sum = 0.0;
            for (std::size_t t = t0; t < echoed.logprobs.size(); ++t) {
                sum += echoed.logprobs[t];
            }
            score.logprob_sum = sum;
            score.token_count = static_cast<int>(echoed.logprobs.size() - t0);
        } else {
            // no offsets: subtract a prompt-only pass, fetched once per item
            if (!prompt_only_known) {
                const json prompt_body{{"model", impl_->config.model},
                                       {"prompt", request.prompt},
                                       {"echo", true},
                                       {"logprobs", 1},
                                       {"max_tokens", 0}};
                const EchoedLogprobs prompt_echoed = parse_completion(
                    impl_->post_json("/v1/completions", prompt_body, request.item_ref),
                    request.item_ref);
                prompt_only_sum = sum_all(prompt_echoed);
                prompt_only_tokens = prompt_echoed.logprobs.size();
                prompt_only_known = true;
            }
            score.logprob_sum = sum_all(echoed) - prompt_only_sum;
            const std::size_t span = echoed.logprobs.size() > prompt_only_tokens
                                         ? echoed.logprobs.size() - prompt_only_tokens
                                         : 1;
            score.token_count = static_cast<int>(span);
            response.via_fallback = true;
        }
        response.scores.push_back(score);
    }
    return response;
}

CachingProvider::CachingProvider(std::shared_ptr<LogprobProvider> inner,
                                 std::shared_ptr<ScoreCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {
    if (!inner_->cacheable()) {
        throw Error(ErrorKind::ConfigInvalid,
                    "provider " + inner_->name() + " is not cacheable");
    }
}

std::string CachingProvider::name() const { return inner_->name(); }

std::string CachingProvider::identity() const { return inner_->identity(); }

ScoreResponse CachingProvider::score_batch(const ScoreRequest& request) {
    std::vector<CacheEntry> entries;
    entries.reserve(request.continuations.size());
    bool all_hit = true;
    for (const std::string& cont : request.continuations) {
        const auto entry = cache_->get(score_cache_key(inner_->identity(), request.prompt, cont));
        if (!entry) {
            all_hit = false;
            break;
        }
        entries.push_back(*entry);
    }
    if (all_hit) {
        ScoreResponse response;
        response.from_cache = true;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            ContinuationScore score = entries[i].score;
            score.continuation_index = static_cast<int>(i);
            response.scores.push_back(score);
            response.via_fallback = response.via_fallback || entries[i].fallback;
        }
        return response;
    }

    ScoreResponse fresh = inner_->score_batch(request);
    for (std::size_t i = 0; i < request.continuations.size(); ++i) {
        cache_->put(score_cache_key(inner_->identity(), request.prompt, request.continuations[i]),
                    CacheEntry{fresh.scores[i], fresh.via_fallback});
    }
    return fresh;
}

std::string score_cache_key(const std::string& provider_identity, const std::string& prompt,
                            const std::string& continuation) {
    std::string key;
    key.reserve(provider_identity.size() + prompt.size() + continuation.size() + 2);
    key += provider_identity;
    key += '\x1f';
    key += prompt;
    key += '\x1f';
    key += continuation;
    return key;
}

}  // namespace mcqa
