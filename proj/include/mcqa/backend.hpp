#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcqa/cache.hpp"
#include "mcqa/prompt.hpp"
#include "mcqa/scoring.hpp"

namespace mcqa {

// Everything a provider may need to score one rendered query. HTTP providers
// read only prompt and continuations; synthetic models also use the display
// metadata.
struct ScoreRequest {
    std::string prompt;
    std::vector<std::string> continuations;  // as rendered, leading separator included
    std::string item_ref;
    int gold_index = 0;  // presented gold position
    std::vector<std::string> labels;
    std::string answer_cue;

    static ScoreRequest from_query(const RenderedQuery& query);
};

struct ScoreResponse {
    std::vector<ContinuationScore> scores;  // aligned 1:1 with request continuations
    bool via_fallback = false;  // some span isolated by two-pass subtraction
    bool from_cache = false;
};

// Scores continuations after a prompt. Implementations must be safe to share
// across threads.
class LogprobProvider {
public:
    virtual ~LogprobProvider() = default;

    virtual std::string name() const = 0;
    // stable identity string folded into cache keys: name + config hash
    virtual std::string identity() const = 0;
    // true when scores depend only on (prompt, continuation) text, which is
    // what the on-disk cache keys capture
    virtual bool cacheable() const { return false; }
    virtual ScoreResponse score_batch(const ScoreRequest& request) = 0;
};

enum class SyntheticKind {
    Oracle,          // gold continuation 0, others -beta
    AntiOracle,      // gold continuation -beta, others 0
    SeededUniform,   // hash noise only
    PositionBiased,  // +beta at display position p
    SymbolBiased,    // +beta wherever label == symbol
    Echo,            // +beta when "{cue} {continuation}\n" appears in the prompt
};

const char* to_string(SyntheticKind kind);
SyntheticKind synthetic_kind_from_string(const std::string& s);

struct SyntheticModelSpec {
    SyntheticKind kind = SyntheticKind::Oracle;
    std::uint64_t seed = 0;
    int position = 0;     // PositionBiased
    std::string symbol;   // SymbolBiased
    double beta = 5.0;
    std::string name;     // display name; defaults to the kind string

    nlohmann::json to_json() const;
    static SyntheticModelSpec from_json(const nlohmann::json& obj);
};

// Deterministic, bit-reproducible scorer. SeededUniform, PositionBiased,
// SymbolBiased and Echo lay hash noise in [-1, 0) under their bonuses so
// argmax never ties by accident; Oracle and AntiOracle emit exact 0/-beta.
class SyntheticProvider final : public LogprobProvider {
public:
    explicit SyntheticProvider(SyntheticModelSpec spec);

    std::string name() const override;
    std::string identity() const override;
    ScoreResponse score_batch(const ScoreRequest& request) override;

    const SyntheticModelSpec& spec() const { return spec_; }

private:
    SyntheticModelSpec spec_;
};

struct HttpEndpointConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8080
    std::string model;     // server-side model name
    std::string api = "completions";  // "completions" (echo+logprobs) or "score" (native batch)
    std::string auth_env;  // env var holding a bearer token, optional
    int timeout_ms = 30000;
    int max_attempts = 4;
    int backoff_initial_ms = 250;
    double backoff_factor = 2.0;
    int max_in_flight = 4;

    nlohmann::json to_json() const;
    static HttpEndpointConfig from_json(const nlohmann::json& obj);
};

// OpenAI-style completions adapter: POST {base_url}/v1/completions with
// echo=true, logprobs and max_tokens=0, one request per continuation, summing
// the token logprobs on the continuation span via text_offset. Servers that
// return no offsets get the two-pass subtraction fallback. api = "score"
// selects the native batch endpoint POST {base_url}/v1/score instead.
// Transient failures (transport, 408/429/5xx) retry with exponential backoff
// plus jitter; a semaphore caps in-flight requests.
class HttpProvider final : public LogprobProvider {
public:
    explicit HttpProvider(HttpEndpointConfig config, std::string display_name = "");
    ~HttpProvider() override;

    std::string name() const override;
    std::string identity() const override;
    bool cacheable() const override { return true; }
    ScoreResponse score_batch(const ScoreRequest& request) override;

    std::uint64_t requests_issued() const;  // attempts actually sent

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Read-through cache around a cacheable provider. A request is served from
// cache only when every continuation hits; otherwise the inner provider
// scores the whole batch and all entries are written back.
class CachingProvider final : public LogprobProvider {
public:
    CachingProvider(std::shared_ptr<LogprobProvider> inner, std::shared_ptr<ScoreCache> cache);

    std::string name() const override;
    std::string identity() const override;
    bool cacheable() const override { return true; }
    ScoreResponse score_batch(const ScoreRequest& request) override;

private:
    std::shared_ptr<LogprobProvider> inner_;
    std::shared_ptr<ScoreCache> cache_;
};

// Cache key material for one (provider, prompt, continuation) triple.
std::string score_cache_key(const std::string& provider_identity, const std::string& prompt,
                            const std::string& continuation);

}  // namespace mcqa
