#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "explcal/corpus.hpp"
#include "explcal/prompting.hpp"

namespace explcal {

struct CompletionRequest {
    std::string prompt_text;
    std::string example_id;  // identifies the test item; part of the cache key
    int max_tokens = 128;
    double temperature = 0.0;
    int candidate_count = 1;  // 1..5
    bool want_token_logprobs = true;
    std::vector<std::string> stop_sequences;
};

void validate_request(const CompletionRequest& request);

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct Candidate {
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    // Per-position alternatives (token -> logprob), parallel to
    // token_logprobs when available. Empty when the backend does not
    // report them.
    std::vector<std::map<std::string, double>> top_logprobs;
};

struct Completion {
    std::vector<Candidate> candidates;  // best first
    std::string model_id;
    bool cached = false;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual Completion complete(const CompletionRequest& request) = 0;
    // Stable identity string; contributes to cache keys.
    virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic scripted mock (synthetic QA only)

struct MockScenario {
    uint64_t seed = 0;
    double correct_rate = 1.0;
    double factual_given_correct = 1.0;
    double factual_given_incorrect = 0.0;
    double consistent_rate = 1.0;
    int candidate_count = 1;
};

// Emits a completion in the paradigm's surface format whose correctness,
// factuality, and consistency are Bernoulli draws keyed by
// (scenario.seed, example id, candidate index). Wrong answers reuse
// another in-context name; nonfactual explanations claim the question's
// profession for a chain whose context sentence says otherwise. The
// factuality draw is always honored; when a draw requests an incorrect yet
// factual and consistent explanation (impossible by the 2x2 context
// construction) the consistency flag is coerced to false. Pseudo token
// logprobs are attached so confidence extraction works downstream.
Completion mock_behavior(const MockScenario& scenario, const Example& test,
                         const Paradigm& paradigm, int candidate_count);

class MockBackend : public Backend {
public:
    MockBackend(MockScenario scenario, Paradigm paradigm);

    void register_examples(const Dataset& dataset);

    Completion complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    MockScenario scenario_;
    Paradigm paradigm_;
    std::unordered_map<std::string, Example> examples_;
};

// ---------------------------------------------------------------------------
// Replay of recorded completions (fixture runs for context_qa / nli)

// File format: {"model_id": "...", "completions": {"<example_id>":
//   [{"text": "...", "token_logprobs": [["tok", lp], ...] | null,
//     "top_logprobs": [{"tok": lp, ...}, ...]}, ...], ...}}
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const std::string& path);

    Completion complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    std::string id_;
    std::unordered_map<std::string, std::vector<Candidate>> completions_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP endpoint

struct HttpBackendConfig {
    std::string base_url;  // e.g. "https://api.openai.com" or "http://127.0.0.1:8080"
    std::string model;
    std::string api_key_env = "EXPLCAL_API_KEY";
    int max_attempts = 4;
    int backoff_initial_ms = 250;
    double requests_per_minute = 60.0;
    int max_in_flight = 4;
    // Multi-candidate requests sample n completions at this temperature and
    // pin the greedy completion first when distinct; greedy n-sampling at
    // temperature 0 would only return duplicates.
    double sampling_temperature = 0.7;
};

// Requests-per-minute token bucket. Clock and sleep hooks are injectable
// for tests.
class TokenBucket {
public:
    using Clock = std::chrono::steady_clock;
    using NowFn = std::function<Clock::time_point()>;
    using SleepFn = std::function<void(std::chrono::milliseconds)>;

    TokenBucket(double per_minute, NowFn now = {}, SleepFn sleep = {});

    void acquire();
    bool try_acquire();  // non-blocking

private:
    void refill_locked();

    double capacity_;
    double tokens_;
    double per_second_;
    Clock::time_point last_;
    NowFn now_;
    SleepFn sleep_;
    std::mutex mu_;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    Completion complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Content-addressed response cache

// Layout: {cache_dir}/{first 2 hex}/{key}.json where key is the SHA-256 of
// the canonicalized request joined with the backend id. Values are full
// Completion bodies; identical requests always map to identical files, so
// concurrent writers are harmless.
std::string request_cache_key(const std::string& backend_id, const CompletionRequest& request);

class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::string cache_dir);

    Completion complete(const CompletionRequest& request) override;
    std::string id() const override;

private:
    std::shared_ptr<Backend> inner_;
    std::string cache_dir_;
};

} // namespace explcal
