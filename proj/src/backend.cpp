#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "explcal/backend.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <nlohmann/json.hpp>

#include "explcal/errors.hpp"
#include "explcal/rng.hpp"
#include "explcal/text.hpp"

namespace explcal {

using nlohmann::json;

namespace {

constexpr uint64_t kTagCorrect = 0x636f7272ull;
constexpr uint64_t kTagFactual = 0x66616374ull;
constexpr uint64_t kTagConsistent = 0x636f6e73ull;
constexpr uint64_t kTagConfidence = 0x636f6e66ull;

json completion_to_json(const Completion& completion) {
    json j;
    j["model_id"] = completion.model_id;
    json cands = json::array();
    for (const auto& cand : completion.candidates) {
        json c;
        c["text"] = cand.text;
        if (cand.token_logprobs) {
            json lps = json::array();
            for (const auto& tl : *cand.token_logprobs)
                lps.push_back(json::array({tl.token, tl.logprob}));
            c["token_logprobs"] = std::move(lps);
        } else {
            c["token_logprobs"] = nullptr;
        }
        if (!cand.top_logprobs.empty()) c["top_logprobs"] = cand.top_logprobs;
        cands.push_back(std::move(c));
    }
    j["candidates"] = std::move(cands);
    return j;
}

Candidate candidate_from_json(const json& c) {
    Candidate cand;
    cand.text = c.at("text").get<std::string>();
    if (c.contains("token_logprobs") && !c.at("token_logprobs").is_null()) {
        std::vector<TokenLogprob> lps;
        for (const auto& entry : c.at("token_logprobs"))
            lps.push_back({entry.at(0).get<std::string>(), entry.at(1).get<double>()});
        cand.token_logprobs = std::move(lps);
    }
    if (c.contains("top_logprobs") && !c.at("top_logprobs").is_null())
        cand.top_logprobs =
            c.at("top_logprobs").get<std::vector<std::map<std::string, double>>>();
    return cand;
}

Completion completion_from_json(const json& j) {
    Completion completion;
    completion.model_id = j.at("model_id").get<std::string>();
    for (const auto& c : j.at("candidates"))
        completion.candidates.push_back(candidate_from_json(c));
    if (completion.candidates.empty())
        throw ParseError("completion has no candidates");
    return completion;
}

} // namespace

void validate_request(const CompletionRequest& request) {
    if (request.candidate_count < 1 || request.candidate_count > 5)
        throw ValidationError("candidate_count must be within [1, 5]");
    if (request.temperature < 0.0)
        throw ValidationError("temperature must be non-negative");
    if (request.max_tokens < 1)
        throw ValidationError("max_tokens must be positive");
}

std::string request_cache_key(const std::string& backend_id,
                              const CompletionRequest& request) {
    json j;
    j["backend"] = backend_id;
    j["prompt"] = request.prompt_text;
    j["example_id"] = request.example_id;
    j["max_tokens"] = request.max_tokens;
    j["temperature"] = request.temperature;
    j["n"] = request.candidate_count;
    j["logprobs"] = request.want_token_logprobs;
    j["stop"] = request.stop_sequences;
    return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Mock backend

namespace {

struct ParsedChain {
    std::string subject;
    std::string object;
    std::string verb;
    std::string profession;
};

struct ParsedSynth {
    std::vector<ParsedChain> chains;
    std::string question_verb;
    std::string question_profession;
    int gold = -1;       // chain matching the question
    int distractor = -1; // same verb, other profession
    bool standard_style = true;
};

std::vector<std::string> whitespace_words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string strip_terminal_dot(std::string_view s) {
    auto t = trim(s);
    while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?'))
        t.remove_suffix(1);
    return std::string(t);
}

ParsedSynth parse_synth_example(const Example& ex) {
    ParsedSynth parsed;
    struct Relation { std::string subject, verb, object; };
    std::vector<Relation> relations;
    std::unordered_map<std::string, std::string> profession_of;

    for (const auto& para : ex.context) {
        for (const auto& sentence : para) {
            auto words = whitespace_words(strip_terminal_dot(sentence));
            if (words.size() < 3) continue;
            if (words[1] == "is") {
                size_t p = 2;
                if (words[p] == "a" || words[p] == "an") ++p;
                if (p < words.size()) profession_of[words[0]] = words[p];
            } else {
                Relation rel;
                rel.subject = words.front();
                rel.object = words.back();
                rel.verb = join(std::vector<std::string>(words.begin() + 1, words.end() - 1),
                                " ");
                relations.push_back(std::move(rel));
            }
        }
    }
    for (const auto& rel : relations) {
        auto it = profession_of.find(rel.object);
        if (it == profession_of.end()) continue;
        parsed.chains.push_back({rel.subject, rel.object, rel.verb, it->second});
    }

    auto qwords = whitespace_words(strip_terminal_dot(ex.question));
    if (qwords.size() >= 3 && qwords.front() == "Who") {
        parsed.question_profession = qwords.back();
        size_t verb_end = qwords.size() - 1;
        if (verb_end >= 2 && (qwords[verb_end - 1] == "a" || qwords[verb_end - 1] == "an"))
            --verb_end;
        parsed.question_verb = join(
            std::vector<std::string>(qwords.begin() + 1,
                                     qwords.begin() + static_cast<long>(verb_end)),
            " ");
    }
    for (size_t i = 0; i < parsed.chains.size(); ++i) {
        const auto& chain = parsed.chains[i];
        if (chain.verb != parsed.question_verb) continue;
        if (chain.profession == parsed.question_profession)
            parsed.gold = static_cast<int>(i);
        else
            parsed.distractor = static_cast<int>(i);
    }
    if (ex.gold_explanation) {
        auto words = whitespace_words(*ex.gold_explanation);
        parsed.standard_style = words.size() > 1 && words[1] == "is";
    }
    return parsed;
}

std::string render_clause_pair(bool standard_style, const std::string& is_subject,
                               const std::string& profession, const std::string& rel_subject,
                               const std::string& verb, const std::string& rel_object) {
    std::string is_clause = is_subject + " is " +
                            std::string(indefinite_article(profession)) + " " + profession;
    std::string rel_clause = rel_subject + " " + verb + " " + rel_object;
    if (standard_style) return is_clause + " and " + rel_clause;
    return rel_clause + " and " + is_clause;
}

// Word tokens with their leading whitespace attached, concatenating back to
// the original text; the answer-bearing token carries log(confidence) so
// confidence extraction recovers the drawn value exactly.
std::vector<TokenLogprob> pseudo_token_logprobs(const std::string& text,
                                                size_t answer_pos, double confidence) {
    std::vector<TokenLogprob> tokens;
    std::vector<size_t> starts;
    size_t i = 0;
    while (i < text.size()) {
        size_t start = i;
        while (i < text.size() && text[i] == ' ') ++i;  // leading spaces join the word
        while (i < text.size() && text[i] != ' ') ++i;
        tokens.push_back({text.substr(start, i - start), -0.02});
        starts.push_back(start);
    }
    for (size_t t = 0; t < tokens.size(); ++t) {
        size_t end = starts[t] + tokens[t].token.size();
        if (answer_pos >= starts[t] && answer_pos < end) {
            tokens[t].logprob = std::log(confidence);
            break;
        }
    }
    return tokens;
}

} // namespace

Completion mock_behavior(const MockScenario& scenario, const Example& test,
                         const Paradigm& paradigm, int candidate_count) {
    if (test.task != TaskKind::SynthQA)
        throw ValidationError("mock backend only answers synth examples; use a replay "
                              "backend for context_qa/nli fixtures (example \"" +
                              test.id + "\")");
    ParsedSynth parsed = parse_synth_example(test);
    if (parsed.gold < 0 || parsed.distractor < 0)
        throw ValidationError("mock backend could not recover the chain structure of "
                              "example \"" + test.id + "\"");
    const ParsedChain& gold = parsed.chains[static_cast<size_t>(parsed.gold)];
    const ParsedChain& distractor = parsed.chains[static_cast<size_t>(parsed.distractor)];

    Completion completion;
    completion.model_id = "mock";
    uint64_t id_hash = fnv1a64(test.id);

    for (int cand_idx = 0; cand_idx < candidate_count; ++cand_idx) {
        uint64_t base = mix64(mix64(scenario.seed, id_hash),
                              static_cast<uint64_t>(cand_idx));
        bool correct = Rng(mix64(base, kTagCorrect)).bernoulli(scenario.correct_rate);
        bool factual = Rng(mix64(base, kTagFactual))
                           .bernoulli(correct ? scenario.factual_given_correct
                                              : scenario.factual_given_incorrect);
        bool consistent =
            Rng(mix64(base, kTagConsistent)).bernoulli(scenario.consistent_rate);
        if (!correct && factual) consistent = false;  // unreachable combination
        double confidence =
            0.05 + 0.9 * Rng(mix64(base, kTagConfidence)).next_double();

        std::string answer = correct ? gold.subject : distractor.subject;
        std::string explanation;
        if (correct) {
            if (factual && consistent)
                explanation = render_clause_pair(parsed.standard_style, gold.object,
                                                 gold.profession, gold.subject, gold.verb,
                                                 gold.object);
            else if (factual)  // grounded clauses from the distractor chain
                explanation = render_clause_pair(parsed.standard_style, distractor.object,
                                                 distractor.profession, distractor.subject,
                                                 distractor.verb, distractor.object);
            else if (consistent)
                explanation = render_clause_pair(parsed.standard_style, distractor.object,
                                                 gold.profession, gold.subject, gold.verb,
                                                 distractor.object);
            else
                explanation = render_clause_pair(parsed.standard_style, distractor.object,
                                                 distractor.profession, gold.subject,
                                                 gold.verb, distractor.object);
        } else {
            if (factual)  // distractor chain described truthfully
                explanation = render_clause_pair(parsed.standard_style, distractor.object,
                                                 distractor.profession, distractor.subject,
                                                 distractor.verb, distractor.object);
            else if (consistent)  // claims the asked-for profession for the wrong chain
                explanation = render_clause_pair(parsed.standard_style, distractor.object,
                                                 gold.profession, distractor.subject,
                                                 distractor.verb, distractor.object);
            else
                explanation = render_clause_pair(parsed.standard_style, gold.object,
                                                 distractor.profession, gold.subject,
                                                 gold.verb, gold.object);
        }

        Candidate cand;
        size_t answer_pos = 0;
        switch (paradigm.kind) {
            case ParadigmKind::FewShot:
                cand.text = answer;
                answer_pos = 0;
                break;
            case ParadigmKind::ExplainThenPredict:
                cand.text = "Because " + explanation + ", the answer is " + answer + ".";
                answer_pos = cand.text.size() - answer.size() - 1;
                break;
            case ParadigmKind::PredictThenExplain:
                cand.text = answer + ", because " + explanation + ".";
                answer_pos = 0;
                break;
        }
        cand.token_logprobs = pseudo_token_logprobs(cand.text, answer_pos, confidence);
        completion.candidates.push_back(std::move(cand));
    }
    return completion;
}

MockBackend::MockBackend(MockScenario scenario, Paradigm paradigm)
    : scenario_(scenario), paradigm_(paradigm) {}

void MockBackend::register_examples(const Dataset& dataset) {
    for (const auto& ex : dataset.examples) examples_[ex.id] = ex;
}

Completion MockBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    auto it = examples_.find(request.example_id);
    if (it == examples_.end())
        throw ValidationError("mock backend has no registered example \"" +
                              request.example_id + "\"");
    return mock_behavior(scenario_, it->second, paradigm_, request.candidate_count);
}

std::string MockBackend::id() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "mock:seed=%llu;cr=%.6f;fc=%.6f;fi=%.6f;cs=%.6f;paradigm=%s;trigger=%d",
                  static_cast<unsigned long long>(scenario_.seed), scenario_.correct_rate,
                  scenario_.factual_given_correct, scenario_.factual_given_incorrect,
                  scenario_.consistent_rate, std::string(paradigm_name(paradigm_.kind)).c_str(),
                  paradigm_.step_trigger ? 1 : 0);
    return buf;
}

// ---------------------------------------------------------------------------
// Replay backend

ReplayBackend::ReplayBackend(const std::string& path) {
    std::string body = read_file(path);
    id_ = "replay:" + sha256_hex(body).substr(0, 16);
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ParseError("replay file " + path + " is not valid JSON: " + e.what());
    }
    for (const auto& [example_id, cands] : j.at("completions").items()) {
        std::vector<Candidate> list;
        for (const auto& c : cands) list.push_back(candidate_from_json(c));
        completions_[example_id] = std::move(list);
    }
    if (j.contains("model_id")) id_ += ":" + j["model_id"].get<std::string>();
}

Completion ReplayBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    auto it = completions_.find(request.example_id);
    if (it == completions_.end())
        throw BackendError("replay backend has no completion recorded for example \"" +
                           request.example_id + "\"");
    Completion completion;
    completion.model_id = id_;
    completion.candidates = it->second;
    if (completion.candidates.size() > static_cast<size_t>(request.candidate_count))
        completion.candidates.resize(static_cast<size_t>(request.candidate_count));
    return completion;
}

std::string ReplayBackend::id() const { return id_; }

// ---------------------------------------------------------------------------
// Token bucket

TokenBucket::TokenBucket(double per_minute, NowFn now, SleepFn sleep)
    : capacity_(per_minute > 0 ? per_minute : 0),
      tokens_(capacity_),
      per_second_(per_minute / 60.0),
      now_(now ? std::move(now) : [] { return Clock::now(); }),
      sleep_(sleep ? std::move(sleep)
                   : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    last_ = now_();
}

void TokenBucket::refill_locked() {
    auto t = now_();
    double elapsed = std::chrono::duration<double>(t - last_).count();
    if (elapsed > 0) {
        tokens_ = std::min(capacity_, tokens_ + elapsed * per_second_);
        last_ = t;
    }
}

bool TokenBucket::try_acquire() {
    if (capacity_ <= 0) return true;  // unlimited
    std::lock_guard<std::mutex> lock(mu_);
    refill_locked();
    if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return true;
    }
    return false;
}

void TokenBucket::acquire() {
    while (!try_acquire()) {
        double deficit;
        {
            std::lock_guard<std::mutex> lock(mu_);
            deficit = 1.0 - tokens_;
        }
        auto wait = std::chrono::milliseconds(
            std::max<int64_t>(1, static_cast<int64_t>(1000.0 * deficit / per_second_)));
        sleep_(wait);
    }
}

// ---------------------------------------------------------------------------
// HTTP backend

struct HttpBackend::Impl {
    HttpBackendConfig config;
    TokenBucket bucket;
    std::mutex inflight_mu;
    std::condition_variable inflight_cv;
    int inflight = 0;

    explicit Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)), bucket(config.requests_per_minute) {}

    struct InflightGuard {
        Impl& impl;
        explicit InflightGuard(Impl& i) : impl(i) {
            std::unique_lock<std::mutex> lock(impl.inflight_mu);
            impl.inflight_cv.wait(lock, [&] {
                return impl.inflight < std::max(1, impl.config.max_in_flight);
            });
            ++impl.inflight;
        }
        ~InflightGuard() {
            {
                std::lock_guard<std::mutex> lock(impl.inflight_mu);
                --impl.inflight;
            }
            impl.inflight_cv.notify_one();
        }
    };

    std::string api_key() const {
        const char* key = std::getenv(config.api_key_env.c_str());
        return key ? key : "";
    }

    json post_completions(const json& body) {
        httplib::Client client(config.base_url);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        httplib::Headers headers;
        std::string key = api_key();
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        int last_status = 0;
        std::string last_error;
        for (int attempt = 0; attempt < std::max(1, config.max_attempts); ++attempt) {
            if (attempt > 0) {
                auto backoff = std::chrono::milliseconds(
                    config.backoff_initial_ms * (1 << (attempt - 1)));
                std::this_thread::sleep_for(backoff);
            }
            bucket.acquire();
            auto res = client.Post("/v1/completions", headers, body.dump(),
                                   "application/json");
            if (!res) {
                last_error = "network error: " + httplib::to_string(res.error());
                continue;
            }
            last_status = res->status;
            if (res->status == 200) {
                try {
                    return json::parse(res->body);
                } catch (const json::exception& e) {
                    throw BackendError("backend returned unparseable body: " +
                                           std::string(e.what()),
                                       res->status, false);
                }
            }
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            bool retriable = res->status == 429 || res->status >= 500;
            if (!retriable) throw BackendError(last_error, res->status, false);
        }
        throw BackendError("backend request failed after " +
                               std::to_string(config.max_attempts) + " attempts; last: " +
                               last_error,
                           last_status, true);
    }

    json request_body(const CompletionRequest& request, int n, double temperature) const {
        json body;
        body["model"] = config.model;
        body["prompt"] = request.prompt_text;
        body["max_tokens"] = request.max_tokens;
        body["temperature"] = temperature;
        body["n"] = n;
        if (request.want_token_logprobs) body["logprobs"] = 5;
        if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
        return body;
    }

    static Candidate parse_choice(const json& choice) {
        Candidate cand;
        cand.text = choice.at("text").get<std::string>();
        if (choice.contains("logprobs") && !choice.at("logprobs").is_null()) {
            const json& lp = choice.at("logprobs");
            if (lp.contains("tokens") && lp.contains("token_logprobs")) {
                std::vector<TokenLogprob> tokens;
                const json& toks = lp.at("tokens");
                const json& vals = lp.at("token_logprobs");
                for (size_t i = 0; i < toks.size() && i < vals.size(); ++i)
                    tokens.push_back({toks[i].get<std::string>(),
                                      vals[i].is_null() ? 0.0 : vals[i].get<double>()});
                cand.token_logprobs = std::move(tokens);
            }
            if (lp.contains("top_logprobs") && lp.at("top_logprobs").is_array()) {
                for (const auto& entry : lp.at("top_logprobs")) {
                    if (entry.is_null())
                        cand.top_logprobs.emplace_back();
                    else
                        cand.top_logprobs.push_back(
                            entry.get<std::map<std::string, double>>());
                }
            }
        }
        return cand;
    }
};

HttpBackend::HttpBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::id() const {
    return "http:" + impl_->config.base_url + ":" + impl_->config.model;
}

Completion HttpBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    Impl::InflightGuard guard(*impl_);

    Completion completion;
    completion.model_id = impl_->config.model;

    json greedy = impl_->post_completions(
        impl_->request_body(request, 1, request.temperature));
    if (greedy.contains("model")) completion.model_id = greedy["model"].get<std::string>();
    for (const auto& choice : greedy.at("choices"))
        completion.candidates.push_back(Impl::parse_choice(choice));
    if (completion.candidates.empty())
        throw BackendError("backend returned no choices");

    if (request.candidate_count > 1) {
        // Extra candidates come from one sampled request; the greedy
        // completion stays pinned at rank 1 and exact duplicates of it are
        // dropped.
        json sampled = impl_->post_completions(impl_->request_body(
            request, request.candidate_count, impl_->config.sampling_temperature));
        for (const auto& choice : sampled.at("choices")) {
            Candidate cand = Impl::parse_choice(choice);
            if (cand.text == completion.candidates.front().text) continue;
            completion.candidates.push_back(std::move(cand));
            if (completion.candidates.size() >=
                static_cast<size_t>(request.candidate_count))
                break;
        }
    }
    return completion;
}

// ---------------------------------------------------------------------------
// Caching backend

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::string cache_dir)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)) {}

std::string CachingBackend::id() const { return inner_->id(); }

Completion CachingBackend::complete(const CompletionRequest& request) {
    namespace fs = std::filesystem;
    std::string key = request_cache_key(inner_->id(), request);
    fs::path dir = fs::path(cache_dir_) / key.substr(0, 2);
    fs::path path = dir / (key + ".json");

    if (fs::exists(path)) {
        json j;
        try {
            j = json::parse(read_file(path.string()));
            Completion completion = completion_from_json(j);
            completion.cached = true;
            return completion;
        } catch (const json::exception& e) {
            throw ParseError("cache entry corrupt: " + path.string() + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("cache entry corrupt: " + path.string() + ": " + e.what());
        }
    }

    Completion completion = inner_->complete(request);
    completion.cached = false;
    fs::create_directories(dir);
    write_file_atomic(path.string(), completion_to_json(completion).dump());
    return completion;
}

} // namespace explcal
