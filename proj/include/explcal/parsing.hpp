#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "explcal/backend.hpp"
#include "explcal/corpus.hpp"
#include "explcal/prompting.hpp"

namespace explcal {

// Canonical NLI label probability order matches kNliLabels:
// (True, False, Neither).
struct Prediction {
    std::string example_id;
    std::string answer;  // "" is the designated parse-failure token
    std::optional<std::string> explanation;
    std::vector<std::string> explanation_sentences;
    std::optional<double> confidence;                  // QA answer probability
    std::optional<std::array<double, 3>> label_probs;  // NLI class distribution
    bool parse_ok = false;
    std::string raw_text;
    // [begin, end) character span of the answer within raw_text, present
    // when parse_ok; used to locate the answer's token cover.
    std::optional<std::pair<size_t, size_t>> answer_span;
};

// Variables recovered from a synthetic-QA question/explanation/answer:
// question "Who V1 a P1?", explanation "N1 is P2 and N2 V2 N3" (or the
// clause-reversed alternative style), answer N4.
struct SynthParse {
    std::string n1, n2, n3, n4;
    std::string v1, v2;
    std::string p1, p2;
};

// Never throws on arbitrary completion text: anything that fails the
// paradigm's pattern comes back with parse_ok=false and an empty answer.
Prediction parse_completion(TaskKind task, const Paradigm& paradigm,
                            const std::string& completion_text);

// nullopt when the explanation deviates from the two-clause template;
// callers treat that as both unverifiable and ungrounded.
std::optional<SynthParse> extract_synth_variables(const std::string& question,
                                                  const Prediction& prediction);

// QA: joint probability of the answer-span tokens, or the per-token
// geometric mean when per_token_mean is set. NLI: distribution over the
// three labels, renormalized over per-position alternatives when the
// backend reports them, otherwise mass exp(lp) on the emitted label with
// the remainder split evenly. Leaves the fields unset when logprobs are
// missing or the prediction failed to parse.
void extract_confidence(const Candidate& candidate, Prediction& prediction, TaskKind task,
                        bool per_token_mean = false);

} // namespace explcal
