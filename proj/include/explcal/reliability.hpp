#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "explcal/corpus.hpp"
#include "explcal/parsing.hpp"

namespace explcal {

// Lowercased word tokens, split on non-alphanumeric runs; no stemming or
// stopword removal so scores stay reproducible without linguistic
// resources.
struct TokenizedText {
    std::vector<std::string> tokens;
};

TokenizedText tokenize(std::string_view text);

struct ReliabilityAssessment {
    std::optional<bool> factual;            // exact rule check (synth)
    std::optional<bool> consistent;         // exact rule check (synth)
    std::optional<double> factuality_score; // lexical approximation v in [0,1]
};

// True iff the explanation matches the question's intent and entails the
// answer: N2 == N4 and N1 == N3, P2 == P1 and V2 == V1 (case-folded,
// articles stripped).
bool check_synth_consistency(const SynthParse& parse);

// True iff both rendered clauses "N1 is [a] P2." and "N2 V2 N3." exactly
// match a context sentence (case-folded, terminal punctuation normalized).
bool check_synth_factuality(const std::vector<std::vector<std::string>>& context,
                            const SynthParse& parse);

// max over paragraphs of |E ∩ P| / |E|, where |E ∩ P| counts E's token
// positions whose token occurs in the paragraph (duplicates in E each
// count). Empty sentences score 0 and set *empty_flag when provided.
double factuality_score_sentence(const TokenizedText& sentence,
                                 std::span<const TokenizedText> paragraphs,
                                 bool* empty_flag = nullptr);

// min over sentences; an empty sentence list (failed parse) scores 0.
double factuality_score_explanation(std::span<const TokenizedText> sentences,
                                    std::span<const TokenizedText> paragraphs);

// Premise-as-context variant for NLI: |E ∩ P| / |E| against the single
// premise paragraph.
double nli_premise_overlap(const TokenizedText& explanation, const TokenizedText& premise,
                           bool* empty_flag = nullptr);

// Task dispatch used by the runner: exact boolean checks for synthetic QA
// (an unextractable explanation counts as neither factual nor consistent),
// lexical scores for the other tasks. Synthetic assessments also carry
// factuality as a 0/1 score so calibration can consume any task uniformly.
ReliabilityAssessment assess_prediction(const Example& example, const Prediction& prediction);

} // namespace explcal
