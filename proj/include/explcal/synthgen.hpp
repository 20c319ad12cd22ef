#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "explcal/corpus.hpp"

namespace explcal::synth {

// Word pools backing generation. The defaults are compiled in (50 given
// names, 30 third-person-singular verb phrases, 30 single-word
// professions); custom pools can be loaded one-entry-per-line.
struct Pools {
    std::vector<std::string> names;
    std::vector<std::string> verbs;
    std::vector<std::string> professions;

    static const Pools& builtin();
};

std::vector<std::string> load_pool_file(const std::string& path);

enum class ExplanationStyle { Standard, Alternative };

std::string_view style_name(ExplanationStyle style);
ExplanationStyle style_from_name(std::string_view name);

// One two-sentence reasoning chain: "A [verb] B. B is [a/an profession]."
struct ChainTemplate {
    std::string subject;     // A
    std::string object;      // B
    std::string verb;
    std::string profession;

    std::string relation_sentence() const;    // "A [verb] B."
    std::string profession_sentence() const;  // "B is a [profession]."
};

struct SynthInstance {
    std::array<ChainTemplate, 4> chains;
    int target_index = 0;                  // which chain the question asks about
    std::vector<int> sentence_order;       // permutation of the 8 rendered sentences
    std::string question;                  // "Who [verb] a [profession]?"
    std::string answer;                    // target chain's subject
    std::string gold_explanation;
    ExplanationStyle style = ExplanationStyle::Standard;

    std::vector<std::string> context_sentences() const;  // in sentence_order
    Example to_example(const std::string& id) const;
};

SynthInstance generate_instance(uint64_t seed, uint64_t index, ExplanationStyle style,
                                const Pools& pools = Pools::builtin());

// n examples with ids "synth-%06zu"; fully deterministic in (seed, n, style).
Dataset generate(uint64_t seed, size_t n, ExplanationStyle style = ExplanationStyle::Standard,
                 const Pools& pools = Pools::builtin());

// Each corruption minimally edits the gold explanation and/or answer and
// carries the exact checker outcome it forces. SwapAnswerName and
// SwapExplanationSubject leave the explanation grounded (factual stays
// true); HallucinateSentence reproduces the classic failure where the
// explanation asserts the question's profession for the wrong chain
// (consistent yet nonfactual). The profession/verb/object swaps break the
// grounding of a clause and with it the question-match rule, so both
// flags drop for those kinds.
enum class Corruption {
    SwapAnswerName,           // factual=true,  consistent=false
    SwapExplanationProfession,// factual=false, consistent=false
    SwapExplanationVerb,      // factual=false, consistent=false
    SwapExplanationSubject,   // factual=true,  consistent=false
    SwapExplanationObject,    // factual=false, consistent=false
    HallucinateSentence,      // factual=false, consistent=true
};

std::string_view corruption_name(Corruption kind);

struct CorruptedExample {
    Example example;
    bool expect_factual = false;
    bool expect_consistent = false;
};

CorruptedExample corrupt(const SynthInstance& instance, Corruption kind, uint64_t seed,
                         const Pools& pools = Pools::builtin());

} // namespace explcal::synth
