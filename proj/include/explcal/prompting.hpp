#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "explcal/corpus.hpp"

namespace explcal {

enum class ParadigmKind { FewShot, ExplainThenPredict, PredictThenExplain };

struct Paradigm {
    ParadigmKind kind = ParadigmKind::FewShot;
    // Prepends "Let's think step by step." to exemplar explanations and to
    // the test stub; only meaningful for ExplainThenPredict.
    bool step_trigger = false;

    bool uses_explanations() const { return kind != ParadigmKind::FewShot; }
};

std::string_view paradigm_name(ParadigmKind kind);  // "few_shot" | "e_p" | "p_e"
ParadigmKind paradigm_from_name(std::string_view name);
void validate_paradigm(const Paradigm& paradigm);   // throws ValidationError

struct Prompt {
    std::string text;
    std::string test_example_id;
    Paradigm paradigm;
    int shot_group_id = 0;
};

inline constexpr std::string_view kStepTrigger = "Let's think step by step.";

// Paper-format shot counts: 16 for synthetic QA, 6 for contextual QA,
// 32 for NLI; five shot groups by default.
int default_shot_count(TaskKind task);
inline constexpr int kDefaultGroupCount = 5;

// g groups of k examples each, sampled without replacement within a group;
// groups are drawn independently, so overlap across groups is allowed.
// Deterministic in (pool, k, g, seed).
std::vector<ShotGroup> sample_shot_groups(const Dataset& pool, int k, int g, uint64_t seed,
                                          bool require_explanations);

// One exemplar block:
//   SYNTH       - sentences space-joined on one line, "Q: ...", answer line
//   ContextQA   - one line per paragraph, "Q: ...", answer line
//   NLI         - premise line, "Q: <hypothesis> True, False, or Neither?",
//                 answer line
// Answer lines by paradigm:
//   FewShot           "A: <answer>"
//   E-P synth         "A: Because <explanation>, the answer is <answer>."
//   E-P nli           "A: Because <explanation>, this answer is <answer>."
//   E-P context_qa    "A: <explanation> The answer is <answer>."
//   P-E synth/nli     "A: <answer>, because <explanation>."
//   P-E context_qa    "A: <answer>. The reasons are as follows. <explanation>"
std::string render_shot_block(const Example& shot, const Paradigm& paradigm);

// The test block ends with the answer-eliciting stub: "A: " for most
// combinations, "A: Because " for E-P on SYNTH/NLI so the completion
// continues with the explanation clause.
std::string render_test_block(const Example& test, const Paradigm& paradigm);

Prompt render_prompt(const ShotGroup& shots, const Example& test, const Paradigm& paradigm);

} // namespace explcal
