#include "explcal/prompting.hpp"

#include "explcal/errors.hpp"
#include "explcal/rng.hpp"
#include "explcal/text.hpp"

namespace explcal {

std::string_view paradigm_name(ParadigmKind kind) {
    switch (kind) {
        case ParadigmKind::FewShot: return "few_shot";
        case ParadigmKind::ExplainThenPredict: return "e_p";
        case ParadigmKind::PredictThenExplain: return "p_e";
    }
    return "few_shot";
}

ParadigmKind paradigm_from_name(std::string_view name) {
    if (name == "few_shot") return ParadigmKind::FewShot;
    if (name == "e_p") return ParadigmKind::ExplainThenPredict;
    if (name == "p_e") return ParadigmKind::PredictThenExplain;
    throw ValidationError("unknown paradigm \"" + std::string(name) +
                          "\" (expected few_shot, e_p, or p_e)");
}

void validate_paradigm(const Paradigm& paradigm) {
    if (paradigm.step_trigger && paradigm.kind != ParadigmKind::ExplainThenPredict)
        throw ValidationError("step_trigger is only supported for the e_p paradigm");
}

int default_shot_count(TaskKind task) {
    switch (task) {
        case TaskKind::SynthQA: return 16;
        case TaskKind::ContextQA: return 6;
        case TaskKind::Nli: return 32;
    }
    return 16;
}

std::vector<ShotGroup> sample_shot_groups(const Dataset& pool, int k, int g, uint64_t seed,
                                          bool require_explanations) {
    if (k <= 0 || g <= 0) throw ValidationError("shot count and group count must be positive");
    if (pool.examples.size() < static_cast<size_t>(k))
        throw ValidationError("shot pool has " + std::to_string(pool.examples.size()) +
                              " examples but " + std::to_string(k) + " shots were requested");
    if (require_explanations) {
        std::string missing;
        for (const auto& ex : pool.examples)
            if (!ex.gold_explanation) missing += (missing.empty() ? "" : ", ") + ex.id;
        if (!missing.empty())
            throw ValidationError("pool examples missing gold explanations: " + missing);
    }

    std::vector<ShotGroup> groups;
    groups.reserve(static_cast<size_t>(g));
    for (int gi = 0; gi < g; ++gi) {
        Rng rng(mix64(seed, 0x73686f74ull + static_cast<uint64_t>(gi)));
        auto idx = rng.sample_without_replacement(pool.examples.size(),
                                                  static_cast<size_t>(k));
        ShotGroup group;
        group.group_id = gi;
        group.shots.reserve(idx.size());
        for (size_t i : idx) group.shots.push_back(pool.examples[i]);
        groups.push_back(std::move(group));
    }
    return groups;
}

namespace {

std::string context_lines(const Example& ex) {
    std::string out;
    if (ex.task == TaskKind::SynthQA) {
        out += join(ex.context.front(), " ");
        out += '\n';
    } else {
        for (const auto& para : ex.context) {
            out += join(para, " ");
            out += '\n';
        }
    }
    return out;
}

std::string question_line(const Example& ex) {
    if (ex.task == TaskKind::Nli)
        return "Q: " + ex.question + " True, False, or Neither?\n";
    return "Q: " + ex.question + "\n";
}

std::string require_explanation(const Example& ex) {
    if (!ex.gold_explanation || trim(*ex.gold_explanation).empty())
        throw ValidationError("example \"" + ex.id +
                              "\" has no gold explanation for an explanation paradigm");
    return *ex.gold_explanation;
}

std::string answer_line(const Example& ex, const Paradigm& paradigm) {
    std::string line = "A: ";
    if (paradigm.step_trigger) line += std::string(kStepTrigger) + " ";
    switch (paradigm.kind) {
        case ParadigmKind::FewShot:
            line += ex.gold_answer;
            break;
        case ParadigmKind::ExplainThenPredict: {
            std::string expl = require_explanation(ex);
            if (ex.task == TaskKind::ContextQA)
                line += expl + " The answer is " + ex.gold_answer + ".";
            else if (ex.task == TaskKind::Nli)
                line += "Because " + expl + ", this answer is " + ex.gold_answer + ".";
            else
                line += "Because " + expl + ", the answer is " + ex.gold_answer + ".";
            break;
        }
        case ParadigmKind::PredictThenExplain: {
            std::string expl = require_explanation(ex);
            if (ex.task == TaskKind::ContextQA)
                line += ex.gold_answer + ". The reasons are as follows. " + expl;
            else
                line += ex.gold_answer + ", because " + expl + ".";
            break;
        }
    }
    line += '\n';
    return line;
}

} // namespace

std::string render_shot_block(const Example& shot, const Paradigm& paradigm) {
    validate_paradigm(paradigm);
    return context_lines(shot) + question_line(shot) + answer_line(shot, paradigm);
}

std::string render_test_block(const Example& test, const Paradigm& paradigm) {
    validate_paradigm(paradigm);
    std::string stub = "A: ";
    if (paradigm.step_trigger) stub += std::string(kStepTrigger) + " ";
    if (paradigm.kind == ParadigmKind::ExplainThenPredict &&
        test.task != TaskKind::ContextQA)
        stub += "Because ";
    return context_lines(test) + question_line(test) + stub;
}

Prompt render_prompt(const ShotGroup& shots, const Example& test, const Paradigm& paradigm) {
    validate_paradigm(paradigm);
    Prompt prompt;
    prompt.test_example_id = test.id;
    prompt.paradigm = paradigm;
    prompt.shot_group_id = shots.group_id;
    for (const auto& shot : shots.shots) {
        prompt.text += render_shot_block(shot, paradigm);
        prompt.text += '\n';
    }
    prompt.text += render_test_block(test, paradigm);
    return prompt;
}

} // namespace explcal
