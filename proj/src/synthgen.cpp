#include "explcal/synthgen.hpp"

#include <algorithm>
#include <cstdio>

#include "explcal/errors.hpp"
#include "explcal/rng.hpp"
#include "explcal/text.hpp"

namespace explcal::synth {

namespace {

const std::vector<std::string> kNames = {
    "Christopher", "Kevin", "Tiffany", "Matthew", "Mary", "Danielle", "James",
    "Thomas", "Jason", "Stephanie", "Jonathan", "Daniel", "Richard", "Lisa",
    "Kelly", "Angela", "Jessica", "Rachel", "Megan", "Adam", "Nicholas",
    "Elizabeth", "Robert", "Anthony", "Justin", "John", "Eric", "Amy", "Sarah",
    "Brandon", "Michael", "David", "Laura", "Karen", "Steven", "Emily",
    "Patrick", "Olivia", "Henry", "Grace", "Peter", "Alice", "Samuel",
    "Victoria", "Benjamin", "Natalie", "Charles", "Diana", "Edward", "Monica"};

// Third-person singular, transitive. Multiword phrases must not contain
// " a ", " an ", or " and " so parsed questions and explanations stay
// unambiguous.
const std::vector<std::string> kVerbs = {
    "agrees with", "hangs out with", "punches",    "helps",      "blames",
    "calls",       "supervises",     "believes",   "answers",    "admires",
    "follows",     "supports",       "teaches",    "visits",     "trusts",
    "mentors",     "avoids",         "respects",   "envies",     "greets",
    "hires",       "ignores",        "imitates",   "interviews", "invites",
    "observes",    "praises",        "quotes",     "remembers",  "salutes"};

const std::vector<std::string> kProfessions = {
    "student", "plumber", "typist",  "tailor",    "chef",    "farmer",
    "governor", "musician", "engineer", "pilot",   "doctor",  "lawyer",
    "teacher",  "nurse",    "actor",    "singer",  "dancer",  "painter",
    "barber",   "butcher",  "waiter",   "banker",  "judge",   "sailor",
    "soldier",  "writer",   "architect", "dentist", "florist", "gardener"};

std::string make_explanation(ExplanationStyle style, const std::string& is_subject,
                             const std::string& profession, const std::string& rel_subject,
                             const std::string& verb, const std::string& rel_object) {
    std::string is_clause = is_subject + " is " +
                            std::string(indefinite_article(profession)) + " " + profession;
    std::string rel_clause = rel_subject + " " + verb + " " + rel_object;
    if (style == ExplanationStyle::Standard) return is_clause + " and " + rel_clause;
    return rel_clause + " and " + is_clause;
}

// Chain layout: the two verbs and two professions fill the four chains as
// the full 2x2 grid, so exactly one chain matches any (verb, profession)
// question.
constexpr int kVerbOfChain[4] = {0, 0, 1, 1};
constexpr int kProfOfChain[4] = {0, 1, 0, 1};

int sibling_same_verb(int chain) { return chain ^ 1; }       // same verb, other profession
int sibling_same_profession(int chain) { return chain ^ 2; } // same profession, other verb

} // namespace

const Pools& Pools::builtin() {
    static const Pools pools{kNames, kVerbs, kProfessions};
    return pools;
}

std::vector<std::string> load_pool_file(const std::string& path) {
    std::vector<std::string> out;
    std::string data = read_file(path);
    size_t pos = 0;
    while (pos <= data.size()) {
        size_t nl = data.find('\n', pos);
        std::string_view line(data.data() + pos,
                              (nl == std::string::npos ? data.size() : nl) - pos);
        pos = (nl == std::string::npos) ? data.size() + 1 : nl + 1;
        auto entry = trim(line);
        if (!entry.empty()) out.emplace_back(entry);
    }
    if (out.empty()) throw ValidationError("pool file has no entries: " + path);
    return out;
}

std::string_view style_name(ExplanationStyle style) {
    return style == ExplanationStyle::Standard ? "standard" : "alternative";
}

ExplanationStyle style_from_name(std::string_view name) {
    if (name == "standard") return ExplanationStyle::Standard;
    if (name == "alternative") return ExplanationStyle::Alternative;
    throw ValidationError("unknown explanation style \"" + std::string(name) + "\"");
}

std::string ChainTemplate::relation_sentence() const {
    return subject + " " + verb + " " + object + ".";
}

std::string ChainTemplate::profession_sentence() const {
    return object + " is " + std::string(indefinite_article(profession)) + " " +
           profession + ".";
}

std::vector<std::string> SynthInstance::context_sentences() const {
    // Sentence 2c is chain c's relation sentence, 2c+1 its profession
    // sentence; sentence_order permutes those indices.
    std::vector<std::string> out;
    out.reserve(sentence_order.size());
    for (int idx : sentence_order) {
        const ChainTemplate& chain = chains[static_cast<size_t>(idx / 2)];
        out.push_back(idx % 2 == 0 ? chain.relation_sentence()
                                   : chain.profession_sentence());
    }
    return out;
}

Example SynthInstance::to_example(const std::string& id) const {
    Example ex;
    ex.id = id;
    ex.task = TaskKind::SynthQA;
    ex.context = {context_sentences()};
    ex.question = question;
    ex.gold_answer = answer;
    ex.gold_explanation = gold_explanation;
    return ex;
}

SynthInstance generate_instance(uint64_t seed, uint64_t index, ExplanationStyle style,
                                const Pools& pools) {
    if (pools.names.size() < 8) throw ValidationError("name pool needs at least 8 entries");
    if (pools.verbs.size() < 2) throw ValidationError("verb pool needs at least 2 entries");
    if (pools.professions.size() < 2)
        throw ValidationError("profession pool needs at least 2 entries");

    Rng rng(mix64(seed, index));

    auto verb_idx = rng.sample_without_replacement(pools.verbs.size(), 2);
    auto prof_idx = rng.sample_without_replacement(pools.professions.size(), 2);
    auto name_idx = rng.sample_without_replacement(pools.names.size(), 8);

    SynthInstance inst;
    inst.style = style;
    for (int c = 0; c < 4; ++c) {
        inst.chains[c].subject = pools.names[name_idx[static_cast<size_t>(2 * c)]];
        inst.chains[c].object = pools.names[name_idx[static_cast<size_t>(2 * c + 1)]];
        inst.chains[c].verb = pools.verbs[verb_idx[static_cast<size_t>(kVerbOfChain[c])]];
        inst.chains[c].profession =
            pools.professions[prof_idx[static_cast<size_t>(kProfOfChain[c])]];
    }
    inst.target_index = static_cast<int>(rng.bounded(4));

    const ChainTemplate& target = inst.chains[static_cast<size_t>(inst.target_index)];
    inst.question = "Who " + target.verb + " " +
                    std::string(indefinite_article(target.profession)) + " " +
                    target.profession + "?";
    inst.answer = target.subject;
    inst.gold_explanation = make_explanation(style, target.object, target.profession,
                                             target.subject, target.verb, target.object);

    inst.sentence_order.resize(8);
    for (int i = 0; i < 8; ++i) inst.sentence_order[static_cast<size_t>(i)] = i;
    rng.shuffle(inst.sentence_order);
    return inst;
}

Dataset generate(uint64_t seed, size_t n, ExplanationStyle style, const Pools& pools) {
    Dataset ds;
    ds.name = "synth";
    ds.task = TaskKind::SynthQA;
    ds.examples.reserve(n);
    char id[32];
    for (size_t i = 0; i < n; ++i) {
        std::snprintf(id, sizeof(id), "synth-%06zu", i);
        ds.examples.push_back(generate_instance(seed, i, style, pools).to_example(id));
    }
    return ds;
}

std::string_view corruption_name(Corruption kind) {
    switch (kind) {
        case Corruption::SwapAnswerName: return "swap_answer_name";
        case Corruption::SwapExplanationProfession: return "swap_explanation_profession";
        case Corruption::SwapExplanationVerb: return "swap_explanation_verb";
        case Corruption::SwapExplanationSubject: return "swap_explanation_subject";
        case Corruption::SwapExplanationObject: return "swap_explanation_object";
        case Corruption::HallucinateSentence: return "hallucinate_sentence";
    }
    return "unknown";
}

namespace {

// Pool entry distinct from everything the instance already uses.
std::string pick_unused(Rng& rng, const std::vector<std::string>& pool,
                        const std::vector<std::string>& used, const char* what) {
    std::vector<const std::string*> candidates;
    for (const auto& entry : pool)
        if (std::find(used.begin(), used.end(), entry) == used.end())
            candidates.push_back(&entry);
    if (candidates.empty())
        throw ValidationError(std::string("no replacement ") + what +
                              " available in pool");
    return *candidates[static_cast<size_t>(rng.bounded(candidates.size()))];
}

} // namespace

CorruptedExample corrupt(const SynthInstance& instance, Corruption kind, uint64_t seed,
                         const Pools& pools) {
    Rng rng(mix64(seed, fnv1a64(corruption_name(kind))));
    const ChainTemplate& gold = instance.chains[static_cast<size_t>(instance.target_index)];
    const ChainTemplate& same_verb =
        instance.chains[static_cast<size_t>(sibling_same_verb(instance.target_index))];
    const ChainTemplate& same_prof =
        instance.chains[static_cast<size_t>(sibling_same_profession(instance.target_index))];

    CorruptedExample out;
    out.example = instance.to_example(std::string(corruption_name(kind)));
    auto set_explanation = [&](const std::string& is_subject, const std::string& profession,
                               const std::string& rel_subject, const std::string& verb,
                               const std::string& rel_object) {
        out.example.gold_explanation = make_explanation(
            instance.style, is_subject, profession, rel_subject, verb, rel_object);
    };

    switch (kind) {
        case Corruption::SwapAnswerName: {
            // Gold explanation, wrong name as the answer: entailment of the
            // answer breaks while both clauses stay grounded.
            std::vector<const ChainTemplate*> others;
            for (const auto& c : instance.chains)
                if (&c != &gold) others.push_back(&c);
            out.example.gold_answer =
                others[static_cast<size_t>(rng.bounded(others.size()))]->subject;
            out.expect_factual = true;
            out.expect_consistent = false;
            break;
        }
        case Corruption::SwapExplanationProfession: {
            std::string repl = pick_unused(
                rng, pools.professions,
                {gold.profession, same_verb.profession}, "profession");
            set_explanation(gold.object, repl, gold.subject, gold.verb, gold.object);
            out.expect_factual = false;
            out.expect_consistent = false;
            break;
        }
        case Corruption::SwapExplanationVerb: {
            std::string repl =
                pick_unused(rng, pools.verbs, {gold.verb, same_prof.verb}, "verb");
            set_explanation(gold.object, gold.profession, gold.subject, repl, gold.object);
            out.expect_factual = false;
            out.expect_consistent = false;
            break;
        }
        case Corruption::SwapExplanationSubject: {
            // The other holder of the question's profession: its profession
            // sentence is verbatim in the context, so the explanation stays
            // factual but no longer names the chain it answers with.
            set_explanation(same_prof.object, gold.profession, gold.subject, gold.verb,
                            gold.object);
            out.expect_factual = true;
            out.expect_consistent = false;
            break;
        }
        case Corruption::SwapExplanationObject: {
            set_explanation(gold.object, gold.profession, gold.subject, gold.verb,
                            same_verb.object);
            out.expect_factual = false;
            out.expect_consistent = false;
            break;
        }
        case Corruption::HallucinateSentence: {
            // Pick the same-verb distractor chain, answer with its subject,
            // and assert the question's profession for its object even
            // though the context says otherwise.
            out.example.gold_answer = same_verb.subject;
            set_explanation(same_verb.object, gold.profession, same_verb.subject,
                            same_verb.verb, same_verb.object);
            out.expect_factual = false;
            out.expect_consistent = true;
            break;
        }
    }
    return out;
}

} // namespace explcal::synth
