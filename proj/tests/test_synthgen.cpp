#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "explcal/corpus.hpp"
#include "explcal/synthgen.hpp"
#include "explcal/text.hpp"

using namespace explcal;
using namespace explcal::synth;

namespace {

// Counts whole-word occurrences of `word` across the rendered sentences.
int word_occurrences(const std::vector<std::string>& sentences, const std::string& word) {
    std::string target = ascii_lower(word);
    int count = 0;
    for (const auto& sentence : sentences)
        for (const auto& token : word_tokens(sentence))
            if (token == target) ++count;
    return count;
}

void check_structure(const SynthInstance& inst) {
    // 2 distinct verbs x 2 distinct professions, each pair exactly once.
    std::set<std::string> verbs, professions;
    std::set<std::pair<std::string, std::string>> pairs;
    std::set<std::string> names;
    for (const auto& chain : inst.chains) {
        verbs.insert(chain.verb);
        professions.insert(chain.profession);
        pairs.insert({chain.verb, chain.profession});
        names.insert(chain.subject);
        names.insert(chain.object);
        REQUIRE(chain.subject != chain.object);
    }
    REQUIRE(verbs.size() == 2);
    REQUIRE(professions.size() == 2);
    REQUIRE(pairs.size() == 4);
    REQUIRE(names.size() == 8);

    const ChainTemplate& target = inst.chains[inst.target_index];
    std::string article(indefinite_article(target.profession));
    REQUIRE(inst.question ==
            "Who " + target.verb + " " + article + " " + target.profession + "?");
    REQUIRE(inst.answer == target.subject);

    // Exactly one chain answers the question.
    int matching = 0;
    for (const auto& chain : inst.chains)
        if (chain.verb == target.verb && chain.profession == target.profession) ++matching;
    REQUIRE(matching == 1);

    std::string is_clause = target.object + " is " + article + " " + target.profession;
    std::string rel_clause = target.subject + " " + target.verb + " " + target.object;
    if (inst.style == ExplanationStyle::Standard)
        REQUIRE(inst.gold_explanation == is_clause + " and " + rel_clause);
    else
        REQUIRE(inst.gold_explanation == rel_clause + " and " + is_clause);

    auto sentences = inst.context_sentences();
    REQUIRE(sentences.size() == 8);
    // No reasoning shortcuts: the answer name shows up exactly once and the
    // asked-for profession exactly twice across the context.
    REQUIRE(word_occurrences(sentences, inst.answer) == 1);
    REQUIRE(word_occurrences(sentences, target.profession) == 2);
}

} // namespace

TEST_CASE("built-in pools have the documented sizes") {
    const Pools& pools = Pools::builtin();
    CHECK(pools.names.size() == 50);
    CHECK(pools.verbs.size() == 30);
    CHECK(pools.professions.size() == 30);
    std::set<std::string> unique_names(pools.names.begin(), pools.names.end());
    CHECK(unique_names.size() == 50);
    for (const auto& verb : pools.verbs) {
        CHECK(verb.find(" and ") == std::string::npos);
        CHECK(verb.find(" a ") == std::string::npos);
    }
    for (const auto& profession : pools.professions)
        CHECK(profession.find(' ') == std::string::npos);
}

TEST_CASE("generated instances satisfy every structural invariant") {
    for (auto style : {ExplanationStyle::Standard, ExplanationStyle::Alternative})
        for (uint64_t i = 0; i < 300; ++i)
            check_structure(generate_instance(41, i, style));
}

TEST_CASE("generation is byte-deterministic") {
    Dataset a = generate(7, 1000);
    Dataset b = generate(7, 1000);
    CHECK(dataset_to_jsonl(a) == dataset_to_jsonl(b));
    Dataset c = generate(8, 1000);
    CHECK(dataset_to_jsonl(a) != dataset_to_jsonl(c));
}

TEST_CASE("examples carry one paragraph of eight shuffled sentences") {
    Dataset ds = generate(3, 50);
    for (const auto& ex : ds.examples) {
        REQUIRE(ex.context.size() == 1);
        REQUIRE(ex.context[0].size() == 8);
        REQUIRE(ex.gold_explanation.has_value());
        validate_example(ex);
    }
    // The shuffle actually permutes: across 50 instances some must differ
    // from the unshuffled chain layout.
    int moved = 0;
    for (uint64_t i = 0; i < 50; ++i) {
        auto inst = generate_instance(3, i, ExplanationStyle::Standard);
        std::vector<int> identity{0, 1, 2, 3, 4, 5, 6, 7};
        if (inst.sentence_order != identity) ++moved;
    }
    CHECK(moved > 40);
}

TEST_CASE("vowel-initial professions take an") {
    CHECK(indefinite_article("engineer") == "an");
    CHECK(indefinite_article("student") == "a");
    ChainTemplate chain{"Amy", "Eric", "calls", "engineer"};
    CHECK(chain.profession_sentence() == "Eric is an engineer.");
}

TEST_CASE("corruptions force their documented flag pattern") {
    // Expected checker outcomes per kind, pinned here and re-verified
    // end-to-end in test_reliability and the acceptance suite.
    const std::map<Corruption, std::pair<bool, bool>> expected = {
        {Corruption::SwapAnswerName, {true, false}},
        {Corruption::SwapExplanationProfession, {false, false}},
        {Corruption::SwapExplanationVerb, {false, false}},
        {Corruption::SwapExplanationSubject, {true, false}},
        {Corruption::SwapExplanationObject, {false, false}},
        {Corruption::HallucinateSentence, {false, true}},
    };
    for (const auto& [kind, flags] : expected) {
        for (uint64_t i = 0; i < 50; ++i) {
            auto inst = generate_instance(99, i, ExplanationStyle::Standard);
            CorruptedExample corrupted = corrupt(inst, kind, 1234 + i);
            CHECK(corrupted.expect_factual == flags.first);
            CHECK(corrupted.expect_consistent == flags.second);
            // Corruptions leave the context untouched.
            CHECK(corrupted.example.context == inst.to_example("x").context);
        }
    }
}

TEST_CASE("swap_answer_name keeps the explanation and changes the answer") {
    auto inst = generate_instance(5, 0, ExplanationStyle::Standard);
    auto corrupted = corrupt(inst, Corruption::SwapAnswerName, 7);
    CHECK(corrupted.example.gold_answer != inst.answer);
    CHECK(*corrupted.example.gold_explanation == inst.gold_explanation);
    // The substitute is still an in-context name.
    bool found = false;
    for (const auto& chain : inst.chains)
        if (chain.subject == corrupted.example.gold_answer ||
            chain.object == corrupted.example.gold_answer)
            found = true;
    CHECK(found);
}

TEST_CASE("hallucinate_sentence asserts the asked profession for the wrong chain") {
    auto inst = generate_instance(6, 1, ExplanationStyle::Standard);
    const ChainTemplate& target = inst.chains[inst.target_index];
    auto corrupted = corrupt(inst, Corruption::HallucinateSentence, 7);
    CHECK(corrupted.example.gold_answer != inst.answer);
    // The corrupted explanation claims the question's profession...
    CHECK(corrupted.example.gold_explanation->find(target.profession) != std::string::npos);
    // ...for an object whose context sentence names the other profession.
    std::string is_clause =
        corrupted.example.gold_explanation->substr(0, corrupted.example.gold_explanation->find(" and "));
    bool clause_in_context = false;
    for (const auto& sentence : corrupted.example.context[0])
        if (same_sentence(sentence, is_clause)) clause_in_context = true;
    CHECK_FALSE(clause_in_context);
}

TEST_CASE("degenerate pools make corruption impossible") {
    Pools tiny = Pools::builtin();
    tiny.professions = {"student", "plumber"};  // no replacement left
    auto inst = generate_instance(11, 0, ExplanationStyle::Standard, tiny);
    CHECK_THROWS(corrupt(inst, Corruption::SwapExplanationProfession, 3, tiny));
}

TEST_CASE("pool files load one entry per line") {
    auto dir = std::filesystem::temp_directory_path() / "explcal_synth_tests";
    std::filesystem::create_directories(dir);
    std::string path = (dir / "pool.txt").string();
    write_file(path, "alpha\n\nbeta\n  gamma\n");
    auto entries = load_pool_file(path);
    REQUIRE(entries.size() == 3);
    CHECK(entries[0] == "alpha");
    CHECK(entries[2] == "gamma");
}
