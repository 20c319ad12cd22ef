#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "explcal/corpus.hpp"
#include "explcal/errors.hpp"
#include "explcal/rng.hpp"
#include "explcal/text.hpp"

using namespace explcal;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    auto dir = fs::temp_directory_path() / "explcal_corpus_tests";
    fs::create_directories(dir);
    return (dir / name).string();
}

Example nli_example(const std::string& id, const std::string& label) {
    Example ex;
    ex.id = id;
    ex.task = TaskKind::Nli;
    ex.context = {{"A person in black tries to knock the last pin down in a game of bowling."}};
    ex.question = "The person is a girl.";
    ex.gold_answer = label;
    ex.gold_explanation = "not every person is a girl";
    return ex;
}

// The eight-sentence synthetic record with the bridge question about the
// student, as a raw JSONL line.
const char* kSynthRecord = R"({"id":"fig3","task":"synth","context":[["Christopher agrees with Kevin.","Tiffany agrees with Matthew.","Mary hangs out with Danielle.","James hangs out with Thomas.","Kevin is a student.","Matthew is a plumber.","Danielle is a student.","Thomas is a plumber."]],"question":"Who hangs out with a student?","answer":"Mary","explanation":"Danielle is a student and Mary hangs out with Danielle"})";

} // namespace

TEST_CASE("round trip preserves two NLI records in order") {
    Dataset ds;
    ds.task = TaskKind::Nli;
    ds.examples = {nli_example("a", "Neither"), nli_example("b", "True")};
    std::string path = temp_path("nli2.jsonl");
    save_dataset(ds, path);
    Dataset loaded = load_dataset(path, TaskKind::Nli);
    REQUIRE(loaded.examples.size() == 2);
    CHECK(loaded.examples[0] == ds.examples[0]);
    CHECK(loaded.examples[1] == ds.examples[1]);
}

TEST_CASE("duplicate ids report both line numbers") {
    std::string text;
    for (int i = 0; i < 8; ++i) {
        Dataset one;
        one.task = TaskKind::Nli;
        std::string id = (i == 2 || i == 6) ? "q1" : "q" + std::to_string(10 + i);
        one.examples = {nli_example(id, "True")};
        text += dataset_to_jsonl(one);
    }
    std::string path = temp_path("dups.jsonl");
    write_file(path, text);
    try {
        load_dataset(path, TaskKind::Nli);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        CHECK(msg.find("q1") != std::string::npos);
        CHECK(msg.find("lines 3 and 7") != std::string::npos);
    }
}

TEST_CASE("malformed line names its line number") {
    std::string path = temp_path("broken.jsonl");
    Dataset one;
    one.task = TaskKind::Nli;
    one.examples = {nli_example("ok", "False")};
    write_file(path, dataset_to_jsonl(one) + "{not json\n");
    try {
        load_dataset(path, TaskKind::Nli);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("NLI label outside the three-way set is rejected") {
    std::string path = temp_path("badlabel.jsonl");
    write_file(path,
               R"({"id":"x","task":"nli","context":[["p."]],"question":"h","answer":"Maybe","explanation":null})"
               "\n");
    CHECK_THROWS_AS(load_dataset(path, TaskKind::Nli), ValidationError);
}

TEST_CASE("synthetic record loads with eight context sentences") {
    std::string path = temp_path("fig3.jsonl");
    write_file(path, std::string(kSynthRecord) + "\n");
    Dataset ds = load_dataset(path, TaskKind::SynthQA);
    REQUIRE(ds.examples.size() == 1);
    const Example& ex = ds.examples[0];
    CHECK(ex.context.size() == 1);
    CHECK(ex.context[0].size() == 8);
    CHECK(ex.question == "Who hangs out with a student?");
    CHECK(ex.gold_answer == "Mary");
    REQUIRE(ex.gold_explanation.has_value());
}

TEST_CASE("empty dataset saves to an empty file") {
    Dataset ds;
    ds.task = TaskKind::ContextQA;
    std::string path = temp_path("empty.jsonl");
    save_dataset(ds, path);
    CHECK(read_file(path).empty());
    CHECK(load_dataset(path, TaskKind::ContextQA).examples.empty());
}

TEST_CASE("unicode content round-trips byte-identically") {
    Dataset ds;
    ds.task = TaskKind::ContextQA;
    Example ex;
    ex.id = "u1";
    ex.task = TaskKind::ContextQA;
    ex.context = {{"Yōko Shōji is a manga artist.", "She wrote Seito Shokun!"},
                  {"Mobara is a city in Chiba."}};
    ex.question = "Where was Yōko Shōji born?";
    ex.gold_answer = "Mobara";
    ex.gold_explanation = "First, Yōko Shōji was born in Mobara.";
    ex.aliases = {"Mobara, Chiba"};
    ds.examples = {ex};

    std::string path1 = temp_path("uni1.jsonl");
    std::string path2 = temp_path("uni2.jsonl");
    save_dataset(ds, path1);
    Dataset loaded = load_dataset(path1, TaskKind::ContextQA);
    CHECK(loaded.examples[0] == ex);
    save_dataset(loaded, path2);
    CHECK(read_file(path1) == read_file(path2));
}

TEST_CASE("random datasets round trip exactly") {
    Rng rng(2024);
    const std::vector<std::string> words = {"alpha", "beta",  "gamma", "delta",
                                            "épée",  "naïve", "zeta",  "omega"};
    auto word = [&] { return words[rng.bounded(words.size())]; };
    for (int trial = 0; trial < 25; ++trial) {
        Dataset ds;
        ds.task = TaskKind::ContextQA;
        size_t n = 1 + rng.bounded(6);
        for (size_t i = 0; i < n; ++i) {
            Example ex;
            ex.id = "r" + std::to_string(trial) + "-" + std::to_string(i);
            ex.task = TaskKind::ContextQA;
            size_t paras = 1 + rng.bounded(3);
            for (size_t p = 0; p < paras; ++p) {
                std::vector<std::string> sentences;
                size_t s_count = 1 + rng.bounded(3);
                for (size_t s = 0; s < s_count; ++s)
                    sentences.push_back(word() + " " + word() + ".");
                ex.context.push_back(std::move(sentences));
            }
            ex.question = word() + "?";
            ex.gold_answer = word();
            if (rng.bernoulli(0.5)) ex.gold_explanation = "First, " + word() + ".";
            if (rng.bernoulli(0.3)) ex.aliases = {word()};
            ds.examples.push_back(std::move(ex));
        }
        std::string path = temp_path("rand.jsonl");
        save_dataset(ds, path);
        Dataset loaded = load_dataset(path, TaskKind::ContextQA);
        loaded.name = ds.name;
        CHECK(loaded.examples == ds.examples);
    }
}

TEST_CASE("task mismatch between record and dataset is rejected") {
    std::string path = temp_path("mismatch.jsonl");
    write_file(path, std::string(kSynthRecord) + "\n");
    CHECK_THROWS_AS(load_dataset(path, TaskKind::Nli), ValidationError);
}

TEST_CASE("empty sentences fail validation") {
    Example ex = nli_example("e", "True");
    ex.context = {{"  "}};
    CHECK_THROWS_AS(validate_example(ex), ValidationError);
    ex.context = {};
    CHECK_THROWS_AS(validate_example(ex), ValidationError);
}
