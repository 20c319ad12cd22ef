#include "explcal/corpus.hpp"

#include <filesystem>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "explcal/errors.hpp"
#include "explcal/text.hpp"

namespace explcal {

using nlohmann::json;

std::string_view task_name(TaskKind task) {
    switch (task) {
        case TaskKind::SynthQA: return "synth";
        case TaskKind::ContextQA: return "context_qa";
        case TaskKind::Nli: return "nli";
    }
    return "synth";
}

TaskKind task_from_name(std::string_view name) {
    if (name == "synth") return TaskKind::SynthQA;
    if (name == "context_qa") return TaskKind::ContextQA;
    if (name == "nli") return TaskKind::Nli;
    throw ValidationError("unknown task \"" + std::string(name) +
                          "\" (expected synth, context_qa, or nli)");
}

std::optional<int> nli_label_index(std::string_view label) {
    std::string folded = ascii_lower(trim(label));
    for (size_t i = 0; i < kNliLabels.size(); ++i)
        if (folded == ascii_lower(kNliLabels[i])) return static_cast<int>(i);
    return std::nullopt;
}

void validate_example(const Example& ex) {
    if (ex.id.empty()) throw ValidationError("example with empty id");
    if (ex.context.empty())
        throw ValidationError("example \"" + ex.id + "\": context is empty");
    for (const auto& para : ex.context) {
        if (para.empty())
            throw ValidationError("example \"" + ex.id + "\": empty paragraph");
        for (const auto& sent : para)
            if (trim(sent).empty())
                throw ValidationError("example \"" + ex.id + "\": empty sentence");
    }
    if (ex.task == TaskKind::Nli) {
        bool canonical = false;
        for (auto l : kNliLabels) canonical |= (ex.gold_answer == l);
        if (!canonical)
            throw ValidationError("example \"" + ex.id + "\": NLI answer \"" +
                                  ex.gold_answer +
                                  "\" is not one of True/False/Neither");
    }
}

namespace {

json example_to_json(const Example& ex) {
    json j;
    j["id"] = ex.id;
    j["task"] = std::string(task_name(ex.task));
    j["context"] = ex.context;
    j["question"] = ex.question;
    j["answer"] = ex.gold_answer;
    j["explanation"] = ex.gold_explanation ? json(*ex.gold_explanation) : json(nullptr);
    if (!ex.aliases.empty()) j["aliases"] = ex.aliases;
    return j;
}

Example example_from_json(const json& j, TaskKind expected_task) {
    Example ex;
    ex.id = j.at("id").get<std::string>();
    ex.task = task_from_name(j.at("task").get<std::string>());
    if (ex.task != expected_task)
        throw ValidationError("example \"" + ex.id + "\": task \"" +
                              std::string(task_name(ex.task)) +
                              "\" does not match dataset task \"" +
                              std::string(task_name(expected_task)) + "\"");
    ex.context = j.at("context").get<std::vector<std::vector<std::string>>>();
    ex.question = j.at("question").get<std::string>();
    ex.gold_answer = j.at("answer").get<std::string>();
    if (j.contains("explanation") && !j.at("explanation").is_null())
        ex.gold_explanation = j.at("explanation").get<std::string>();
    if (j.contains("aliases") && !j.at("aliases").is_null())
        ex.aliases = j.at("aliases").get<std::vector<std::string>>();
    validate_example(ex);
    return ex;
}

} // namespace

std::string dataset_to_jsonl(const Dataset& dataset) {
    std::string out;
    for (const auto& ex : dataset.examples) {
        out += example_to_json(ex).dump();
        out += '\n';
    }
    return out;
}

Dataset dataset_from_jsonl(std::string_view text, TaskKind task, const std::string& origin) {
    Dataset ds;
    ds.name = origin;
    ds.task = task;
    std::unordered_map<std::string, size_t> seen;  // id -> line number
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": malformed record: " + e.what());
        }
        Example ex;
        try {
            ex = example_from_json(j, task);
        } catch (const json::exception& e) {
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": bad record field: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
        auto [it, inserted] = seen.emplace(ex.id, line_no);
        if (!inserted)
            throw ValidationError(origin + ": duplicate id \"" + ex.id + "\" on lines " +
                                  std::to_string(it->second) + " and " +
                                  std::to_string(line_no));
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

Dataset load_dataset(const std::string& path, TaskKind task) {
    if (!std::filesystem::exists(path))
        throw IoError("dataset file not found: " + path);
    Dataset ds = dataset_from_jsonl(read_file(path), task, path);
    ds.name = std::filesystem::path(path).stem().string();
    return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    write_file(path, dataset_to_jsonl(dataset));
}

} // namespace explcal
