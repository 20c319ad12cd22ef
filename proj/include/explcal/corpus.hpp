#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace explcal {

enum class TaskKind { SynthQA, ContextQA, Nli };

std::string_view task_name(TaskKind task);               // "synth" | "context_qa" | "nli"
TaskKind task_from_name(std::string_view name);          // throws ValidationError

inline constexpr std::array<std::string_view, 3> kNliLabels = {"True", "False", "Neither"};

// Index into kNliLabels; nullopt when the string is not one of the three
// canonical labels (after case folding).
std::optional<int> nli_label_index(std::string_view label);

// One task instance. Context is paragraphs-of-sentences: the factuality
// score maximizes over paragraphs and the synthetic checker matches whole
// sentences, so we never re-segment text downstream. For NLI the context
// is a single paragraph holding the premise; `question` holds the
// hypothesis and `gold_answer` one of {True, False, Neither}.
struct Example {
    std::string id;
    TaskKind task = TaskKind::SynthQA;
    std::vector<std::vector<std::string>> context;
    std::string question;
    std::string gold_answer;
    std::optional<std::string> gold_explanation;
    std::vector<std::string> aliases;  // extra acceptable gold answers (ContextQA)

    bool operator==(const Example&) const = default;
};

struct Dataset {
    std::string name;
    TaskKind task = TaskKind::SynthQA;
    std::vector<Example> examples;

    bool operator==(const Dataset&) const = default;
};

struct ShotGroup {
    int group_id = 0;
    std::vector<Example> shots;
};

// Throws ValidationError describing the first violated invariant.
void validate_example(const Example& ex);

// JSONL, one object per line: {"id", "task", "context", "question",
// "answer", "explanation", ["aliases"]}. File order is preserved; ids must
// be unique. Malformed lines and duplicate ids report line numbers.
Dataset load_dataset(const std::string& path, TaskKind task);
void save_dataset(const Dataset& dataset, const std::string& path);

std::string dataset_to_jsonl(const Dataset& dataset);
Dataset dataset_from_jsonl(std::string_view text, TaskKind task, const std::string& origin);

} // namespace explcal
