#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "explcal/backend.hpp"
#include "explcal/calibration.hpp"
#include "explcal/corpus.hpp"
#include "explcal/evaluation.hpp"
#include "explcal/parsing.hpp"
#include "explcal/prompting.hpp"
#include "explcal/reliability.hpp"
#include "explcal/selection.hpp"
#include "explcal/synthgen.hpp"

namespace explcal {

// Raised when a run exceeds its backend error budget; maps to exit code 2.
class BudgetExceeded : public std::runtime_error {
public:
    explicit BudgetExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

struct BackendSpec {
    std::string type = "mock";  // mock | http | replay
    MockScenario scenario;      // mock
    HttpBackendConfig http;     // http
    std::string replay_file;    // replay
};

struct ExperimentConfig {
    TaskKind task = TaskKind::SynthQA;
    Paradigm paradigm;
    std::string train_pool;  // shot pool path
    std::string test;        // test set path
    std::string extras;      // labeled extras path (calibration)
    int shots = 0;           // 0 -> per-task default (16 / 6 / 32)
    int groups = kDefaultGroupCount;
    uint64_t seed = 0;
    BackendSpec backend;
    int candidate_count = 1;
    int max_tokens = 96;
    bool per_token_mean = false;
    std::string calibration_mode = "none";  // none | prob_only | explanation
    int calibration_labeled = 64;           // L per training trial
    std::string selection_mode = "none";    // none | reject_factual | threshold
    double coverage = 1.0;                  // threshold selection
    std::string out_dir;                    // empty -> out_root/<config hash>-<timestamp>
    std::string out_root = "runs";
    std::string cache_dir;                  // empty -> $EXPLCAL_CACHE_DIR if set
    int workers = 1;
    int error_budget = 5;
};

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);
void validate_config(const ExperimentConfig& config);

// Backend per the spec, wrapped in the response cache when a cache
// directory is configured.
std::shared_ptr<Backend> make_backend(const ExperimentConfig& config,
                                      const std::vector<const Dataset*>& mock_examples);

// Everything recorded about one (group, example) evaluation.
struct ExampleRecord {
    int group_id = 0;
    std::string example_id;
    std::string request_hash;
    std::vector<Prediction> candidates;  // parsed, rank order; [0] is primary
    std::vector<ReliabilityAssessment> candidate_assessments;
    bool correct = false;                // primary candidate vs gold
    std::string backend_error;           // non-empty when the request failed

    const Prediction& primary() const { return candidates.front(); }
};

struct GroupRun {
    ShotGroup shots;
    std::vector<ExampleRecord> records;  // sorted by example id
};

// Render -> complete -> parse -> assess -> judge for every test example in
// every shot group. Backend failures are recorded per example until the
// error budget is exhausted, then BudgetExceeded is thrown.
std::vector<GroupRun> run_groups(const ExperimentConfig& config, Backend& backend,
                                 const Dataset& pool, const Dataset& testset);

struct RunOutput {
    RunReport report;
    std::string out_dir;
};

struct GenerateArgs {
    size_t n = 1000;
    uint64_t seed = 0;
    synth::ExplanationStyle style = synth::ExplanationStyle::Standard;
    std::string out;
    std::string names_file;        // optional pool overrides
    std::string verbs_file;
    std::string professions_file;
};

std::string cmd_generate(const GenerateArgs& args);
RunOutput cmd_run(const ExperimentConfig& config);
RunOutput cmd_calibrate(const ExperimentConfig& config);
RunOutput cmd_reject(const ExperimentConfig& config);
// Renders a saved report.json as the aligned text table.
std::string cmd_report(const std::string& report_json_path);

} // namespace explcal
