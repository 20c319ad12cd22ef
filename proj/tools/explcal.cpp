// explcal: offline-first experiment runner for few-shot prompting with
// explanations — synthetic data generation, prompted runs against a mock
// or OpenAI-compatible backend, explanation-based calibration, and
// factuality-based answer rejection.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "explcal/errors.hpp"
#include "explcal/runner.hpp"
#include "explcal/text.hpp"

namespace {

using namespace explcal;

struct CommonFlags {
    std::string config_path;
    std::string task;
    std::string paradigm;
    bool step_trigger = false;
    std::string train_pool;
    std::string test;
    std::string extras;
    int shots = -1;
    int groups = -1;
    int64_t seed = -1;
    int candidate_count = -1;
    int max_tokens = -1;
    std::string calibration_mode;
    int calibration_labeled = -1;
    std::string selection_mode;
    double coverage = -1.0;
    std::string out_dir;
    std::string cache_dir;
    int workers = -1;
    int error_budget = -1;
    // backend
    std::string backend_type;
    std::string base_url;
    std::string model;
    std::string replay_file;
    int64_t mock_seed = -1;
    double mock_correct = -1.0;
    double mock_fac_correct = -1.0;
    double mock_fac_incorrect = -1.0;
    double mock_consistent = -1.0;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "experiment config JSON file");
    cmd->add_option("--task", f.task, "synth | context_qa | nli");
    cmd->add_option("--paradigm", f.paradigm, "few_shot | e_p | p_e");
    cmd->add_flag("--step-trigger", f.step_trigger,
                  "prepend the step-by-step trigger to e_p exemplars");
    cmd->add_option("--train-pool", f.train_pool, "shot pool dataset (JSONL)");
    cmd->add_option("--test", f.test, "test dataset (JSONL)");
    cmd->add_option("--extras", f.extras, "labeled extras dataset (JSONL)");
    cmd->add_option("--shots", f.shots, "shots per group (default per task: 16/6/32)");
    cmd->add_option("--groups", f.groups, "number of shot groups (default 5)");
    cmd->add_option("--seed", f.seed, "experiment seed");
    cmd->add_option("--candidates", f.candidate_count, "candidates per completion (1-5)");
    cmd->add_option("--max-tokens", f.max_tokens, "completion token limit");
    cmd->add_option("--calibration", f.calibration_mode, "none | prob_only | explanation");
    cmd->add_option("--labeled", f.calibration_labeled, "labeled extras per trial");
    cmd->add_option("--selection", f.selection_mode, "none | reject_factual | threshold");
    cmd->add_option("--coverage", f.coverage, "answered fraction for threshold selection");
    cmd->add_option("--out-dir", f.out_dir, "output directory (default runs/<hash>-<time>)");
    cmd->add_option("--cache-dir", f.cache_dir,
                    "completion cache directory (default $EXPLCAL_CACHE_DIR)");
    cmd->add_option("--workers", f.workers, "concurrent example evaluations");
    cmd->add_option("--error-budget", f.error_budget, "backend failures before aborting");
    cmd->add_option("--backend", f.backend_type, "mock | http | replay");
    cmd->add_option("--base-url", f.base_url, "http backend base URL");
    cmd->add_option("--model", f.model, "http backend model name");
    cmd->add_option("--replay-file", f.replay_file, "replay backend fixture file");
    cmd->add_option("--mock-seed", f.mock_seed, "mock scenario seed");
    cmd->add_option("--mock-correct", f.mock_correct, "mock correct rate");
    cmd->add_option("--mock-factual-correct", f.mock_fac_correct,
                    "mock P(factual | correct)");
    cmd->add_option("--mock-factual-incorrect", f.mock_fac_incorrect,
                    "mock P(factual | incorrect)");
    cmd->add_option("--mock-consistent", f.mock_consistent, "mock consistent rate");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = config_from_json_text(read_file(f.config_path));
    if (!f.task.empty()) cfg.task = task_from_name(f.task);
    if (!f.paradigm.empty()) cfg.paradigm.kind = paradigm_from_name(f.paradigm);
    if (f.step_trigger) cfg.paradigm.step_trigger = true;
    if (!f.train_pool.empty()) cfg.train_pool = f.train_pool;
    if (!f.test.empty()) cfg.test = f.test;
    if (!f.extras.empty()) cfg.extras = f.extras;
    if (f.shots >= 0) cfg.shots = f.shots;
    if (f.groups >= 0) cfg.groups = f.groups;
    if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
    if (f.candidate_count >= 0) cfg.candidate_count = f.candidate_count;
    if (f.max_tokens >= 0) cfg.max_tokens = f.max_tokens;
    if (!f.calibration_mode.empty()) cfg.calibration_mode = f.calibration_mode;
    if (f.calibration_labeled >= 0) cfg.calibration_labeled = f.calibration_labeled;
    if (!f.selection_mode.empty()) cfg.selection_mode = f.selection_mode;
    if (f.coverage >= 0.0) cfg.coverage = f.coverage;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (!f.cache_dir.empty()) cfg.cache_dir = f.cache_dir;
    if (f.workers >= 0) cfg.workers = f.workers;
    if (f.error_budget >= 0) cfg.error_budget = f.error_budget;
    if (!f.backend_type.empty()) cfg.backend.type = f.backend_type;
    if (!f.base_url.empty()) cfg.backend.http.base_url = f.base_url;
    if (!f.model.empty()) cfg.backend.http.model = f.model;
    if (!f.replay_file.empty()) cfg.backend.replay_file = f.replay_file;
    if (f.mock_seed >= 0) cfg.backend.scenario.seed = static_cast<uint64_t>(f.mock_seed);
    if (f.mock_correct >= 0.0) cfg.backend.scenario.correct_rate = f.mock_correct;
    if (f.mock_fac_correct >= 0.0)
        cfg.backend.scenario.factual_given_correct = f.mock_fac_correct;
    if (f.mock_fac_incorrect >= 0.0)
        cfg.backend.scenario.factual_given_incorrect = f.mock_fac_incorrect;
    if (f.mock_consistent >= 0.0) cfg.backend.scenario.consistent_rate = f.mock_consistent;
    return cfg;
}

void print_outcome(const RunOutput& out) {
    std::cout << render_report_table(out.report);
    std::cout << "outputs: " << out.out_dir << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot prompting with explanations: generation, runs, "
                 "calibration, rejection"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate a synthetic QA dataset");
    GenerateArgs gen_args;
    std::string style = "standard";
    gen->add_option("--n", gen_args.n, "number of examples")->required();
    gen->add_option("--seed", gen_args.seed, "generation seed");
    gen->add_option("--style", style, "standard | alternative");
    gen->add_option("--out", gen_args.out, "output JSONL path")->required();
    gen->add_option("--names-file", gen_args.names_file, "name pool override (one per line)");
    gen->add_option("--verbs-file", gen_args.verbs_file, "verb pool override");
    gen->add_option("--professions-file", gen_args.professions_file,
                    "profession pool override");

    auto* run = app.add_subcommand("run", "prompted run over a test set");
    CommonFlags run_flags;
    add_common_flags(run, run_flags);

    auto* cal = app.add_subcommand("calibrate",
                                   "train and evaluate probability and explanation calibrators");
    CommonFlags cal_flags;
    add_common_flags(cal, cal_flags);

    auto* rej = app.add_subcommand("reject", "top-5 factuality rejection over candidates");
    CommonFlags rej_flags;
    add_common_flags(rej, rej_flags);

    auto* rep = app.add_subcommand("report", "render a saved report.json");
    std::string report_path;
    rep->add_option("report", report_path, "path to report.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_args.style = synth::style_from_name(style);
            std::string out = cmd_generate(gen_args);
            std::cout << "wrote " << out << "\n";
        } else if (run->parsed()) {
            print_outcome(cmd_run(resolve_config(run_flags)));
        } else if (cal->parsed()) {
            print_outcome(cmd_calibrate(resolve_config(cal_flags)));
        } else if (rej->parsed()) {
            print_outcome(cmd_reject(resolve_config(rej_flags)));
        } else if (rep->parsed()) {
            std::cout << cmd_report(report_path);
        }
    } catch (const BudgetExceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
