#include "explcal/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "explcal/errors.hpp"
#include "explcal/rng.hpp"
#include "explcal/text.hpp"

namespace explcal {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        if (j.contains("task")) cfg.task = task_from_name(j["task"].get<std::string>());
        if (j.contains("paradigm"))
            cfg.paradigm.kind = paradigm_from_name(j["paradigm"].get<std::string>());
        if (j.contains("step_trigger")) cfg.paradigm.step_trigger = j["step_trigger"].get<bool>();
        if (j.contains("train_pool")) cfg.train_pool = j["train_pool"].get<std::string>();
        if (j.contains("test")) cfg.test = j["test"].get<std::string>();
        if (j.contains("extras")) cfg.extras = j["extras"].get<std::string>();
        if (j.contains("shots")) cfg.shots = j["shots"].get<int>();
        if (j.contains("groups")) cfg.groups = j["groups"].get<int>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
        if (j.contains("candidate_count")) cfg.candidate_count = j["candidate_count"].get<int>();
        if (j.contains("max_tokens")) cfg.max_tokens = j["max_tokens"].get<int>();
        if (j.contains("per_token_mean")) cfg.per_token_mean = j["per_token_mean"].get<bool>();
        if (j.contains("calibration_mode"))
            cfg.calibration_mode = j["calibration_mode"].get<std::string>();
        if (j.contains("calibration_labeled"))
            cfg.calibration_labeled = j["calibration_labeled"].get<int>();
        if (j.contains("selection_mode"))
            cfg.selection_mode = j["selection_mode"].get<std::string>();
        if (j.contains("coverage")) cfg.coverage = j["coverage"].get<double>();
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("out_root")) cfg.out_root = j["out_root"].get<std::string>();
        if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
        if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
        if (j.contains("error_budget")) cfg.error_budget = j["error_budget"].get<int>();
        if (j.contains("backend")) {
            const json& b = j["backend"];
            if (b.contains("type")) cfg.backend.type = b["type"].get<std::string>();
            if (b.contains("scenario")) {
                const json& s = b["scenario"];
                MockScenario& sc = cfg.backend.scenario;
                if (s.contains("seed")) sc.seed = s["seed"].get<uint64_t>();
                if (s.contains("correct_rate")) sc.correct_rate = s["correct_rate"].get<double>();
                if (s.contains("factual_given_correct"))
                    sc.factual_given_correct = s["factual_given_correct"].get<double>();
                if (s.contains("factual_given_incorrect"))
                    sc.factual_given_incorrect = s["factual_given_incorrect"].get<double>();
                if (s.contains("consistent_rate"))
                    sc.consistent_rate = s["consistent_rate"].get<double>();
                if (s.contains("candidate_count"))
                    sc.candidate_count = s["candidate_count"].get<int>();
            }
            if (b.contains("base_url")) cfg.backend.http.base_url = b["base_url"].get<std::string>();
            if (b.contains("model")) cfg.backend.http.model = b["model"].get<std::string>();
            if (b.contains("requests_per_minute"))
                cfg.backend.http.requests_per_minute = b["requests_per_minute"].get<double>();
            if (b.contains("max_in_flight"))
                cfg.backend.http.max_in_flight = b["max_in_flight"].get<int>();
            if (b.contains("max_attempts"))
                cfg.backend.http.max_attempts = b["max_attempts"].get<int>();
            if (b.contains("replay_file")) cfg.backend.replay_file = b["replay_file"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad config field: ") + e.what());
    }
    return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    json j;
    j["task"] = std::string(task_name(cfg.task));
    j["paradigm"] = std::string(paradigm_name(cfg.paradigm.kind));
    j["step_trigger"] = cfg.paradigm.step_trigger;
    j["train_pool"] = cfg.train_pool;
    j["test"] = cfg.test;
    j["extras"] = cfg.extras;
    j["shots"] = cfg.shots;
    j["groups"] = cfg.groups;
    j["seed"] = cfg.seed;
    j["candidate_count"] = cfg.candidate_count;
    j["max_tokens"] = cfg.max_tokens;
    j["per_token_mean"] = cfg.per_token_mean;
    j["calibration_mode"] = cfg.calibration_mode;
    j["calibration_labeled"] = cfg.calibration_labeled;
    j["selection_mode"] = cfg.selection_mode;
    j["coverage"] = cfg.coverage;
    j["out_root"] = cfg.out_root;
    j["workers"] = cfg.workers;
    j["error_budget"] = cfg.error_budget;
    json b;
    b["type"] = cfg.backend.type;
    if (cfg.backend.type == "mock") {
        const MockScenario& sc = cfg.backend.scenario;
        b["scenario"] = {{"seed", sc.seed},
                         {"correct_rate", sc.correct_rate},
                         {"factual_given_correct", sc.factual_given_correct},
                         {"factual_given_incorrect", sc.factual_given_incorrect},
                         {"consistent_rate", sc.consistent_rate},
                         {"candidate_count", sc.candidate_count}};
    } else if (cfg.backend.type == "http") {
        b["base_url"] = cfg.backend.http.base_url;
        b["model"] = cfg.backend.http.model;
        b["requests_per_minute"] = cfg.backend.http.requests_per_minute;
        b["max_in_flight"] = cfg.backend.http.max_in_flight;
        b["max_attempts"] = cfg.backend.http.max_attempts;
    } else if (cfg.backend.type == "replay") {
        b["replay_file"] = cfg.backend.replay_file;
    }
    j["backend"] = std::move(b);
    return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
    return sha256_hex(config_to_json_text(cfg));
}

void validate_config(const ExperimentConfig& cfg) {
    validate_paradigm(cfg.paradigm);
    if (cfg.groups < 1) throw ValidationError("groups must be >= 1");
    if (cfg.shots < 0) throw ValidationError("shots must be >= 0 (0 selects the default)");
    if (cfg.candidate_count < 1 || cfg.candidate_count > 5)
        throw ValidationError("candidate_count must be within [1, 5]");
    if (cfg.workers < 1) throw ValidationError("workers must be >= 1");
    if (cfg.error_budget < 0) throw ValidationError("error_budget must be >= 0");
    if (cfg.coverage <= 0.0 || cfg.coverage > 1.0)
        throw ValidationError("coverage must be within (0, 1]");
    auto one_of = [](const std::string& value, std::initializer_list<const char*> allowed) {
        for (const char* entry : allowed)
            if (value == entry) return true;
        return false;
    };
    if (!one_of(cfg.calibration_mode, {"none", "prob_only", "explanation"}))
        throw ValidationError("unknown calibration_mode \"" + cfg.calibration_mode + "\"");
    if (!one_of(cfg.selection_mode, {"none", "reject_factual", "threshold"}))
        throw ValidationError("unknown selection_mode \"" + cfg.selection_mode + "\"");
    if (cfg.calibration_mode == "explanation" && !cfg.paradigm.uses_explanations())
        throw ValidationError(
            "calibration_mode \"explanation\" needs an explanation paradigm (e_p or p_e)");
    if (cfg.selection_mode == "reject_factual") {
        if (cfg.task != TaskKind::SynthQA)
            throw ValidationError("reject_factual selection requires the synth task");
        if (!cfg.paradigm.uses_explanations())
            throw ValidationError("reject_factual selection needs an explanation paradigm");
    }
    if (cfg.backend.type != "mock" && cfg.backend.type != "http" &&
        cfg.backend.type != "replay")
        throw ValidationError("unknown backend type \"" + cfg.backend.type + "\"");
}

std::shared_ptr<Backend> make_backend(const ExperimentConfig& cfg,
                                      const std::vector<const Dataset*>& mock_examples) {
    std::shared_ptr<Backend> inner;
    if (cfg.backend.type == "mock") {
        auto mock = std::make_shared<MockBackend>(cfg.backend.scenario, cfg.paradigm);
        for (const Dataset* dataset : mock_examples) mock->register_examples(*dataset);
        inner = std::move(mock);
    } else if (cfg.backend.type == "replay") {
        inner = std::make_shared<ReplayBackend>(cfg.backend.replay_file);
    } else {
        inner = std::make_shared<HttpBackend>(cfg.backend.http);
    }
    std::string cache_dir = cfg.cache_dir;
    if (cache_dir.empty()) {
        const char* env = std::getenv("EXPLCAL_CACHE_DIR");
        if (env && *env) cache_dir = env;
    }
    if (cache_dir.empty()) return inner;
    return std::make_shared<CachingBackend>(std::move(inner), cache_dir);
}

// ---------------------------------------------------------------------------
// Group evaluation

namespace {

void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto body = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int count = std::min<int>(workers, static_cast<int>(n));
    pool.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct ErrorBudget {
    std::atomic<int> failures{0};
    int limit = 5;

    // Returns true while the run may continue.
    bool note_failure() { return failures.fetch_add(1) + 1 <= limit; }
};

ExampleRecord evaluate_example(const ExperimentConfig& cfg, Backend& backend,
                               const ShotGroup& group, const Example& example,
                               ErrorBudget& budget) {
    ExampleRecord record;
    record.group_id = group.group_id;
    record.example_id = example.id;

    Prompt prompt = render_prompt(group, example, cfg.paradigm);
    CompletionRequest request;
    request.prompt_text = prompt.text;
    request.example_id = example.id;
    request.max_tokens = cfg.max_tokens;
    request.temperature = 0.0;
    request.candidate_count = cfg.candidate_count;
    request.want_token_logprobs = true;
    request.stop_sequences = {"\n\n"};
    record.request_hash = request_cache_key(backend.id(), request);

    Completion completion;
    try {
        completion = backend.complete(request);
    } catch (const BackendError& e) {
        record.backend_error = e.what();
        if (!budget.note_failure())
            throw BudgetExceeded("backend error budget exceeded (" +
                                 std::to_string(budget.limit) + "): last failure on \"" +
                                 example.id + "\": " + e.what());
        Prediction failed;
        failed.example_id = example.id;
        record.candidates.push_back(failed);
        record.candidate_assessments.push_back(assess_prediction(example, failed));
        record.correct = false;
        return record;
    }

    for (const auto& candidate : completion.candidates) {
        Prediction pred = parse_completion(cfg.task, cfg.paradigm, candidate.text);
        pred.example_id = example.id;
        extract_confidence(candidate, pred, cfg.task, cfg.per_token_mean);
        record.candidate_assessments.push_back(assess_prediction(example, pred));
        record.candidates.push_back(std::move(pred));
    }
    record.correct = judge_correct(record.primary(), example);
    return record;
}

std::vector<ExampleRecord> run_one_group(const ExperimentConfig& cfg, Backend& backend,
                                         const ShotGroup& group, const Dataset& testset,
                                         ErrorBudget& budget) {
    std::vector<ExampleRecord> records(testset.examples.size());
    parallel_for(testset.examples.size(), cfg.workers, [&](size_t i) {
        records[i] = evaluate_example(cfg, backend, group, testset.examples[i], budget);
    });
    std::sort(records.begin(), records.end(),
              [](const ExampleRecord& a, const ExampleRecord& b) {
                  return a.example_id < b.example_id;
              });
    return records;
}

// Verdict confidence: parse failures count as confidence 0; a parsed
// prediction without logprobs stays unset and AUC is skipped for the run.
std::optional<double> verdict_confidence(const Prediction& pred) {
    if (!pred.parse_ok) return 0.0;
    return pred.confidence;
}

std::vector<Verdict> group_verdicts(const std::vector<ExampleRecord>& records) {
    std::vector<Verdict> verdicts;
    verdicts.reserve(records.size());
    for (const auto& record : records)
        verdicts.push_back(
            {record.example_id, record.correct, verdict_confidence(record.primary())});
    return verdicts;
}

bool confidences_complete(const std::vector<Verdict>& verdicts) {
    for (const auto& verdict : verdicts)
        if (!verdict.confidence) return false;
    return true;
}

std::vector<PredictionBundle> group_bundles(const std::vector<ExampleRecord>& records) {
    std::vector<PredictionBundle> bundles;
    bundles.reserve(records.size());
    for (const auto& record : records)
        bundles.push_back({record.primary(), record.candidate_assessments.front(),
                           record.correct});
    return bundles;
}

GroupMetrics group_metrics(const ExperimentConfig& cfg, const ShotGroup& group,
                           const std::vector<ExampleRecord>& records) {
    GroupMetrics metrics;
    metrics.group_id = group.group_id;
    auto verdicts = group_verdicts(records);
    metrics.metrics.emplace_back("accuracy", accuracy(verdicts));

    if (cfg.task == TaskKind::SynthQA && cfg.paradigm.uses_explanations()) {
        std::vector<std::pair<std::string, ReliabilityAssessment>> assessments;
        for (const auto& record : records)
            assessments.emplace_back(record.example_id,
                                     record.candidate_assessments.front());
        CongruenceStats stats = congruence(verdicts, assessments);
        metrics.metrics.emplace_back("fac_rate", stats.fac_rate);
        metrics.metrics.emplace_back("con_rate", stats.con_rate);
        metrics.metrics.emplace_back("acc_eq_fac", stats.acc_eq_fac);
        metrics.metrics.emplace_back("acc_eq_con", stats.acc_eq_con);
    }
    if (confidences_complete(verdicts) && !verdicts.empty()) {
        metrics.metrics.emplace_back("auc", coverage_accuracy(verdicts).auc);
        if (cfg.selection_mode == "threshold") {
            std::vector<Prediction> preds;
            for (const auto& record : records) {
                Prediction p = record.primary();
                p.confidence = verdict_confidence(p);
                preds.push_back(std::move(p));
            }
            auto selected = select_by_threshold(preds, cfg.coverage);
            std::set<std::string> chosen(selected.begin(), selected.end());
            double correct = 0;
            for (const auto& record : records)
                if (chosen.count(record.example_id) && record.correct) ++correct;
            metrics.metrics.emplace_back(
                "acc_at_coverage",
                selected.empty() ? 0.0 : correct / static_cast<double>(selected.size()));
        }
    }
    return metrics;
}

// ---------------------------------------------------------------------------
// Output files

std::string utc_timestamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

std::string resolve_out_dir(const ExperimentConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    return (fs::path(cfg.out_root) /
            (config_hash(cfg).substr(0, 12) + "-" + utc_timestamp()))
        .string();
}

json record_to_json(const ExampleRecord& record) {
    const Prediction& pred = record.primary();
    const ReliabilityAssessment& assessment = record.candidate_assessments.front();
    json j;
    j["group_id"] = record.group_id;
    j["example_id"] = record.example_id;
    j["request_hash"] = record.request_hash;
    j["raw_text"] = pred.raw_text;
    j["parse_ok"] = pred.parse_ok;
    j["answer"] = pred.answer;
    if (pred.explanation) j["explanation"] = *pred.explanation;
    if (pred.confidence) j["confidence"] = *pred.confidence;
    if (pred.label_probs)
        j["label_probs"] = std::vector<double>(pred.label_probs->begin(),
                                               pred.label_probs->end());
    if (assessment.factual) j["factual"] = *assessment.factual;
    if (assessment.consistent) j["consistent"] = *assessment.consistent;
    if (assessment.factuality_score) j["factuality_score"] = *assessment.factuality_score;
    j["correct"] = record.correct;
    if (!record.backend_error.empty()) j["backend_error"] = record.backend_error;
    return j;
}

void write_common_outputs(const std::string& out_dir, const ExperimentConfig& cfg,
                          const RunReport& report) {
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "config.json").string(), config_to_json_text(cfg));
    write_file((fs::path(out_dir) / "report.json").string(), report_to_json(report));
    write_file((fs::path(out_dir) / "report.txt").string(), render_report_table(report));
}

void write_predictions(const std::string& out_dir, const std::vector<GroupRun>& groups) {
    std::string lines;
    for (const auto& group : groups)
        for (const auto& record : group.records) {
            lines += record_to_json(record).dump();
            lines += '\n';
        }
    write_file((fs::path(out_dir) / "predictions.jsonl").string(), lines);
}

void write_group_curve(const std::string& out_dir, const std::string& name,
                       const std::vector<Verdict>& verdicts) {
    if (!confidences_complete(verdicts) || verdicts.empty()) return;
    fs::create_directories(fs::path(out_dir) / "curves");
    write_file((fs::path(out_dir) / "curves" / (name + ".csv")).string(),
               curve_to_csv(coverage_accuracy(verdicts)));
}

} // namespace

std::vector<GroupRun> run_groups(const ExperimentConfig& cfg, Backend& backend,
                                 const Dataset& pool, const Dataset& testset) {
    int k = cfg.shots > 0 ? cfg.shots : default_shot_count(cfg.task);
    auto shot_groups = sample_shot_groups(pool, k, cfg.groups, cfg.seed,
                                          cfg.paradigm.uses_explanations());
    ErrorBudget budget;
    budget.limit = cfg.error_budget;
    std::vector<GroupRun> runs;
    runs.reserve(shot_groups.size());
    for (auto& group : shot_groups) {
        GroupRun run;
        run.records = run_one_group(cfg, backend, group, testset, budget);
        run.shots = std::move(group);
        runs.push_back(std::move(run));
    }
    return runs;
}

// ---------------------------------------------------------------------------
// Commands

std::string cmd_generate(const GenerateArgs& args) {
    if (args.n < 1) throw ValidationError("generate needs n >= 1");
    if (args.out.empty()) throw ValidationError("generate needs an output path");
    synth::Pools pools = synth::Pools::builtin();
    if (!args.names_file.empty()) pools.names = synth::load_pool_file(args.names_file);
    if (!args.verbs_file.empty()) pools.verbs = synth::load_pool_file(args.verbs_file);
    if (!args.professions_file.empty())
        pools.professions = synth::load_pool_file(args.professions_file);
    Dataset ds = synth::generate(args.seed, args.n, args.style, pools);
    save_dataset(ds, args.out);
    return args.out;
}

RunOutput cmd_run(const ExperimentConfig& cfg) {
    validate_config(cfg);
    Dataset pool = load_dataset(cfg.train_pool, cfg.task);
    Dataset testset = load_dataset(cfg.test, cfg.task);
    auto backend = make_backend(cfg, {&testset});

    auto groups = run_groups(cfg, *backend, pool, testset);

    std::vector<GroupMetrics> metrics;
    for (const auto& group : groups)
        metrics.push_back(group_metrics(cfg, group.shots, group.records));
    RunReport report = aggregate(metrics);

    std::string out_dir = resolve_out_dir(cfg);
    write_common_outputs(out_dir, cfg, report);
    write_predictions(out_dir, groups);
    for (const auto& group : groups)
        write_group_curve(out_dir, "group" + std::to_string(group.shots.group_id),
                          group_verdicts(group.records));
    return {std::move(report), std::move(out_dir)};
}

RunOutput cmd_calibrate(const ExperimentConfig& cfg) {
    validate_config(cfg);
    if (cfg.extras.empty())
        throw ValidationError("calibrate needs an extras dataset of labeled examples");
    if (cfg.calibration_labeled < 2)
        throw ValidationError("calibration_labeled must be >= 2");
    Dataset pool = load_dataset(cfg.train_pool, cfg.task);
    Dataset testset = load_dataset(cfg.test, cfg.task);
    Dataset extras_pool = load_dataset(cfg.extras, cfg.task);
    if (extras_pool.examples.size() < static_cast<size_t>(cfg.calibration_labeled))
        throw ValidationError("extras pool holds " +
                              std::to_string(extras_pool.examples.size()) +
                              " examples but calibration_labeled is " +
                              std::to_string(cfg.calibration_labeled));
    auto backend = make_backend(cfg, {&testset, &extras_pool});

    int k = cfg.shots > 0 ? cfg.shots : default_shot_count(cfg.task);
    auto shot_groups = sample_shot_groups(pool, k, cfg.groups, cfg.seed,
                                          cfg.paradigm.uses_explanations());
    ErrorBudget budget;
    budget.limit = cfg.error_budget;

    std::string out_dir = resolve_out_dir(cfg);
    fs::create_directories(fs::path(out_dir) / "params");

    const bool is_nli = cfg.task == TaskKind::Nli;
    Dataset sorted_test = testset;
    std::sort(sorted_test.examples.begin(), sorted_test.examples.end(),
              [](const Example& a, const Example& b) { return a.id < b.id; });
    std::vector<GroupMetrics> metrics;
    std::vector<GroupRun> test_runs;

    for (const auto& group : shot_groups) {
        // Each trial trains on its own resampled extras subset; the shot
        // group provides the prompts for both the extras and the test set.
        Rng trial_rng(mix64(cfg.seed, 0xca11b000ull + static_cast<uint64_t>(group.group_id)));
        auto extra_idx = trial_rng.sample_without_replacement(
            extras_pool.examples.size(), static_cast<size_t>(cfg.calibration_labeled));
        Dataset extras;
        extras.task = extras_pool.task;
        extras.name = extras_pool.name;
        for (size_t i : extra_idx) extras.examples.push_back(extras_pool.examples[i]);

        auto extra_records = run_one_group(cfg, *backend, group, extras, budget);
        std::vector<std::pair<std::string, PredictionBundle>> extra_bundles;
        {
            auto bundles = group_bundles(extra_records);
            for (size_t i = 0; i < extra_records.size(); ++i)
                extra_bundles.emplace_back(extra_records[i].example_id, bundles[i]);
        }
        auto records = build_records(extras, extra_bundles);

        CalibratorParams prob_params = train_calibrator(records, false, cfg.seed);
        CalibratorParams expl_params = train_calibrator(records, true, cfg.seed);
        prob_params.task = std::string(task_name(cfg.task));
        expl_params.task = prob_params.task;
        std::string gid = std::to_string(group.group_id);
        write_file((fs::path(out_dir) / "params" / ("group" + gid + "_prob.json")).string(),
                   params_to_json(prob_params));
        write_file((fs::path(out_dir) / "params" / ("group" + gid + "_expl.json")).string(),
                   params_to_json(expl_params));

        auto test_records = run_one_group(cfg, *backend, group, testset, budget);
        auto test_bundles = group_bundles(test_records);

        // Raw confidences use the same imputation as calibration features
        // so all three rankings cover every item.
        std::vector<Verdict> raw;
        for (size_t i = 0; i < test_records.size(); ++i) {
            CalibrationRecord feat = record_features(cfg.task, test_bundles[i]);
            double conf = is_nli ? *std::max_element(feat.p.begin(), feat.p.end())
                                 : feat.p.front();
            raw.push_back({test_records[i].example_id, test_records[i].correct, conf});
        }

        auto prob_preds = apply_to_testset(prob_params, cfg.task, test_bundles);
        auto expl_preds = apply_to_testset(expl_params, cfg.task, test_bundles);

        // Test records are sorted by id; align the gold examples the same
        // way so NLI correctness can be re-judged on calibrated labels.
        auto verdicts_for = [&](const std::vector<Prediction>& preds) {
            std::vector<Verdict> verdicts;
            for (size_t i = 0; i < preds.size(); ++i) {
                bool correct = is_nli ? judge_correct(preds[i], sorted_test.examples[i])
                                      : test_records[i].correct;
                verdicts.push_back({preds[i].example_id, correct, preds[i].confidence});
            }
            return verdicts;
        };
        auto prob_verdicts = verdicts_for(prob_preds);
        auto expl_verdicts = verdicts_for(expl_preds);

        GroupMetrics gm;
        gm.group_id = group.group_id;
        if (is_nli) {
            gm.metrics.emplace_back("acc_raw", accuracy(raw));
            gm.metrics.emplace_back("acc_prob_cal", accuracy(prob_verdicts));
            gm.metrics.emplace_back("acc_expl_cal", accuracy(expl_verdicts));
        } else {
            gm.metrics.emplace_back("accuracy", accuracy(raw));
            gm.metrics.emplace_back("auc_raw", coverage_accuracy(raw).auc);
            gm.metrics.emplace_back("auc_prob_cal", coverage_accuracy(prob_verdicts).auc);
            gm.metrics.emplace_back("auc_expl_cal", coverage_accuracy(expl_verdicts).auc);
            write_group_curve(out_dir, "group" + gid + "_raw", raw);
            write_group_curve(out_dir, "group" + gid + "_prob", prob_verdicts);
            write_group_curve(out_dir, "group" + gid + "_expl", expl_verdicts);
        }
        metrics.push_back(std::move(gm));

        GroupRun run;
        run.shots = group;
        run.records = std::move(test_records);
        test_runs.push_back(std::move(run));
    }

    RunReport report = aggregate(metrics);
    write_common_outputs(out_dir, cfg, report);
    write_predictions(out_dir, test_runs);
    return {std::move(report), std::move(out_dir)};
}

RunOutput cmd_reject(const ExperimentConfig& cfg) {
    validate_config(cfg);
    if (cfg.task != TaskKind::SynthQA)
        throw ValidationError("reject runs on the synth task only");
    if (!cfg.paradigm.uses_explanations())
        throw ValidationError("reject needs an explanation paradigm (e_p or p_e)");
    if (cfg.candidate_count < 2)
        throw ValidationError("reject needs candidate_count >= 2 to have anything to reject");

    Dataset pool = load_dataset(cfg.train_pool, cfg.task);
    Dataset testset = load_dataset(cfg.test, cfg.task);
    auto backend = make_backend(cfg, {&testset});
    auto groups = run_groups(cfg, *backend, pool, testset);

    std::map<std::string, const Example*> gold;
    for (const auto& ex : testset.examples) gold[ex.id] = &ex;

    std::string out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);
    std::string selection_lines;

    std::vector<GroupMetrics> metrics;
    for (const auto& group : groups) {
        double pre = 0, post = 0, fallbacks = 0;
        for (const auto& record : group.records) {
            std::vector<CandidateAnswer> candidates;
            for (size_t i = 0; i < record.candidates.size(); ++i)
                candidates.push_back({static_cast<int>(i) + 1, record.candidates[i],
                                      record.candidate_assessments[i]});
            SelectionResult result = reject_until_factual(candidates);
            bool post_correct = judge_correct(result.chosen, *gold.at(record.example_id));
            pre += record.correct;
            post += post_correct;
            fallbacks += result.fallback_used;

            json line;
            line["group_id"] = record.group_id;
            line["example_id"] = record.example_id;
            line["request_hash"] = record.request_hash;
            line["chosen_rank"] = result.chosen_rank;
            line["fallback_used"] = result.fallback_used;
            line["pre_correct"] = static_cast<bool>(record.correct);
            line["post_correct"] = post_correct;
            selection_lines += line.dump();
            selection_lines += '\n';
        }
        double n = static_cast<double>(group.records.size());
        GroupMetrics gm;
        gm.group_id = group.shots.group_id;
        gm.metrics.emplace_back("acc_pre", pre / n);
        gm.metrics.emplace_back("acc_post", post / n);
        gm.metrics.emplace_back("fallback_rate", fallbacks / n);
        metrics.push_back(std::move(gm));
    }

    RunReport report = aggregate(metrics);
    write_common_outputs(out_dir, cfg, report);
    write_predictions(out_dir, groups);
    write_file((fs::path(out_dir) / "selection.jsonl").string(), selection_lines);
    return {std::move(report), std::move(out_dir)};
}

std::string cmd_report(const std::string& report_json_path) {
    RunReport report = report_from_json(read_file(report_json_path));
    return render_report_table(report);
}

} // namespace explcal
