#include "explcal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "explcal/errors.hpp"

namespace explcal {

using nlohmann::json;

namespace {

constexpr double kLearningRate = 0.1;
constexpr int kMaxIterations = 2000;
constexpr double kL2Penalty = 1e-4;
constexpr double kGradTolerance = 1e-6;

std::vector<double> feature_vector(const CalibratorParams& params,
                                   const std::vector<double>& p, std::optional<double> v) {
    if (params.use_v != v.has_value())
        throw ValidationError(params.use_v
                                  ? "calibrator expects a factuality factor v"
                                  : "calibrator was trained without a factuality factor");
    std::vector<double> x = p;
    if (v) x.push_back(*v);
    if (static_cast<int>(x.size()) != params.feature_dim())
        throw ValidationError("calibrator feature shape mismatch: got " +
                              std::to_string(x.size()) + ", expected " +
                              std::to_string(params.feature_dim()));
    return x;
}

std::vector<double> softmax(std::vector<double> logits) {
    double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& z : logits) {
        z = std::exp(z - peak);
        total += z;
    }
    for (double& z : logits) z /= total;
    return logits;
}

std::vector<double> forward(const CalibratorParams& params, const std::vector<double>& x) {
    std::vector<double> logits(params.b);
    for (size_t c = 0; c < params.w.size(); ++c)
        for (size_t f = 0; f < params.w[c].size(); ++f)
            logits[c] += params.w[c][f] * x[f];
    return softmax(std::move(logits));
}

std::vector<double> record_input(const CalibrationRecord& record, bool use_v) {
    std::vector<double> x = record.p;
    if (use_v) x.push_back(record.v);
    return x;
}

} // namespace

std::vector<double> calibrate(const CalibratorParams& params, const std::vector<double>& p,
                              std::optional<double> v) {
    return forward(params, feature_vector(params, p, v));
}

double mean_nll(const CalibratorParams& params, const std::vector<CalibrationRecord>& records) {
    if (records.empty()) throw ValidationError("cannot evaluate NLL on zero records");
    double total = 0.0;
    for (const auto& record : records) {
        auto probs = forward(params, record_input(record, params.use_v));
        double p = probs[static_cast<size_t>(record.target)];
        total += -std::log(std::max(p, 1e-300));
    }
    return total / static_cast<double>(records.size());
}

CalibratorParams train_calibrator(const std::vector<CalibrationRecord>& records, bool use_v,
                                  uint64_t /*seed: reserved, training is deterministic*/) {
    if (records.size() < 2)
        throw ValidationError("calibrator training needs at least 2 records");
    std::set<int> targets;
    for (const auto& record : records) targets.insert(record.target);
    if (targets.size() < 2)
        throw ValidationError("calibrator training needs at least 2 distinct targets");

    const size_t p_dim = records.front().p.size();
    for (const auto& record : records)
        if (record.p.size() != p_dim)
            throw ValidationError("inconsistent feature dimensions across records");
    const size_t classes = p_dim == 1 ? 2 : p_dim;
    for (const auto& record : records)
        if (record.target < 0 || record.target >= static_cast<int>(classes))
            throw ValidationError("record target out of range");

    const size_t dim = p_dim + (use_v ? 1 : 0);
    CalibratorParams params;
    params.use_v = use_v;
    params.b.assign(classes, 0.0);
    params.w.assign(classes, std::vector<double>(dim, 0.0));
    // Identity pattern on the p columns: class c starts out reading p[c].
    // The single-probability QA case maps p onto the "correct" class.
    if (p_dim == 1) {
        params.w[1][0] = 1.0;
    } else {
        for (size_t c = 0; c < classes; ++c) params.w[c][c] = 1.0;
    }

    const double n = static_cast<double>(records.size());
    std::vector<std::vector<double>> grad_w(classes, std::vector<double>(dim, 0.0));
    std::vector<double> grad_b(classes, 0.0);

    for (int iter = 0; iter < kMaxIterations; ++iter) {
        for (auto& row : grad_w) std::fill(row.begin(), row.end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);

        for (const auto& record : records) {
            auto x = record_input(record, use_v);
            auto probs = forward(params, x);
            for (size_t c = 0; c < classes; ++c) {
                double delta = probs[c] - (static_cast<int>(c) == record.target ? 1.0 : 0.0);
                grad_b[c] += delta / n;
                for (size_t f = 0; f < dim; ++f) grad_w[c][f] += delta * x[f] / n;
            }
        }
        for (size_t c = 0; c < classes; ++c)
            for (size_t f = 0; f < dim; ++f)
                grad_w[c][f] += 2.0 * kL2Penalty * params.w[c][f];

        double inf_norm = 0.0;
        for (size_t c = 0; c < classes; ++c) {
            inf_norm = std::max(inf_norm, std::abs(grad_b[c]));
            for (size_t f = 0; f < dim; ++f)
                inf_norm = std::max(inf_norm, std::abs(grad_w[c][f]));
        }
        if (inf_norm < kGradTolerance) break;

        for (size_t c = 0; c < classes; ++c) {
            params.b[c] -= kLearningRate * grad_b[c];
            for (size_t f = 0; f < dim; ++f)
                params.w[c][f] -= kLearningRate * grad_w[c][f];
        }
    }
    return params;
}

CalibrationRecord record_features(TaskKind task, const PredictionBundle& bundle) {
    CalibrationRecord record;
    const Prediction& pred = bundle.prediction;

    double v = 0.0;
    if (bundle.assessment.factuality_score)
        v = *bundle.assessment.factuality_score;
    else if (bundle.assessment.factual)
        v = *bundle.assessment.factual ? 1.0 : 0.0;
    record.v = pred.parse_ok ? v : 0.0;

    if (task == TaskKind::Nli) {
        if (!pred.parse_ok) {
            record.p = {0.0, 0.0, 0.0};  // no distribution recoverable
        } else if (pred.label_probs) {
            record.p.assign(pred.label_probs->begin(), pred.label_probs->end());
        } else {
            // Unknown confidence: emitted label at 0.5, remainder split.
            record.p = {0.25, 0.25, 0.25};
            if (auto idx = nli_label_index(pred.answer))
                record.p[static_cast<size_t>(*idx)] = 0.5;
        }
        record.target = 0;
    } else {
        if (!pred.parse_ok)
            record.p = {0.0};
        else if (pred.confidence)
            record.p = {*pred.confidence};
        else
            record.p = {0.5};  // logprobs unavailable
        record.target = bundle.correct ? 1 : 0;
    }
    return record;
}

std::vector<CalibrationRecord> build_records(
    const Dataset& extras,
    const std::vector<std::pair<std::string, PredictionBundle>>& bundles) {
    std::map<std::string, const PredictionBundle*> by_id;
    for (const auto& [id, bundle] : bundles) by_id[id] = &bundle;

    std::string missing;
    std::vector<CalibrationRecord> records;
    records.reserve(extras.examples.size());
    for (const auto& ex : extras.examples) {
        auto it = by_id.find(ex.id);
        if (it == by_id.end()) {
            missing += (missing.empty() ? "" : ", ") + ex.id;
            continue;
        }
        CalibrationRecord record = record_features(ex.task, *it->second);
        if (ex.task == TaskKind::Nli) {
            auto idx = nli_label_index(ex.gold_answer);
            if (!idx)
                throw ValidationError("extra example \"" + ex.id +
                                      "\" has a non-canonical NLI label");
            record.target = *idx;
        }
        records.push_back(std::move(record));
    }
    if (!missing.empty())
        throw ValidationError("extras missing predictions/assessments: " + missing);
    return records;
}

std::vector<Prediction> apply_to_testset(const CalibratorParams& params, TaskKind task,
                                         const std::vector<PredictionBundle>& bundles) {
    std::vector<Prediction> out;
    out.reserve(bundles.size());
    for (const auto& bundle : bundles) {
        CalibrationRecord record = record_features(task, bundle);
        auto probs = calibrate(params, record.p,
                               params.use_v ? std::optional<double>(record.v) : std::nullopt);
        Prediction pred = bundle.prediction;
        if (task == TaskKind::Nli) {
            size_t best = 0;
            for (size_t i = 1; i < probs.size(); ++i)
                if (probs[i] > probs[best]) best = i;
            pred.answer = std::string(kNliLabels[best]);
            std::array<double, 3> arr{probs[0], probs[1], probs[2]};
            pred.label_probs = arr;
            pred.confidence = probs[best];
        } else {
            pred.confidence = probs[1];
        }
        out.push_back(std::move(pred));
    }
    return out;
}

std::string params_to_json(const CalibratorParams& params) {
    json j;
    j["use_v"] = params.use_v;
    j["w"] = params.w;
    j["b"] = params.b;
    j["task"] = params.task;
    return j.dump();
}

CalibratorParams params_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("calibrator params are not valid JSON: ") + e.what());
    }
    CalibratorParams params;
    params.use_v = j.at("use_v").get<bool>();
    params.w = j.at("w").get<std::vector<std::vector<double>>>();
    params.b = j.at("b").get<std::vector<double>>();
    if (j.contains("task")) params.task = j["task"].get<std::string>();
    for (const auto& row : params.w)
        if (row.size() != params.w.front().size())
            throw ValidationError("ragged calibrator weight matrix");
    if (params.w.size() != params.b.size())
        throw ValidationError("calibrator weight/bias shape mismatch");
    return params;
}

} // namespace explcal
