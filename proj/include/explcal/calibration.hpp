#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "explcal/corpus.hpp"
#include "explcal/parsing.hpp"
#include "explcal/reliability.hpp"

namespace explcal {

// One calibrator training point. QA uses a single-entry p holding the
// answer confidence with target 1 when the prediction was correct; NLI
// uses the full three-class distribution with the gold label index as
// target.
struct CalibrationRecord {
    std::vector<double> p;
    double v = 0.0;
    int target = 0;
};

struct CalibratorParams {
    std::vector<std::vector<double>> w;  // classes x (len(p) + use_v)
    std::vector<double> b;               // classes
    bool use_v = false;
    std::string task;

    int classes() const { return static_cast<int>(b.size()); }
    int feature_dim() const { return w.empty() ? 0 : static_cast<int>(w.front().size()); }
};

// softmax(W . concat(p, v?) + b); sums to 1 within 1e-12 for any finite
// inputs.
std::vector<double> calibrate(const CalibratorParams& params, const std::vector<double>& p,
                              std::optional<double> v);

// Mean negative log-likelihood of the targets under calibrate(); the
// training loss adds an L2 penalty on W which this excludes.
double mean_nll(const CalibratorParams& params, const std::vector<CalibrationRecord>& records);

// Multinomial logistic regression by full-batch gradient descent:
// learning rate 0.1, at most 2000 iterations, L2 penalty 1e-4 on W,
// stopping when the gradient infinity-norm drops below 1e-6. W starts as
// the identity pattern on the p columns (zero v column), b at zero. No
// stochastic steps, so results are bit-identical across runs; the seed is
// reserved.
CalibratorParams train_calibrator(const std::vector<CalibrationRecord>& records, bool use_v,
                                  uint64_t seed);

struct PredictionBundle {
    Prediction prediction;
    ReliabilityAssessment assessment;
    bool correct = false;  // QA target; ignored for NLI
};

// Builds training records for a labeled extra set. Parse failures become
// (p = zeros, v = 0); a present-but-unscored confidence is imputed as 0.5
// for QA and as (0.5 on the emitted label, 0.25 elsewhere) for NLI.
// Throws when an extra example has no bundle, listing the missing ids.
std::vector<CalibrationRecord> build_records(
    const Dataset& extras, const std::vector<std::pair<std::string, PredictionBundle>>& bundles);

// Feature extraction shared by build_records and apply_to_testset.
CalibrationRecord record_features(TaskKind task, const PredictionBundle& bundle);

// QA: answer strings stay as-is and only the confidence used for selective
// answering is replaced with calibrate(...)[1]. NLI: the label becomes the
// argmax of the calibrated distribution, which may change the prediction.
std::vector<Prediction> apply_to_testset(const CalibratorParams& params, TaskKind task,
                                         const std::vector<PredictionBundle>& bundles);

// JSON persistence with exact float round-trip.
std::string params_to_json(const CalibratorParams& params);
CalibratorParams params_from_json(const std::string& text);

} // namespace explcal
