#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "explcal/corpus.hpp"
#include "explcal/parsing.hpp"
#include "explcal/reliability.hpp"

namespace explcal {

struct Verdict {
    std::string example_id;
    bool correct = false;
    std::optional<double> confidence;
};

// NLI / synthetic QA: case-folded exact match with outer punctuation
// stripped. ContextQA: additionally strips a leading article and accepts
// any alias carried by the gold record. Parse failures are incorrect.
bool judge_correct(const Prediction& prediction, const Example& gold);

struct CongruenceStats {
    double acc = 0.0;
    double fac_rate = 0.0;
    double con_rate = 0.0;
    double acc_eq_fac = 0.0;
    double acc_eq_con = 0.0;
};

// Fraction of examples where correctness agrees with explanation
// factuality / consistency. Requires boolean assessments; the id sets of
// both inputs must coincide.
CongruenceStats congruence(
    const std::vector<Verdict>& verdicts,
    const std::vector<std::pair<std::string, ReliabilityAssessment>>& assessments);

struct CurvePoint {
    double coverage = 0.0;
    double accuracy = 0.0;
};

struct CoverageAccuracyCurve {
    std::vector<CurvePoint> points;  // k = 1..N, coverage k/N
    double auc = 0.0;                // mean of the accuracies over all N points
};

// Sorts by confidence descending (ties by ascending id); point k is the
// accuracy among the top k. Throws when any confidence is missing.
CoverageAccuracyCurve coverage_accuracy(std::vector<Verdict> verdicts);

// Probability that a uniformly drawn correct item outranks a uniformly
// drawn incorrect one under the confidence ordering (ties count half).
// This is the ranking-quality diagnostic; coverage_accuracy().auc is the
// selective-QA report metric.
double ranking_auc(const std::vector<Verdict>& verdicts);

struct GroupMetrics {
    int group_id = 0;
    // Ordered so reports render columns deterministically.
    std::vector<std::pair<std::string, double>> metrics;
};

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation across groups
};

struct RunReport {
    std::vector<GroupMetrics> per_group;
    std::map<std::string, MetricSummary> summary;
};

RunReport aggregate(const std::vector<GroupMetrics>& groups);

double accuracy(const std::vector<Verdict>& verdicts);

std::string render_report_table(const RunReport& report);
std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);
std::string curve_to_csv(const CoverageAccuracyCurve& curve);

} // namespace explcal
