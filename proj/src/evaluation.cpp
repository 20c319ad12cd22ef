#include "explcal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "explcal/errors.hpp"
#include "explcal/text.hpp"

namespace explcal {

using nlohmann::json;

namespace {

std::string normalize_qa(std::string_view s, bool strip_article) {
    std::string out = strip_outer_punct(s);
    if (strip_article) out = std::string(strip_leading_article(out));
    return ascii_lower(out);
}

} // namespace

bool judge_correct(const Prediction& prediction, const Example& gold) {
    if (!prediction.parse_ok) return false;
    bool strip_article = gold.task == TaskKind::ContextQA;
    std::string predicted = normalize_qa(prediction.answer, strip_article);
    if (predicted.empty()) return false;
    if (predicted == normalize_qa(gold.gold_answer, strip_article)) return true;
    if (gold.task == TaskKind::ContextQA) {
        for (const auto& alias : gold.aliases)
            if (predicted == normalize_qa(alias, strip_article)) return true;
    }
    return false;
}

CongruenceStats congruence(
    const std::vector<Verdict>& verdicts,
    const std::vector<std::pair<std::string, ReliabilityAssessment>>& assessments) {
    if (verdicts.empty()) throw ValidationError("congruence needs at least one verdict");
    std::map<std::string, const ReliabilityAssessment*> by_id;
    for (const auto& [id, assessment] : assessments) by_id[id] = &assessment;
    if (by_id.size() != verdicts.size())
        throw ValidationError("congruence id sets differ in size");

    CongruenceStats stats;
    double n = static_cast<double>(verdicts.size());
    for (const auto& verdict : verdicts) {
        auto it = by_id.find(verdict.example_id);
        if (it == by_id.end())
            throw ValidationError("no assessment for example \"" + verdict.example_id + "\"");
        const ReliabilityAssessment& assessment = *it->second;
        if (!assessment.factual || !assessment.consistent)
            throw ValidationError("example \"" + verdict.example_id +
                                  "\" lacks boolean factuality/consistency");
        stats.acc += verdict.correct;
        stats.fac_rate += *assessment.factual;
        stats.con_rate += *assessment.consistent;
        stats.acc_eq_fac += verdict.correct == *assessment.factual;
        stats.acc_eq_con += verdict.correct == *assessment.consistent;
    }
    stats.acc /= n;
    stats.fac_rate /= n;
    stats.con_rate /= n;
    stats.acc_eq_fac /= n;
    stats.acc_eq_con /= n;
    return stats;
}

CoverageAccuracyCurve coverage_accuracy(std::vector<Verdict> verdicts) {
    if (verdicts.empty())
        throw ValidationError("coverage_accuracy needs at least one verdict");
    std::string missing;
    for (const auto& verdict : verdicts)
        if (!verdict.confidence) missing += (missing.empty() ? "" : ", ") + verdict.example_id;
    if (!missing.empty())
        throw ValidationError("verdicts missing confidence: " + missing);

    std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) {
        if (*a.confidence != *b.confidence) return *a.confidence > *b.confidence;
        return a.example_id < b.example_id;
    });

    CoverageAccuracyCurve curve;
    double n = static_cast<double>(verdicts.size());
    double correct = 0.0;
    double auc_sum = 0.0;
    for (size_t k = 1; k <= verdicts.size(); ++k) {
        correct += verdicts[k - 1].correct;
        double acc_k = correct / static_cast<double>(k);
        curve.points.push_back({static_cast<double>(k) / n, acc_k});
        auc_sum += acc_k;
    }
    curve.auc = auc_sum / n;
    return curve;
}

double ranking_auc(const std::vector<Verdict>& verdicts) {
    std::vector<double> pos, neg;
    for (const auto& verdict : verdicts) {
        if (!verdict.confidence)
            throw ValidationError("verdict \"" + verdict.example_id + "\" has no confidence");
        (verdict.correct ? pos : neg).push_back(*verdict.confidence);
    }
    if (pos.empty() || neg.empty())
        throw ValidationError("ranking_auc needs both correct and incorrect items");
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    // Count (correct, incorrect) pairs ordered properly; two pointers over
    // the sorted lists keep this O(n log n).
    double wins = 0.0;
    size_t lower = 0, equal = 0;
    for (double p : pos) {
        while (lower < neg.size() && neg[lower] < p) ++lower;
        equal = lower;
        while (equal < neg.size() && neg[equal] == p) ++equal;
        wins += static_cast<double>(lower) + 0.5 * static_cast<double>(equal - lower);
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double accuracy(const std::vector<Verdict>& verdicts) {
    if (verdicts.empty()) return 0.0;
    double correct = 0.0;
    for (const auto& verdict : verdicts) correct += verdict.correct;
    return correct / static_cast<double>(verdicts.size());
}

RunReport aggregate(const std::vector<GroupMetrics>& groups) {
    if (groups.empty()) throw ValidationError("aggregate needs at least one group");
    RunReport report;
    report.per_group = groups;

    std::vector<std::string> names;
    for (const auto& group : groups)
        for (const auto& [name, value] : group.metrics)
            if (std::find(names.begin(), names.end(), name) == names.end())
                names.push_back(name);

    for (const auto& name : names) {
        std::vector<double> values;
        for (const auto& group : groups)
            for (const auto& [metric, value] : group.metrics)
                if (metric == name) values.push_back(value);
        if (values.empty()) continue;
        double mean = 0.0;
        for (double value : values) mean += value;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double value : values) var += (value - mean) * (value - mean);
        var /= static_cast<double>(values.size());  // population std
        report.summary[name] = {mean, std::sqrt(var)};
    }
    return report;
}

std::string render_report_table(const RunReport& report) {
    std::vector<std::string> names;
    for (const auto& [name, summary] : report.summary) names.push_back(name);

    size_t name_width = 6;
    for (const auto& name : names) name_width = std::max(name_width, name.size());

    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << std::string(name_width, ' ') << "  ";
    for (const auto& group : report.per_group) out << "  group" << group.group_id;
    out << "      mean     std\n";
    for (const auto& name : names) {
        out << name << std::string(name_width - name.size(), ' ') << "  ";
        for (const auto& group : report.per_group) {
            bool found = false;
            for (const auto& [metric, value] : group.metrics) {
                if (metric == name) {
                    out << "  " << value;
                    found = true;
                    break;
                }
            }
            if (!found) out << "       -";
        }
        const auto& summary = report.summary.at(name);
        out << "    " << summary.mean << "  " << summary.stddev << "\n";
    }
    return out.str();
}

std::string report_to_json(const RunReport& report) {
    json j;
    json groups = json::array();
    for (const auto& group : report.per_group) {
        json g;
        g["group_id"] = group.group_id;
        json metrics;
        for (const auto& [name, value] : group.metrics) metrics[name] = value;
        g["metrics"] = std::move(metrics);
        groups.push_back(std::move(g));
    }
    j["per_group"] = std::move(groups);
    json summary;
    for (const auto& [name, s] : report.summary)
        summary[name] = {{"mean", s.mean}, {"std", s.stddev}};
    j["summary"] = std::move(summary);
    return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what());
    }
    RunReport report;
    for (const auto& g : j.at("per_group")) {
        GroupMetrics group;
        group.group_id = g.at("group_id").get<int>();
        for (const auto& [name, value] : g.at("metrics").items())
            group.metrics.emplace_back(name, value.get<double>());
        report.per_group.push_back(std::move(group));
    }
    for (const auto& [name, s] : j.at("summary").items())
        report.summary[name] = {s.at("mean").get<double>(), s.at("std").get<double>()};
    return report;
}

std::string curve_to_csv(const CoverageAccuracyCurve& curve) {
    std::string out = "coverage,accuracy\n";
    for (const auto& point : curve.points) {
        out += json(point.coverage).dump();
        out += ',';
        out += json(point.accuracy).dump();
        out += '\n';
    }
    return out;
}

} // namespace explcal
