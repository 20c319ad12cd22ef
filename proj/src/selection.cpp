#include "explcal/selection.hpp"

#include <algorithm>
#include <cmath>

#include "explcal/errors.hpp"

namespace explcal {

SelectionResult reject_until_factual(const std::vector<CandidateAnswer>& candidates) {
    if (candidates.empty())
        throw ValidationError("reject_until_factual called with no candidates");
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].rank != static_cast<int>(i) + 1)
            throw ValidationError("candidate ranks must be contiguous from 1");
        if (!candidates[i].assessment.factual)
            throw ValidationError("candidate at rank " + std::to_string(i + 1) +
                                  " has no boolean factuality assessment");
    }
    for (const auto& candidate : candidates) {
        if (*candidate.assessment.factual) {
            SelectionResult result;
            result.chosen = candidate.prediction;
            result.chosen_rank = candidate.rank;
            return result;
        }
    }
    SelectionResult result;
    result.chosen = candidates.front().prediction;
    result.chosen_rank = 1;
    result.fallback_used = true;
    return result;
}

std::vector<std::string> select_by_threshold(const std::vector<Prediction>& predictions,
                                             double coverage) {
    if (coverage <= 0.0 || coverage > 1.0)
        throw ValidationError("coverage must be within (0, 1]");
    std::vector<const Prediction*> order;
    order.reserve(predictions.size());
    for (const auto& pred : predictions) {
        if (!pred.confidence)
            throw ValidationError("prediction \"" + pred.example_id +
                                  "\" has no confidence for threshold selection");
        order.push_back(&pred);
    }
    std::sort(order.begin(), order.end(), [](const Prediction* a, const Prediction* b) {
        if (*a->confidence != *b->confidence) return *a->confidence > *b->confidence;
        return a->example_id < b->example_id;
    });
    size_t keep = static_cast<size_t>(
        std::ceil(coverage * static_cast<double>(predictions.size())));
    keep = std::min(keep, order.size());
    std::vector<std::string> selected;
    selected.reserve(keep);
    for (size_t i = 0; i < keep; ++i) selected.push_back(order[i]->example_id);
    return selected;
}

} // namespace explcal
