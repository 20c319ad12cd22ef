#pragma once

#include <string>
#include <vector>

#include "explcal/parsing.hpp"
#include "explcal/reliability.hpp"

namespace explcal {

struct CandidateAnswer {
    int rank = 1;  // 1 = model's preferred candidate
    Prediction prediction;
    ReliabilityAssessment assessment;
};

struct SelectionResult {
    Prediction chosen;
    int chosen_rank = 1;
    bool fallback_used = false;  // no candidate was factual; rank 1 returned
    bool abstained = false;
};

// Walks the ranked candidates and returns the first one whose explanation
// is factual; when none is, falls back to rank 1 and flags it so accuracy
// denominators stay comparable.
SelectionResult reject_until_factual(const std::vector<CandidateAnswer>& candidates);

// Answers the ceil(coverage * N) highest-confidence items; ties break by
// ascending example id so selections are stable across runs. Returns the
// selected ids.
std::vector<std::string> select_by_threshold(const std::vector<Prediction>& predictions,
                                             double coverage);

} // namespace explcal
