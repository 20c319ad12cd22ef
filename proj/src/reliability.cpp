#include "explcal/reliability.hpp"

#include <algorithm>
#include <unordered_set>

#include "explcal/text.hpp"

namespace explcal {

TokenizedText tokenize(std::string_view text) {
    return TokenizedText{word_tokens(text)};
}

namespace {

std::string fold_name(std::string_view s) {
    return ascii_lower(strip_outer_punct(s));
}

std::string fold_profession(std::string_view s) {
    return ascii_lower(strip_leading_article(strip_outer_punct(s)));
}

bool sentence_in_context(const std::vector<std::vector<std::string>>& context,
                         const std::string& clause) {
    for (const auto& paragraph : context)
        for (const auto& sentence : paragraph)
            if (same_sentence(sentence, clause)) return true;
    return false;
}

} // namespace

bool check_synth_consistency(const SynthParse& parse) {
    bool names_align = fold_name(parse.n2) == fold_name(parse.n4) &&
                       fold_name(parse.n1) == fold_name(parse.n3);
    bool question_match = fold_profession(parse.p2) == fold_profession(parse.p1) &&
                          ascii_lower(parse.v2) == ascii_lower(parse.v1);
    return names_align && question_match;
}

bool check_synth_factuality(const std::vector<std::vector<std::string>>& context,
                            const SynthParse& parse) {
    std::string profession = fold_profession(parse.p2);
    std::string is_clause = parse.n1 + " is " +
                            std::string(indefinite_article(profession)) + " " + profession;
    std::string rel_clause = parse.n2 + " " + parse.v2 + " " + parse.n3;
    return sentence_in_context(context, is_clause) &&
           sentence_in_context(context, rel_clause);
}

double factuality_score_sentence(const TokenizedText& sentence,
                                 std::span<const TokenizedText> paragraphs,
                                 bool* empty_flag) {
    if (empty_flag) *empty_flag = false;
    if (sentence.tokens.empty()) {
        if (empty_flag) *empty_flag = true;
        return 0.0;
    }
    double best = 0.0;
    for (const auto& paragraph : paragraphs) {
        std::unordered_set<std::string_view> vocab;
        for (const auto& token : paragraph.tokens) vocab.insert(token);
        size_t overlap = 0;
        for (const auto& token : sentence.tokens)
            if (vocab.count(token)) ++overlap;
        best = std::max(best, static_cast<double>(overlap) /
                                  static_cast<double>(sentence.tokens.size()));
    }
    return best;
}

double factuality_score_explanation(std::span<const TokenizedText> sentences,
                                    std::span<const TokenizedText> paragraphs) {
    if (sentences.empty()) return 0.0;
    double worst = 1.0;
    for (const auto& sentence : sentences)
        worst = std::min(worst, factuality_score_sentence(sentence, paragraphs));
    return worst;
}

double nli_premise_overlap(const TokenizedText& explanation, const TokenizedText& premise,
                           bool* empty_flag) {
    return factuality_score_sentence(explanation, std::span(&premise, 1), empty_flag);
}

namespace {

std::vector<TokenizedText> tokenize_paragraphs(const Example& example) {
    std::vector<TokenizedText> paragraphs;
    paragraphs.reserve(example.context.size());
    for (const auto& paragraph : example.context)
        paragraphs.push_back(tokenize(join(paragraph, " ")));
    return paragraphs;
}

} // namespace

ReliabilityAssessment assess_prediction(const Example& example, const Prediction& prediction) {
    ReliabilityAssessment assessment;
    switch (example.task) {
        case TaskKind::SynthQA: {
            auto parse = extract_synth_variables(example.question, prediction);
            if (parse) {
                assessment.consistent = check_synth_consistency(*parse);
                assessment.factual = check_synth_factuality(example.context, *parse);
            } else {
                assessment.consistent = false;
                assessment.factual = false;
            }
            assessment.factuality_score = *assessment.factual ? 1.0 : 0.0;
            break;
        }
        case TaskKind::ContextQA: {
            std::vector<TokenizedText> sentences;
            for (const auto& s : prediction.explanation_sentences)
                sentences.push_back(tokenize(s));
            auto paragraphs = tokenize_paragraphs(example);
            assessment.factuality_score =
                factuality_score_explanation(sentences, paragraphs);
            break;
        }
        case TaskKind::Nli: {
            TokenizedText premise = tokenize(join(example.context.front(), " "));
            TokenizedText explanation =
                tokenize(prediction.explanation ? *prediction.explanation : "");
            if (explanation.tokens.empty())
                assessment.factuality_score = 0.0;
            else
                assessment.factuality_score = nli_premise_overlap(explanation, premise);
            break;
        }
    }
    return assessment;
}

} // namespace explcal
