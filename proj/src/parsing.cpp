#include "explcal/parsing.hpp"

#include <algorithm>
#include <cmath>

#include "explcal/errors.hpp"
#include "explcal/text.hpp"

namespace explcal {

namespace {

// Patterns operate on the first block of the completion; models often keep
// generating further exemplar blocks after a blank line.
size_t block_end(const std::string& text) {
    size_t p = text.find("\n\n");
    return p == std::string::npos ? text.size() : p;
}

// Trims [begin, end) and updates the offsets so answer spans keep pointing
// into the original completion text.
void trim_range(const std::string& text, size_t& begin, size_t& end) {
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
}

// Drops trailing punctuation from [begin, end).
void strip_trailing_punct_range(const std::string& text, size_t begin, size_t& end) {
    while (end > begin && std::ispunct(static_cast<unsigned char>(text[end - 1]))) --end;
}

struct AnswerField {
    std::string text;
    size_t begin = 0;
    size_t end = 0;
};

AnswerField answer_field(const std::string& raw, size_t begin, size_t end) {
    trim_range(raw, begin, end);
    strip_trailing_punct_range(raw, begin, end);
    trim_range(raw, begin, end);
    return {raw.substr(begin, end - begin), begin, end};
}

std::string clause_text(const std::string& raw, size_t begin, size_t end) {
    trim_range(raw, begin, end);
    return raw.substr(begin, end - begin);
}

// Removes one trailing sentence period from an explanation clause that was
// embedded in a carrier sentence ("..., the answer is X." style templates).
std::string strip_one_trailing_period(std::string s) {
    if (!s.empty() && s.back() == '.') s.pop_back();
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

const std::vector<std::string>& ordinal_markers() {
    static const std::vector<std::string> markers = {"First,", "Second,", "Third,",
                                                     "Fourth,", "Fifth,"};
    return markers;
}

std::vector<std::string> split_contextqa_sentences(const std::string& explanation) {
    // Sentences are delimited by the ordinal markers; the markers
    // themselves are dropped so factuality scoring only sees content
    // tokens. An explanation without markers is a single sentence.
    std::vector<std::pair<size_t, size_t>> marks;  // (position, marker length)
    for (const auto& marker : ordinal_markers()) {
        size_t from = 0;
        while (true) {
            size_t p = find_icase(explanation, marker, from);
            if (p == std::string::npos) break;
            marks.emplace_back(p, marker.size());
            from = p + marker.size();
        }
    }
    if (marks.empty()) {
        auto whole = trim(explanation);
        return whole.empty() ? std::vector<std::string>{}
                             : std::vector<std::string>{std::string(whole)};
    }
    std::sort(marks.begin(), marks.end());
    std::vector<std::string> sentences;
    for (size_t i = 0; i < marks.size(); ++i) {
        size_t begin = marks[i].first + marks[i].second;
        size_t end = i + 1 < marks.size() ? marks[i + 1].first : explanation.size();
        auto sentence = trim(std::string_view(explanation).substr(begin, end - begin));
        if (!sentence.empty()) sentences.emplace_back(sentence);
    }
    return sentences;
}

std::vector<std::string> split_on_terminal_punct(const std::string& explanation) {
    std::vector<std::string> sentences;
    size_t begin = 0;
    for (size_t i = 0; i < explanation.size(); ++i) {
        char c = explanation[i];
        if (c == '.' || c == '!' || c == '?') {
            auto sentence = trim(std::string_view(explanation).substr(begin, i - begin));
            if (!sentence.empty()) sentences.emplace_back(sentence);
            begin = i + 1;
        }
    }
    auto tail = trim(std::string_view(explanation).substr(begin));
    if (!tail.empty()) sentences.emplace_back(tail);
    return sentences;
}

std::vector<std::string> split_synth_clauses(const std::string& explanation) {
    size_t p = explanation.find(" and ");
    if (p == std::string::npos) return {explanation};
    std::vector<std::string> clauses;
    auto first = trim(std::string_view(explanation).substr(0, p));
    auto second = trim(std::string_view(explanation).substr(p + 5));
    if (!first.empty()) clauses.emplace_back(first);
    if (!second.empty()) clauses.emplace_back(second);
    return clauses;
}

void fill_explanation(Prediction& pred, TaskKind task, std::string explanation) {
    pred.explanation = explanation;
    switch (task) {
        case TaskKind::SynthQA:
            pred.explanation_sentences = split_synth_clauses(explanation);
            break;
        case TaskKind::ContextQA:
            pred.explanation_sentences = split_contextqa_sentences(explanation);
            break;
        case TaskKind::Nli:
            pred.explanation_sentences = split_on_terminal_punct(explanation);
            break;
    }
}

// If the P-E explanation ends with a restated "The answer is X." sentence,
// drop it; the leading answer is authoritative.
std::string drop_answer_restatement(std::string explanation) {
    size_t p = rfind_icase(explanation, "the answer is ");
    if (p == std::string::npos || p == 0) return explanation;
    std::string_view before = trim(std::string_view(explanation).substr(0, p));
    if (before.empty() || before.back() != '.') return explanation;
    std::string_view after = std::string_view(explanation).substr(p);
    if (after.size() > 64 || after.find(". ") != std::string_view::npos)
        return explanation;
    return std::string(before);
}

// Leading "Because " is optional: the E-P test stub already contains it, so
// HTTP completions continue after it while rendered shot blocks and the
// mock include it.
size_t skip_leading_connective(const std::string& text, size_t begin, size_t end) {
    trim_range(text, begin, end);
    std::string_view view(text.data() + begin, end - begin);
    if (starts_with_icase(view, kStepTrigger)) {
        begin += kStepTrigger.size();
        trim_range(text, begin, end);
        view = std::string_view(text.data() + begin, end - begin);
    }
    if (starts_with_icase(view, "Because ")) begin += 8;
    return begin;
}

bool normalize_nli_answer(Prediction& pred) {
    auto idx = nli_label_index(pred.answer);
    if (!idx) return false;
    pred.answer = std::string(kNliLabels[static_cast<size_t>(*idx)]);
    return true;
}

Prediction parse_few_shot(TaskKind task, const std::string& raw) {
    Prediction pred;
    pred.raw_text = raw;
    size_t end = std::min(block_end(raw), raw.find('\n'));
    auto field = answer_field(raw, 0, end == std::string::npos ? raw.size() : end);
    if (field.text.empty()) return pred;
    pred.answer = field.text;
    pred.answer_span = {field.begin, field.end};
    pred.parse_ok = true;
    if (task == TaskKind::Nli && !normalize_nli_answer(pred)) return Prediction{.raw_text = raw};
    return pred;
}

Prediction parse_explain_then_predict(TaskKind task, const std::string& raw) {
    Prediction pred;
    pred.raw_text = raw;
    size_t end = block_end(raw);
    size_t begin = skip_leading_connective(raw, 0, end);
    std::string_view block(raw.data(), end);

    size_t marker_pos = std::string::npos;
    size_t marker_len = 0;
    if (task == TaskKind::Nli) {
        for (std::string_view marker : {", this answer is ", ", the answer is "}) {
            marker_pos = rfind_icase(block.substr(0, end), marker);
            if (marker_pos != std::string::npos && marker_pos >= begin) {
                marker_len = marker.size();
                break;
            }
            marker_pos = std::string::npos;
        }
    } else if (task == TaskKind::SynthQA) {
        std::string_view marker = ", the answer is ";
        marker_pos = rfind_icase(block, marker);
        marker_len = marker.size();
    } else {
        std::string_view marker = "the answer is ";
        marker_pos = rfind_icase(block, marker);
        marker_len = marker.size();
    }
    if (marker_pos == std::string::npos || marker_pos < begin) return pred;

    auto field = answer_field(raw, marker_pos + marker_len, end);
    if (field.text.empty()) return pred;
    pred.answer = field.text;
    pred.answer_span = {field.begin, field.end};
    pred.parse_ok = true;
    if (task == TaskKind::Nli && !normalize_nli_answer(pred)) return Prediction{.raw_text = raw};

    std::string explanation = clause_text(raw, begin, marker_pos);
    if (explanation.empty()) {
        pred.parse_ok = false;
        pred.answer.clear();
        pred.answer_span.reset();
        return pred;
    }
    fill_explanation(pred, task, explanation);
    return pred;
}

Prediction parse_predict_then_explain(TaskKind task, const std::string& raw) {
    Prediction pred;
    pred.raw_text = raw;
    size_t end = block_end(raw);
    std::string_view block(raw.data(), end);

    if (task == TaskKind::ContextQA) {
        std::string_view marker = ". The reasons are as follows. ";
        size_t p = find_icase(block, marker);
        size_t answer_end, expl_begin;
        if (p != std::string::npos) {
            answer_end = p;
            expl_begin = p + marker.size();
        } else {
            // Same marker but with the answer's period directly before it.
            std::string_view bare = "The reasons are as follows. ";
            p = find_icase(block, bare);
            if (p == std::string::npos) return pred;
            answer_end = p;
            expl_begin = p + bare.size();
        }
        auto field = answer_field(raw, 0, answer_end);
        if (field.text.empty()) return pred;
        std::string explanation =
            drop_answer_restatement(clause_text(raw, expl_begin, end));
        if (explanation.empty()) return pred;
        pred.answer = field.text;
        pred.answer_span = {field.begin, field.end};
        pred.parse_ok = true;
        fill_explanation(pred, task, explanation);
        return pred;
    }

    std::string_view marker = ", because ";
    size_t p = find_icase(block, marker);
    if (p == std::string::npos) return pred;
    auto field = answer_field(raw, 0, p);
    if (field.text.empty()) return pred;
    std::string explanation =
        strip_one_trailing_period(clause_text(raw, p + marker.size(), end));
    if (explanation.empty()) return pred;
    pred.answer = field.text;
    pred.answer_span = {field.begin, field.end};
    pred.parse_ok = true;
    if (task == TaskKind::Nli && !normalize_nli_answer(pred)) return Prediction{.raw_text = raw};
    fill_explanation(pred, task, explanation);
    return pred;
}

} // namespace

Prediction parse_completion(TaskKind task, const Paradigm& paradigm,
                            const std::string& completion_text) {
    switch (paradigm.kind) {
        case ParadigmKind::FewShot:
            return parse_few_shot(task, completion_text);
        case ParadigmKind::ExplainThenPredict:
            return parse_explain_then_predict(task, completion_text);
        case ParadigmKind::PredictThenExplain:
            return parse_predict_then_explain(task, completion_text);
    }
    Prediction pred;
    pred.raw_text = completion_text;
    return pred;
}

namespace {

std::vector<std::string> space_words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

bool is_article(const std::string& w) {
    auto l = ascii_lower(w);
    return l == "a" || l == "an";
}

struct IsClause {
    std::string subject;
    std::string profession;
};

std::optional<IsClause> parse_is_clause(const std::string& clause) {
    auto words = space_words(clause);
    if (words.size() < 3 || ascii_lower(words[1]) != "is") return std::nullopt;
    std::string profession = strip_outer_punct(words.back());
    if (profession.empty() || is_article(profession)) return std::nullopt;
    return IsClause{words.front(), profession};
}

struct RelClause {
    std::string subject;
    std::string verb;
    std::string object;
};

std::optional<RelClause> parse_rel_clause(const std::string& clause) {
    auto words = space_words(clause);
    if (words.size() < 3) return std::nullopt;
    RelClause rel;
    rel.subject = words.front();
    rel.object = strip_outer_punct(words.back());
    rel.verb = join(std::vector<std::string>(words.begin() + 1, words.end() - 1), " ");
    if (rel.subject.empty() || rel.verb.empty() || rel.object.empty()) return std::nullopt;
    return rel;
}

} // namespace

std::optional<SynthParse> extract_synth_variables(const std::string& question,
                                                  const Prediction& prediction) {
    if (!prediction.parse_ok || !prediction.explanation) return std::nullopt;

    // Question: "Who V1 a/an P1?"
    auto qtrim = trim(question);
    if (!starts_with_icase(qtrim, "Who ")) return std::nullopt;
    std::string qbody(qtrim.substr(4));
    while (!qbody.empty() && (qbody.back() == '?' || qbody.back() == '.' ||
                              std::isspace(static_cast<unsigned char>(qbody.back()))))
        qbody.pop_back();
    auto qwords = space_words(qbody);
    if (qwords.size() < 2) return std::nullopt;
    SynthParse parse;
    parse.p1 = qwords.back();
    qwords.pop_back();
    if (!qwords.empty() && is_article(qwords.back())) qwords.pop_back();
    if (qwords.empty()) return std::nullopt;
    parse.v1 = join(qwords, " ");

    // Explanation: one "X is [a] P" clause plus one "X V Y" clause, in
    // either order depending on explanation style.
    auto clauses = split_synth_clauses(*prediction.explanation);
    if (clauses.size() != 2) return std::nullopt;
    auto is_first = parse_is_clause(clauses[0]);
    auto is_second = parse_is_clause(clauses[1]);
    std::optional<IsClause> is_clause;
    std::optional<RelClause> rel_clause;
    if (is_first && !is_second) {
        is_clause = is_first;
        rel_clause = parse_rel_clause(clauses[1]);
    } else if (is_second && !is_first) {
        is_clause = is_second;
        rel_clause = parse_rel_clause(clauses[0]);
    } else {
        return std::nullopt;
    }
    if (!is_clause || !rel_clause) return std::nullopt;

    parse.n1 = is_clause->subject;
    parse.p2 = is_clause->profession;
    parse.n2 = rel_clause->subject;
    parse.v2 = rel_clause->verb;
    parse.n3 = rel_clause->object;
    parse.n4 = strip_outer_punct(prediction.answer);
    if (parse.n1.empty() || parse.n2.empty() || parse.n3.empty() || parse.n4.empty() ||
        parse.v1.empty() || parse.v2.empty() || parse.p1.empty() || parse.p2.empty())
        return std::nullopt;
    return parse;
}

namespace {

struct TokenSpan {
    size_t begin;
    size_t end;
    double logprob;
    size_t index;
};

std::vector<TokenSpan> token_spans(const std::vector<TokenLogprob>& tokens) {
    std::vector<TokenSpan> spans;
    spans.reserve(tokens.size());
    size_t offset = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        spans.push_back({offset, offset + tokens[i].token.size(), tokens[i].logprob, i});
        offset += tokens[i].token.size();
    }
    return spans;
}

// Matches a reported alternative token against an NLI label: the folded
// token must be a non-empty prefix of the folded label (labels may span
// multiple subword tokens).
bool token_matches_label(const std::string& token, std::string_view label) {
    std::string folded = ascii_lower(trim(token));
    if (folded.empty()) return false;
    std::string target = ascii_lower(label);
    return target.rfind(folded, 0) == 0;
}

} // namespace

void extract_confidence(const Candidate& candidate, Prediction& prediction, TaskKind task,
                        bool per_token_mean) {
    if (!prediction.parse_ok || !prediction.answer_span || !candidate.token_logprobs ||
        candidate.token_logprobs->empty())
        return;

    auto spans = token_spans(*candidate.token_logprobs);
    auto [answer_begin, answer_end] = *prediction.answer_span;

    // Minimal token cover of the answer characters.
    std::vector<const TokenSpan*> cover;
    for (const auto& span : spans)
        if (span.begin < answer_end && span.end > answer_begin) cover.push_back(&span);
    if (cover.empty()) return;

    if (task == TaskKind::Nli) {
        const TokenSpan& first = *cover.front();
        double emitted_lp = first.logprob;
        auto label_idx = nli_label_index(prediction.answer);
        if (!label_idx) return;

        std::array<double, 3> probs{};
        bool have_all = false;
        if (first.index < candidate.top_logprobs.size() &&
            !candidate.top_logprobs[first.index].empty()) {
            std::array<std::optional<double>, 3> lps;
            for (const auto& [token, lp] : candidate.top_logprobs[first.index]) {
                for (size_t li = 0; li < kNliLabels.size(); ++li) {
                    if (!token_matches_label(token, kNliLabels[li]) || lps[li]) continue;
                    lps[li] = lp;
                }
            }
            if (!lps[static_cast<size_t>(*label_idx)])
                lps[static_cast<size_t>(*label_idx)] = emitted_lp;
            have_all = lps[0] && lps[1] && lps[2];
            if (have_all) {
                double total = 0;
                for (size_t i = 0; i < 3; ++i) {
                    probs[i] = std::exp(*lps[i]);
                    total += probs[i];
                }
                for (auto& p : probs) p /= total;
            }
        }
        if (!have_all) {
            // One-hot fallback: emitted label keeps its own probability
            // mass, the remainder splits evenly across the other labels.
            double mass = std::exp(emitted_lp);
            if (mass > 1.0) mass = 1.0;
            for (size_t i = 0; i < 3; ++i)
                probs[i] = (static_cast<int>(i) == *label_idx) ? mass : (1.0 - mass) / 2.0;
        }
        prediction.label_probs = probs;
        prediction.confidence = probs[static_cast<size_t>(*label_idx)];
        return;
    }

    double sum = 0;
    for (const auto* span : cover) sum += span->logprob;
    double joint = per_token_mean ? std::exp(sum / static_cast<double>(cover.size()))
                                  : std::exp(sum);
    if (joint > 1.0) joint = 1.0;
    prediction.confidence = joint;
}

} // namespace explcal
