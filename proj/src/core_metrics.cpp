#include "pplqa/core_metrics.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

std::string_view require_text(std::string_view text, std::string_view role) {
    const auto trimmed = trim(text);
    if (trimmed.empty()) throw DataError(fmt::format("{} is empty", role));
    return trimmed;
}

TokenLogProbs score_as(LogprobProvider& provider, std::string_view text, std::string_view role) {
    try {
        return provider.score_text(text);
    } catch (const Error& e) {
        rethrow_with_context(e, fmt::format("scoring {} text", role));
    }
}

PplResult perplexity_of(const TokenLogProbs& scored, std::string_view role) {
    try {
        return perplexity(scored.logprobs);
    } catch (const Error& e) {
        rethrow_with_context(e, fmt::format("{} text", role));
    }
}

std::size_t tokens_before(const TokenLogProbs& scored, std::size_t offset) {
    std::size_t count = 0;
    for (const auto o : scored.offsets) {
        if (o < offset) ++count;
    }
    return count;
}

PplqaScore combine(const TokenLogProbs& qa, const TokenLogProbs& a, std::size_t answer_begin) {
    const auto ppl_qa = perplexity_of(qa, "qa");
    const auto ppl_a = perplexity_of(a, "a");
    PplqaScore score;
    score.ppl_qa = ppl_qa.ppl;
    score.ppl_a = ppl_a.ppl;
    score.pplqa = std::fabs(ppl_qa.ppl - ppl_a.ppl);
    score.question_tokens = tokens_before(qa, answer_begin);
    score.answer_tokens = ppl_a.token_count;
    return score;
}

}  // namespace

PplResult perplexity(std::span<const double> logprobs) {
    if (logprobs.empty()) throw DataError("empty token sequence");
    double sum = 0.0;
    for (std::size_t i = 0; i < logprobs.size(); ++i) {
        const double lp = logprobs[i];
        if (!std::isfinite(lp)) throw DataError(fmt::format("non-finite logprob at index {}", i));
        if (lp > 0.0) throw DataError(fmt::format("positive logprob {} at index {}", lp, i));
        sum += lp;
    }
    const auto n = logprobs.size();
    return {std::exp(-sum / static_cast<double>(n)), n};
}

PplqaScore pplqa_score(std::string_view question, std::string_view answer, LogprobProvider& provider,
                       std::string_view separator) {
    question = require_text(question, "question");
    answer = require_text(answer, "answer");
    std::string qa;
    qa.reserve(question.size() + separator.size() + answer.size());
    qa.append(question).append(separator);
    const auto answer_begin = utf8_length(qa);
    qa.append(answer);
    const auto scored_qa = score_as(provider, qa, "qa");
    const auto scored_a = score_as(provider, answer, "a");
    return combine(scored_qa, scored_a, answer_begin);
}

PplqaScore pplqa_with_template(std::string_view question, std::string_view answer, const PromptTemplate& tmpl,
                               LogprobProvider& provider) {
    tmpl.validate();
    question = require_text(question, "question");
    answer = require_text(answer, "answer");
    const auto rendered = render_qa(tmpl, question, answer);
    const auto scored_qa = score_as(provider, rendered.text, "qa");
    const auto scored_a = score_as(provider, answer, "a");
    return combine(scored_qa, scored_a, rendered.answer_begin);
}

}  // namespace pplqa
