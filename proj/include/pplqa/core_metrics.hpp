#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "pplqa/provider.hpp"
#include "pplqa/templates.hpp"

namespace pplqa {

struct PplResult {
    double ppl = 1.0;
    std::size_t token_count = 0;
};

struct PplqaScore {
    double ppl_qa = 1.0;
    double ppl_a = 1.0;
    double pplqa = 0.0;
    /// Scored tokens of the qa text that precede the answer.
    std::size_t question_tokens = 0;
    /// Scored tokens of the bare answer.
    std::size_t answer_tokens = 0;
};

inline constexpr std::string_view default_separator = "\n";

/// exp(-mean(logprobs)). Throws DataError on an empty sequence or on a
/// non-finite or positive value (naming its index).
PplResult perplexity(std::span<const double> logprobs);

/// |PPL(question + separator + answer) - PPL(answer)| over every scored token
/// of each text. Question and answer are trimmed first and must be
/// non-empty. Provider errors are rethrown tagged with the role ("qa" or
/// "a") of the text being scored.
PplqaScore pplqa_score(std::string_view question, std::string_view answer, LogprobProvider& provider,
                       std::string_view separator = default_separator);

/// As pplqa_score, but the qa text is `tmpl` rendered with the question and
/// answer. PPL(a) is still taken over the bare answer.
PplqaScore pplqa_with_template(std::string_view question, std::string_view answer, const PromptTemplate& tmpl,
                               LogprobProvider& provider);

}  // namespace pplqa
