#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pplqa/core_metrics.hpp"
#include "pplqa/provider.hpp"
#include "pplqa/records.hpp"
#include "pplqa/templates.hpp"

namespace pplqa {

enum class ScorerKind { pplqa, gptscore, geval };

std::string_view to_string(ScorerKind kind) noexcept;
ScorerKind scorer_kind_from_string(std::string_view text);
Direction direction_of(ScorerKind kind) noexcept;

/// A scorer plus the template it runs with (none for the prompt-free
/// variants). G-EVAL always needs a template.
struct ScorerSpec {
    ScorerKind kind = ScorerKind::pplqa;
    std::optional<PromptTemplate> tmpl;

    /// "pplqa", "pplqa[coherence]", ...
    std::string label() const;
    std::string template_name() const;
};

struct ScorerOptions {
    std::string separator{default_separator};
    /// G-EVAL and judge generations attempted before giving up.
    int max_attempts = 3;
    int max_tokens = 32;
    /// Judge completions carry reasoning as well as the ranking.
    int judge_max_tokens = 256;
};

/// Scores one (question, answer) pair with any scorer.
ScoreRecord run_scorer(const ScorerSpec& spec, std::string_view question_id, std::string_view model_id,
                       std::string_view question, std::string_view answer, LogprobProvider& provider,
                       const ScorerOptions& options = {});

/// Value = PPLqa; components ppl_qa and ppl_a. Lower is better.
ScoreRecord score_pplqa(const QAItem& item, std::string_view model_id, LogprobProvider& provider,
                        const PromptTemplate* tmpl = nullptr, const ScorerOptions& options = {});

/// Value = mean logprob of the answer-span tokens (located by character
/// offset) when scoring prefix + answer. Higher is better.
ScoreRecord score_gptscore(const QAItem& item, std::string_view model_id, LogprobProvider& provider,
                           const PromptTemplate* tmpl = nullptr, const ScorerOptions& options = {});

/// Value = integer 1..5 parsed from a form-filling generation.
ScoreRecord score_geval(const QAItem& item, std::string_view model_id, LogprobProvider& provider,
                        const PromptTemplate& tmpl, const ScorerOptions& options = {});

/// Mean logprob over tokens whose offset lies in [begin, end). Throws
/// DataError "answer span empty" when no token qualifies.
double answer_span_mean(const TokenLogProbs& scored, std::size_t begin, std::size_t end);

/// First standalone integer in the completion (ranges like "1-5", decimals
/// and "/5" denominators are skipped). Empty when absent or outside 1..5.
std::optional<int> parse_geval_score(std::string_view completion);

/// Answer indices (1-based) in the order the completion mentions
/// "Answer k", taking the first `count` mentions. Throws DataError
/// "invalid judge ranking" (with the raw completion) unless they form a
/// permutation of 1..count.
std::vector<int> extract_judge_order(std::string_view completion, std::size_t count);

/// Asks the provider to rank `answers` with a judge template; best = rank 1.
RankVector judge_rank(std::string_view question, std::span<const std::string> answers, LogprobProvider& provider,
                      const PromptTemplate& judge_template, const ScorerOptions& options = {});

}  // namespace pplqa
