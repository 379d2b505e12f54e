#include "pplqa/scorers.hpp"

#include <cctype>
#include <regex>

#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

ScoreRecord base_record(const ScorerSpec& spec, std::string_view question_id, std::string_view model_id,
                        const LogprobProvider& provider) {
    ScoreRecord record;
    record.scorer = spec.label();
    record.question_id = std::string(question_id);
    record.model_id = std::string(model_id);
    record.direction = direction_of(spec.kind);
    record.provider = provider.identity();
    record.template_name = spec.template_name();
    return record;
}

double gptscore_value(std::string_view question, std::string_view answer, const PromptTemplate* tmpl,
                      LogprobProvider& provider, const ScorerOptions& options) {
    question = trim(question);
    answer = trim(answer);
    if (question.empty()) throw DataError("question is empty");
    if (answer.empty()) throw DataError("answer is empty");
    RenderedPrompt rendered;
    if (tmpl) {
        rendered = render_qa(*tmpl, question, answer);
    } else {
        rendered.text.append(question).append(options.separator);
        rendered.answer_begin = utf8_length(rendered.text);
        rendered.text.append(answer);
        rendered.answer_end = utf8_length(rendered.text);
    }
    const auto scored = provider.score_text(rendered.text);
    return answer_span_mean(scored, rendered.answer_begin, rendered.answer_end);
}

int geval_value(std::string_view question, std::string_view answer, const PromptTemplate& tmpl,
                LogprobProvider& provider, const ScorerOptions& options) {
    if (tmpl.kind == TemplateKind::judge) {
        throw UsageError(fmt::format("G-EVAL cannot use judge template '{}'", tmpl.name));
    }
    question = trim(question);
    answer = trim(answer);
    if (question.empty()) throw DataError("question is empty");
    if (answer.empty()) throw DataError("answer is empty");
    GenerationRequest request;
    request.prompt = render_qa(tmpl, question, answer).text;
    request.max_tokens = options.max_tokens;
    request.temperature = 0.0;
    std::string last;
    for (int attempt = 0; attempt < std::max(options.max_attempts, 1); ++attempt) {
        try {
            last = provider.generate(request);
        } catch (const DataError&) {
            last.clear();  // empty completion; try again
            continue;
        }
        if (const auto value = parse_geval_score(last)) return *value;
    }
    throw DataError(fmt::format("unparseable score in completion '{}'", last));
}

}  // namespace

std::string_view to_string(ScorerKind kind) noexcept {
    switch (kind) {
        case ScorerKind::pplqa: return "pplqa";
        case ScorerKind::gptscore: return "gptscore";
        case ScorerKind::geval: return "geval";
    }
    return "pplqa";
}

ScorerKind scorer_kind_from_string(std::string_view text) {
    for (auto k : {ScorerKind::pplqa, ScorerKind::gptscore, ScorerKind::geval}) {
        if (to_string(k) == text) return k;
    }
    throw UsageError(fmt::format("unknown scorer '{}' (expected pplqa, gptscore or geval)", text));
}

Direction direction_of(ScorerKind kind) noexcept {
    return kind == ScorerKind::pplqa ? Direction::lower_better : Direction::higher_better;
}

std::string ScorerSpec::label() const {
    if (!tmpl) return std::string(to_string(kind));
    return fmt::format("{}[{}]", to_string(kind), tmpl->name);
}

std::string ScorerSpec::template_name() const { return tmpl ? tmpl->name : std::string("none"); }

double answer_span_mean(const TokenLogProbs& scored, std::size_t begin, std::size_t end) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        if (scored.offsets[i] >= begin && scored.offsets[i] < end) {
            sum += scored.logprobs[i];
            ++count;
        }
    }
    if (count == 0) throw DataError("answer span empty");
    return sum / static_cast<double>(count);
}

std::optional<int> parse_geval_score(std::string_view completion) {
    const auto n = completion.size();
    std::size_t i = 0;
    while (i < n) {
        if (!is_digit(completion[i])) {
            ++i;
            continue;
        }
        const auto begin = i;
        while (i < n && is_digit(completion[i])) ++i;
        const auto end = i;
        const char before = begin > 0 ? completion[begin - 1] : ' ';
        const char after = end < n ? completion[end] : ' ';
        const bool after_is_decimal = (after == '.' || after == ',') && end + 1 < n && is_digit(completion[end + 1]);
        const bool before_is_decimal = (before == '.' || before == ',') && begin > 1 && is_digit(completion[begin - 2]);
        const bool in_range_expr = before == '-' || after == '-' || before == '/';
        if (after_is_decimal || before_is_decimal || in_range_expr || std::isalpha(static_cast<unsigned char>(before)) ||
            std::isalpha(static_cast<unsigned char>(after))) {
            continue;
        }
        const auto digits = completion.substr(begin, end - begin);
        if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '5') return digits[0] - '0';
        return std::nullopt;
    }
    return std::nullopt;
}

std::vector<int> extract_judge_order(std::string_view completion, std::size_t count) {
    static const std::regex mention(R"(answer\s*#?\s*(\d+))", std::regex::icase);
    std::vector<int> order;
    const std::string text(completion);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), mention);
         it != std::sregex_iterator() && order.size() < count; ++it) {
        order.push_back(std::stoi((*it)[1].str()));
    }
    std::vector<bool> seen(count + 1, false);
    bool valid = order.size() == count;
    for (const int k : order) {
        if (k < 1 || static_cast<std::size_t>(k) > count || seen[static_cast<std::size_t>(k)]) {
            valid = false;
            break;
        }
        seen[static_cast<std::size_t>(k)] = true;
    }
    if (!valid) {
        throw DataError(fmt::format("invalid judge ranking (expected a permutation of 1..{}): {}", count, completion));
    }
    return order;
}

ScoreRecord run_scorer(const ScorerSpec& spec, std::string_view question_id, std::string_view model_id,
                       std::string_view question, std::string_view answer, LogprobProvider& provider,
                       const ScorerOptions& options) {
    auto record = base_record(spec, question_id, model_id, provider);
    switch (spec.kind) {
        case ScorerKind::pplqa: {
            const auto score = spec.tmpl ? pplqa_with_template(question, answer, *spec.tmpl, provider)
                                         : pplqa_score(question, answer, provider, options.separator);
            record.value = score.pplqa;
            record.components = {{"ppl_qa", score.ppl_qa}, {"ppl_a", score.ppl_a}};
            break;
        }
        case ScorerKind::gptscore:
            record.value = gptscore_value(question, answer, spec.tmpl ? &*spec.tmpl : nullptr, provider, options);
            break;
        case ScorerKind::geval:
            if (!spec.tmpl) throw UsageError("G-EVAL needs a template");
            record.value = geval_value(question, answer, *spec.tmpl, provider, options);
            break;
    }
    return record;
}

namespace {

const std::string& require_response(const QAItem& item, std::string_view model_id) {
    const auto* response = item.response_for(model_id);
    if (!response) {
        throw DataError(fmt::format("question '{}' has no response from model '{}'", item.question_id, model_id));
    }
    return *response;
}

ScorerSpec make_spec(ScorerKind kind, const PromptTemplate* tmpl) {
    ScorerSpec spec{kind, std::nullopt};
    if (tmpl) spec.tmpl = *tmpl;
    return spec;
}

}  // namespace

ScoreRecord score_pplqa(const QAItem& item, std::string_view model_id, LogprobProvider& provider,
                        const PromptTemplate* tmpl, const ScorerOptions& options) {
    return run_scorer(make_spec(ScorerKind::pplqa, tmpl), item.question_id, model_id, item.question,
                      require_response(item, model_id), provider, options);
}

ScoreRecord score_gptscore(const QAItem& item, std::string_view model_id, LogprobProvider& provider,
                           const PromptTemplate* tmpl, const ScorerOptions& options) {
    return run_scorer(make_spec(ScorerKind::gptscore, tmpl), item.question_id, model_id, item.question,
                      require_response(item, model_id), provider, options);
}

ScoreRecord score_geval(const QAItem& item, std::string_view model_id, LogprobProvider& provider,
                        const PromptTemplate& tmpl, const ScorerOptions& options) {
    return run_scorer(make_spec(ScorerKind::geval, &tmpl), item.question_id, model_id, item.question,
                      require_response(item, model_id), provider, options);
}

RankVector judge_rank(std::string_view question, std::span<const std::string> answers, LogprobProvider& provider,
                      const PromptTemplate& judge_template, const ScorerOptions& options) {
    if (answers.size() < 2) throw UsageError("judge needs at least two answers");
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (trim(answers[i]).empty()) throw DataError(fmt::format("answer {} is empty", i + 1));
    }
    GenerationRequest request;
    request.prompt = render_judge(judge_template, question, answers);
    request.max_tokens = options.judge_max_tokens;
    request.temperature = 0.0;
    const auto completion = provider.generate(request);
    const auto order = extract_judge_order(completion, answers.size());
    RankVector ranks;
    ranks.evaluator = "judge";
    ranks.ranks.assign(answers.size(), 0);
    for (std::size_t position = 0; position < order.size(); ++position) {
        ranks.ranks[static_cast<std::size_t>(order[position] - 1)] = static_cast<int>(position + 1);
    }
    return ranks;
}

}  // namespace pplqa
