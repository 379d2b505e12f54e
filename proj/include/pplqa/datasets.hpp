#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pplqa/core_metrics.hpp"
#include "pplqa/provider.hpp"
#include "pplqa/records.hpp"

namespace pplqa {

struct MtBenchLoad {
    std::vector<PairwiseExample> examples;
    std::size_t lines = 0;
    std::size_t ties_dropped = 0;
};

/// MT-Bench human judgments, JSON Lines with question_id, model_a, model_b,
/// winner, conversation_a, conversation_b and turn. The question joins the
/// user messages of the first `turn` turns with `separator`; each answer
/// joins the matching assistant messages. Tie rows are dropped and counted.
/// Errors carry the 1-based line number.
MtBenchLoad load_mtbench(std::istream& in, std::string_view separator = default_separator);
MtBenchLoad load_mtbench(const std::filesystem::path& path, std::string_view separator = default_separator);

/// Domain question sets, JSON Lines with question_id, domain, question,
/// responses {model: text} (file order kept), optional human_ranks and
/// binary_label.
std::vector<QAItem> load_domain_questions(std::istream& in);
std::vector<QAItem> load_domain_questions(const std::filesystem::path& path);

/// True when the first non-empty line looks like an MT-Bench record.
bool looks_like_mtbench(const std::filesystem::path& path);

/// Domains in order of first appearance.
std::vector<std::string> domains_of(std::span<const QAItem> items);

/// Items with exactly two responses and a binary label, as pairs
/// (answer_a = first response).
std::vector<PairwiseExample> pairwise_from_items(std::span<const QAItem> items, std::string_view source = "domain");

/// One two-response item per example, labelled, for the per-response commands.
std::vector<QAItem> items_from_pairwise(std::span<const PairwiseExample> examples);

void write_domain_questions(std::ostream& out, std::span<const QAItem> items);

/// Sample Pearson correlation; empty when either column has zero variance.
/// Throws DataError on unequal lengths or fewer than 3 points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct LengthCorrelation {
    std::string model_id;
    std::string domain;  // empty = all items
    std::size_t points = 0;
    std::optional<double> r;
};

struct LengthCorrelationOptions {
    std::string separator{default_separator};
    bool per_domain = true;
    std::size_t workers = 1;
};

/// Pearson r between PPL(question + separator + response) and the response's
/// whitespace word count, per model (and per domain when requested; the
/// all-items row comes first for each model). Models with fewer than 3
/// responses in a group raise DataError.
std::vector<LengthCorrelation> ppl_length_correlation(std::span<const QAItem> items, LogprobProvider& provider,
                                                      const LengthCorrelationOptions& options = {});

}  // namespace pplqa
