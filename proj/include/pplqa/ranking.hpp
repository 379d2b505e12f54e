#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pplqa/records.hpp"

namespace pplqa {

/// Competition ranking ("1224"): equal scores share the smallest rank of
/// their block. Throws DataError on fewer than two or non-finite scores.
RankVector scores_to_ranks(std::span<const double> scores, Direction direction, std::string question_id = {},
                           std::string evaluator = {});

/// Sum over i < j of sgn(x_i - x_j) * sgn(y_i - y_j).
long concordance_sum(std::span<const int> x, std::span<const int> y);

/// Kendall's tau in the sign form: tied pairs contribute 0, the normaliser
/// stays L(L-1)/2. Throws DataError on a length or question mismatch.
double kendall_tau(const RankVector& x, const RankVector& y);

struct RankPair {
    RankVector x;
    RankVector y;
};

struct PermutationOptions {
    std::size_t resamples = 10000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct TauSummary {
    double mean_tau = 0.0;
    std::vector<double> per_question;
    std::size_t n_questions = 0;
    double p_value = 1.0;
};

/// Mean of per-question taus with a permutation p-value. Throws DataError
/// on an empty list or a non-uniform L.
TauSummary mean_tau(std::span<const RankPair> per_question, const PermutationOptions& options = {});

/// Two-sided permutation test: y ranks are shuffled within each question
/// and p = (#{|resampled mean| >= |observed mean|} + 1) / (resamples + 1).
/// Seed-deterministic for any worker count. Requires resamples >= 1000.
double tau_p_value(std::span<const RankPair> per_question, std::size_t resamples, std::uint64_t seed,
                   std::size_t workers = 1);

/// Mean of the non-negative taus between pairs of independent uniform
/// permutations of `items` items. Seed-deterministic for any worker count.
double mc_tau_baseline(int items, std::size_t reps, std::uint64_t seed, std::size_t workers = 1);

struct EvaluatorTable {
    std::string evaluator;
    std::vector<RankVector> ranks;
};

struct ConsistencyCell {
    std::string first;
    std::string second;
    TauSummary summary;
};

/// Mean tau and p-value for every unordered pair of evaluators, in input
/// order ((0,1), (0,2), ..., (1,2), ...). Every evaluator must rank the
/// same question ids; otherwise DataError lists the ids that differ.
std::vector<ConsistencyCell> evaluator_consistency_matrix(std::span<const EvaluatorTable> tables,
                                                          const PermutationOptions& options = {});

inline constexpr std::string_view leaderboard_question_id = "leaderboard";

/// Leaderboard CSV: header row, a name column first, then >= 2 numeric score
/// columns (higher is better). Each score column becomes one evaluator with
/// a single rank vector over all rows. `top` > 0 keeps only the first `top`
/// data rows.
std::vector<EvaluatorTable> import_leaderboard_csv(std::istream& in, std::size_t top = 0);
std::vector<EvaluatorTable> import_leaderboard_csv(const std::filesystem::path& path, std::size_t top = 0);

/// Rank tables as JSON Lines: {"question_id", "evaluator", "ranks"}.
void write_rank_jsonl(std::ostream& out, std::span<const EvaluatorTable> tables);
std::vector<EvaluatorTable> read_rank_jsonl(std::istream& in);

}  // namespace pplqa
