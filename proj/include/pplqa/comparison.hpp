#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pplqa/provider.hpp"
#include "pplqa/records.hpp"
#include "pplqa/scorers.hpp"

namespace pplqa {

class ResultStore;

enum class Outcome { first = 0, second = 1, tie = 2 };

/// lower_better -> argmin, higher_better -> argmax, equal -> tie. Throws
/// UsageError when the records come from different scorers or directions.
Outcome decide_winner(const ScoreRecord& a, const ScoreRecord& b);

/// exclude: ties leave the tally. count_wrong: a tie counts as the wrong
/// label. random: a seeded coin per example decides whether the tie counts
/// as right or wrong.
enum class TiePolicy { exclude, count_wrong, random };

TiePolicy tie_policy_from_string(std::string_view text);
std::string_view to_string(TiePolicy policy) noexcept;

/// Label 1 is the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;
    std::uint64_t ties = 0;  // ties seen, whatever the policy did with them

    std::uint64_t decided() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const Outcome> predictions, std::span<const int> labels,
                          TiePolicy policy = TiePolicy::exclude, std::uint64_t seed = 0);

/// Zero whenever a denominator factor is zero.
double mcc(const ConfusionCounts& c) noexcept;
double accuracy(const ConfusionCounts& c) noexcept;

struct LabelMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision/recall/F1 treating `label` as positive; 0/0 -> 0.
LabelMetrics label_metrics(const ConfusionCounts& c, int label) noexcept;

struct MetricsReport {
    std::string scorer;
    std::string group;  // "overall" or a domain
    ConfusionCounts counts;
    LabelMetrics label0;
    LabelMetrics label1;
    double accuracy = 0.0;
    double mcc = 0.0;
    std::uint64_t errors = 0;
    /// Set when nothing was decided; all metrics are then 0.
    bool empty = false;

    std::uint64_t decided() const noexcept { return counts.decided(); }
    std::uint64_t ties() const noexcept { return counts.ties; }
};

MetricsReport make_report(const ConfusionCounts& counts, std::string scorer, std::string group);
nlohmann::ordered_json to_json(const MetricsReport& report);

struct PairwiseOptions {
    TiePolicy tie_policy = TiePolicy::exclude;
    std::uint64_t seed = 0;
    bool group_by_domain = true;
    std::size_t workers = 1;
    /// Fraction of examples allowed to fail scoring before the run aborts.
    double max_error_rate = 0.05;
    ScorerOptions scorer;
};

struct PairwiseRun {
    /// "overall" first, then domains in order of first appearance.
    std::vector<MetricsReport> reports;
    /// Two per successfully scored example, in dataset order.
    std::vector<ScoreRecord> records;
    std::vector<std::string> failures;
};

/// Scores both answers of every example, decides winners and tallies them
/// per group. Per-example failures are excluded and counted; the run throws
/// ErrorRateExceeded if their share exceeds max_error_rate. Score records
/// are appended to `store` when given.
PairwiseRun evaluate_pairwise(std::span<const PairwiseExample> dataset, const ScorerSpec& scorer,
                              LogprobProvider& provider, const PairwiseOptions& options = {},
                              ResultStore* store = nullptr);

}  // namespace pplqa
