#include "pplqa/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/parallel.hpp"
#include "pplqa/random.hpp"
#include "pplqa/result_store.hpp"

namespace pplqa {
namespace {

double ratio(double num, double den) noexcept { return den == 0.0 ? 0.0 : num / den; }

void tally(ConfusionCounts& c, int predicted, int label) {
    if (label == 1) {
        predicted == 1 ? ++c.tp : ++c.fn;
    } else {
        predicted == 1 ? ++c.fp : ++c.tn;
    }
}

}  // namespace

Outcome decide_winner(const ScoreRecord& a, const ScoreRecord& b) {
    if (a.scorer != b.scorer || a.direction != b.direction) {
        throw UsageError(fmt::format("cannot compare scores from '{}' ({}) and '{}' ({})", a.scorer,
                                     to_string(a.direction), b.scorer, to_string(b.direction)));
    }
    if (a.value == b.value) return Outcome::tie;
    const bool a_lower = a.value < b.value;
    if (a.direction == Direction::lower_better) return a_lower ? Outcome::first : Outcome::second;
    return a_lower ? Outcome::second : Outcome::first;
}

TiePolicy tie_policy_from_string(std::string_view text) {
    if (text == "exclude") return TiePolicy::exclude;
    if (text == "wrong" || text == "count_wrong") return TiePolicy::count_wrong;
    if (text == "random" || text == "random_with_seed") return TiePolicy::random;
    throw UsageError(fmt::format("unknown tie policy '{}' (expected exclude, wrong or random)", text));
}

std::string_view to_string(TiePolicy policy) noexcept {
    switch (policy) {
        case TiePolicy::exclude: return "exclude";
        case TiePolicy::count_wrong: return "wrong";
        case TiePolicy::random: return "random";
    }
    return "exclude";
}

ConfusionCounts confusion(std::span<const Outcome> predictions, std::span<const int> labels, TiePolicy policy,
                          std::uint64_t seed) {
    if (predictions.size() != labels.size()) {
        throw DataError(fmt::format("{} predictions for {} labels", predictions.size(), labels.size()));
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int label = labels[i];
        if (label != 0 && label != 1) throw DataError(fmt::format("label {} at index {} is not 0 or 1", label, i));
        if (predictions[i] != Outcome::tie) {
            tally(c, predictions[i] == Outcome::first ? 0 : 1, label);
            continue;
        }
        ++c.ties;
        switch (policy) {
            case TiePolicy::exclude: break;
            case TiePolicy::count_wrong: tally(c, 1 - label, label); break;
            case TiePolicy::random: {
                const bool right = (stream_seed(seed, i) & 1U) != 0;
                tally(c, right ? label : 1 - label, label);
                break;
            }
        }
    }
    return c;
}

double mcc(const ConfusionCounts& c) noexcept {
    const auto tp = static_cast<double>(c.tp);
    const auto tn = static_cast<double>(c.tn);
    const auto fp = static_cast<double>(c.fp);
    const auto fn = static_cast<double>(c.fn);
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (den == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(den);
}

double accuracy(const ConfusionCounts& c) noexcept {
    return ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.decided()));
}

LabelMetrics label_metrics(const ConfusionCounts& c, int label) noexcept {
    // For label 0 the roles swap: tn are its true positives.
    const auto tp = static_cast<double>(label == 1 ? c.tp : c.tn);
    const auto fp = static_cast<double>(label == 1 ? c.fp : c.fn);
    const auto fn = static_cast<double>(label == 1 ? c.fn : c.fp);
    LabelMetrics m;
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    return m;
}

MetricsReport make_report(const ConfusionCounts& counts, std::string scorer, std::string group) {
    MetricsReport r;
    r.scorer = std::move(scorer);
    r.group = std::move(group);
    r.counts = counts;
    r.label0 = label_metrics(counts, 0);
    r.label1 = label_metrics(counts, 1);
    r.accuracy = accuracy(counts);
    r.mcc = mcc(counts);
    r.empty = counts.decided() == 0;
    return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
    auto label = [](const LabelMetrics& m) {
        return nlohmann::ordered_json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    };
    return {{"scorer", r.scorer},
            {"group", r.group},
            {"tp", r.counts.tp},
            {"fp", r.counts.fp},
            {"fn", r.counts.fn},
            {"tn", r.counts.tn},
            {"decided", r.decided()},
            {"ties", r.ties()},
            {"errors", r.errors},
            {"label0", label(r.label0)},
            {"label1", label(r.label1)},
            {"accuracy", r.accuracy},
            {"mcc", r.mcc},
            {"empty", r.empty}};
}

PairwiseRun evaluate_pairwise(std::span<const PairwiseExample> dataset, const ScorerSpec& scorer,
                              LogprobProvider& provider, const PairwiseOptions& options, ResultStore* store) {
    if (dataset.empty()) throw DataError("no examples");
    struct Scored {
        std::optional<std::pair<ScoreRecord, ScoreRecord>> records;
        std::string failure;
    };
    std::vector<Scored> scored(dataset.size());
    parallel_for(dataset.size(), options.workers, [&](std::size_t i) {
        const auto& ex = dataset[i];
        try {
            if (ex.label != 0 && ex.label != 1) throw DataError(fmt::format("label {} is not 0 or 1", ex.label));
            auto a = run_scorer(scorer, ex.question_id, ex.model_a, ex.question, ex.answer_a, provider, options.scorer);
            auto b = run_scorer(scorer, ex.question_id, ex.model_b, ex.question, ex.answer_b, provider, options.scorer);
            scored[i].records.emplace(std::move(a), std::move(b));
        } catch (const Error& e) {
            scored[i].failure = fmt::format("example {} ('{}'): {}", i, ex.question_id, e.what());
        }
    });

    PairwiseRun run;
    for (const auto& s : scored) {
        if (!s.records) run.failures.push_back(s.failure);
    }
    const double error_rate = static_cast<double>(run.failures.size()) / static_cast<double>(dataset.size());
    if (error_rate > options.max_error_rate) {
        throw ErrorRateExceeded(fmt::format("{} of {} examples failed with scorer {} (threshold {:.0f}%); first: {}",
                                            run.failures.size(), dataset.size(), scorer.label(),
                                            100.0 * options.max_error_rate, run.failures.front()));
    }

    std::vector<std::string> groups{"overall"};
    if (options.group_by_domain) {
        for (const auto& ex : dataset) {
            if (!ex.domain.empty() && std::find(groups.begin(), groups.end(), ex.domain) == groups.end()) {
                groups.push_back(ex.domain);
            }
        }
    }
    for (const auto& group : groups) {
        ConfusionCounts counts;
        std::uint64_t errors = 0;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (group != "overall" && dataset[i].domain != group) continue;
            if (!scored[i].records) {
                ++errors;
                continue;
            }
            const auto outcome = decide_winner(scored[i].records->first, scored[i].records->second);
            const int label = dataset[i].label;
            // Tally one example at a time so the random tie policy keys on
            // the dataset index, identical across groups.
            const auto one = confusion(std::span(&outcome, 1), std::span(&label, 1), options.tie_policy,
                                       stream_seed(options.seed, i));
            counts.tp += one.tp;
            counts.fp += one.fp;
            counts.fn += one.fn;
            counts.tn += one.tn;
            counts.ties += one.ties;
        }
        auto report = make_report(counts, scorer.label(), group);
        report.errors = errors;
        run.reports.push_back(std::move(report));
    }
    for (auto& s : scored) {
        if (!s.records) continue;
        run.records.push_back(std::move(s.records->first));
        run.records.push_back(std::move(s.records->second));
    }
    if (store) {
        for (const auto& r : run.records) store->append("score", to_json(r));
        for (const auto& r : run.reports) store->append("metrics", to_json(r));
    }
    return run;
}

}  // namespace pplqa
