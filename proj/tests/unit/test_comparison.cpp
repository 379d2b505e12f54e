#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pplqa/comparison.hpp"
#include "pplqa/datasets.hpp"
#include "pplqa/error.hpp"
#include "pplqa/ngram.hpp"
#include "pplqa/result_store.hpp"
#include "test_support.hpp"

using namespace pplqa;

namespace {

ScoreRecord rec(std::string scorer, double value, Direction dir) {
    ScoreRecord r;
    r.scorer = std::move(scorer);
    r.value = value;
    r.direction = dir;
    return r;
}

ConfusionCounts counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.fn = fn;
    c.tn = tn;
    return c;
}

std::shared_ptr<const NgramModel> corpus_oracle() {
    static const auto model = std::make_shared<const NgramModel>(
        NgramModel::train(test::read_file(test::fixture("oracle_corpus.txt")), 2, 0.1));
    return model;
}

std::vector<PairwiseExample> synthetic_pairs() {
    const auto items = load_domain_questions(test::fixture("synthetic_pairs.jsonl"));
    return pairwise_from_items(items, "synthetic");
}

PairwiseExample example(std::string id, std::string a, std::string b, int label, std::string domain = "d") {
    PairwiseExample ex;
    ex.question_id = std::move(id);
    ex.domain = std::move(domain);
    ex.question = "a question";
    ex.model_a = "ma";
    ex.model_b = "mb";
    ex.answer_a = std::move(a);
    ex.answer_b = std::move(b);
    ex.label = label;
    return ex;
}

}  // namespace

TEST_SUITE("decide_winner") {
    TEST_CASE("direction decides argmin or argmax") {
        CHECK(decide_winner(rec("pplqa", 1.2, Direction::lower_better), rec("pplqa", 3.4, Direction::lower_better)) ==
              Outcome::first);
        CHECK(decide_winner(rec("gptscore", -0.8, Direction::higher_better),
                            rec("gptscore", -0.3, Direction::higher_better)) == Outcome::second);
        CHECK(decide_winner(rec("geval", 4, Direction::higher_better), rec("geval", 4, Direction::higher_better)) ==
              Outcome::tie);
    }

    TEST_CASE("mismatched scorers are rejected") {
        CHECK_THROWS_AS(
            decide_winner(rec("pplqa", 1, Direction::lower_better), rec("gptscore", 1, Direction::higher_better)),
            UsageError);
        CHECK_THROWS_AS(
            decide_winner(rec("pplqa", 1, Direction::lower_better), rec("pplqa", 1, Direction::higher_better)),
            UsageError);
    }

    TEST_CASE("strictly increasing transforms never change the winner") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.01, 10.0);
        for (int i = 0; i < 1000; ++i) {
            const double a = u(rng);
            const double b = u(rng);
            for (auto dir : {Direction::lower_better, Direction::higher_better}) {
                const auto plain = decide_winner(rec("s", a, dir), rec("s", b, dir));
                const auto logged = decide_winner(rec("s", std::log(a), dir), rec("s", std::log(b), dir));
                const auto cubed = decide_winner(rec("s", a * a * a + 1, dir), rec("s", b * b * b + 1, dir));
                CHECK(plain == logged);
                CHECK(plain == cubed);
            }
        }
    }
}

TEST_SUITE("confusion") {
    TEST_CASE("perfect and flipped predictions") {
        const std::vector<Outcome> pred{Outcome::first, Outcome::second, Outcome::second, Outcome::first};
        const std::vector<int> labels{0, 1, 1, 0};
        const auto c = confusion(pred, labels);
        CHECK(c.fp == 0);
        CHECK(c.fn == 0);
        CHECK(c.tp == 2);
        CHECK(c.tn == 2);
        const std::vector<int> flipped{1, 0, 0, 1};
        const auto f = confusion(pred, flipped);
        CHECK(f.tp == 0);
        CHECK(f.tn == 0);
    }

    TEST_CASE("tie policies") {
        const std::vector<Outcome> pred{Outcome::first, Outcome::tie, Outcome::second};
        const std::vector<int> labels{0, 1, 1};
        const auto ex = confusion(pred, labels, TiePolicy::exclude);
        CHECK(ex.decided() == 2);
        CHECK(ex.ties == 1);
        const auto wrong = confusion(pred, labels, TiePolicy::count_wrong);
        CHECK(wrong.decided() == 3);
        CHECK(wrong.fn == 1);
        CHECK(accuracy(wrong) == doctest::Approx(2.0 / 3.0));
    }

    TEST_CASE("random tie policy is seeded and symmetric in the labels") {
        const std::vector<Outcome> ties(1000, Outcome::tie);
        std::vector<int> labels(1000);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3 == 0);
        std::vector<int> flipped(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) flipped[i] = 1 - labels[i];
        const auto a = confusion(ties, labels, TiePolicy::random, 9);
        const auto b = confusion(ties, labels, TiePolicy::random, 9);
        const auto f = confusion(ties, flipped, TiePolicy::random, 9);
        CHECK(a == b);
        CHECK(a.decided() == 1000);
        CHECK(a.tp + a.tn == f.tp + f.tn);
        CHECK(accuracy(a) == doctest::Approx(0.5).epsilon(0.1));
        CHECK(confusion(ties, labels, TiePolicy::random, 10) != a);
    }

    TEST_CASE("length mismatch and bad labels") {
        const std::vector<Outcome> pred{Outcome::first};
        const std::vector<int> two{0, 1};
        CHECK_THROWS_AS(confusion(pred, two), DataError);
        const std::vector<int> bad{2};
        CHECK_THROWS_AS(confusion(pred, bad), DataError);
    }
}

TEST_SUITE("metrics") {
    TEST_CASE("mcc examples") {
        CHECK(mcc(counts(5, 0, 0, 5)) == doctest::Approx(1.0));
        CHECK(mcc(counts(3, 1, 2, 4)) == doctest::Approx(10.0 / std::sqrt(600.0)).epsilon(1e-12));
        CHECK(std::abs(mcc(counts(3, 1, 2, 4)) - 0.40825) < 1e-5);
        CHECK(mcc(counts(0, 0, 0, 10)) == 0.0);
        CHECK(mcc(counts(0, 0, 0, 0)) == 0.0);
    }

    TEST_CASE("mcc stays in bounds on random tallies") {
        std::mt19937_64 rng(3);
        std::uniform_int_distribution<int> u(0, 50);
        for (int i = 0; i < 5000; ++i) {
            const double m = mcc(counts(u(rng), u(rng), u(rng), u(rng)));
            CHECK(m >= -1.0);
            CHECK(m <= 1.0);
        }
    }

    TEST_CASE("per-label precision recall f1") {
        const auto c = counts(3, 1, 2, 4);
        const auto l1 = label_metrics(c, 1);
        const auto l0 = label_metrics(c, 0);
        CHECK(l1.precision == doctest::Approx(0.75));
        CHECK(l1.recall == doctest::Approx(0.6));
        CHECK(l1.f1 == doctest::Approx(2.0 / 3.0));
        CHECK(l0.precision == doctest::Approx(4.0 / 6.0));
        CHECK(l0.recall == doctest::Approx(0.8));
        CHECK(l0.f1 == doctest::Approx(8.0 / 11.0));
        CHECK(accuracy(c) == doctest::Approx(0.7));
    }

    TEST_CASE("perfect prediction report") {
        const auto r = make_report(counts(4, 0, 0, 6), "pplqa", "overall");
        CHECK(r.label0.f1 == 1.0);
        CHECK(r.label1.f1 == 1.0);
        CHECK(r.accuracy == 1.0);
        CHECK_FALSE(r.empty);
    }

    TEST_CASE("all ties under exclude give an empty report") {
        const std::vector<Outcome> pred(5, Outcome::tie);
        const std::vector<int> labels{0, 1, 0, 1, 1};
        const auto r = make_report(confusion(pred, labels), "geval", "overall");
        CHECK(r.empty);
        CHECK(r.decided() == 0);
        CHECK(r.ties() == 5);
        CHECK(r.accuracy == 0.0);
        CHECK(r.mcc == 0.0);
        CHECK(r.label0.f1 == 0.0);
    }
}

TEST_SUITE("evaluate_pairwise") {
    TEST_CASE("fluent answers beat their shuffles under the order-2 oracle") {
        NgramProvider oracle(corpus_oracle());
        auto dataset = synthetic_pairs();
        REQUIRE(dataset.size() == 100);
        // Put the fluent answer first everywhere so every label is 0.
        for (auto& ex : dataset) {
            if (ex.label == 1) {
                std::swap(ex.answer_a, ex.answer_b);
                ex.label = 0;
            }
        }
        const ScorerSpec spec{ScorerKind::pplqa, std::nullopt};
        const auto run = evaluate_pairwise(dataset, spec, oracle);
        REQUIRE(run.reports.size() == 5);
        CHECK(run.reports[0].group == "overall");
        CHECK(run.reports[0].accuracy >= 0.9);
        CHECK(run.records.size() == 200);
        CHECK(run.failures.empty());
    }

    TEST_CASE("mixed labels reach high accuracy and mcc, per domain too") {
        NgramProvider oracle(corpus_oracle());
        const auto dataset = synthetic_pairs();
        const ScorerSpec spec{ScorerKind::pplqa, std::nullopt};
        PairwiseOptions options;
        options.workers = 4;
        const auto run = evaluate_pairwise(dataset, spec, oracle, options);
        CHECK(run.reports[0].accuracy >= 0.9);
        CHECK(run.reports[0].mcc > 0.7);
        std::uint64_t decided = 0;
        for (std::size_t i = 1; i < run.reports.size(); ++i) decided += run.reports[i].decided();
        CHECK(decided == run.reports[0].decided());
        CHECK(run.reports[1].group == "astronomy");
    }

    TEST_CASE("swapping answers and flipping labels leaves metrics unchanged up to the label swap") {
        NgramProvider oracle(corpus_oracle());
        const auto dataset = synthetic_pairs();
        auto swapped = dataset;
        for (auto& ex : swapped) {
            std::swap(ex.answer_a, ex.answer_b);
            std::swap(ex.model_a, ex.model_b);
            ex.label = 1 - ex.label;
        }
        const ScorerSpec spec{ScorerKind::gptscore, std::nullopt};
        const auto a = evaluate_pairwise(dataset, spec, oracle).reports[0];
        const auto b = evaluate_pairwise(swapped, spec, oracle).reports[0];
        CHECK(a.accuracy == b.accuracy);
        CHECK(a.mcc == doctest::Approx(b.mcc).epsilon(1e-12));
        CHECK(a.label0.f1 == doctest::Approx(b.label1.f1).epsilon(1e-12));
        CHECK(a.label1.f1 == doctest::Approx(b.label0.f1).epsilon(1e-12));
    }

    TEST_CASE("single correctly decided example") {
        test::WordProvider p;
        p.word_logprob = {{"noise", -6.0}};
        const std::vector<PairwiseExample> one{example("e1", "clean answer", "noise noise", 0)};
        const ScorerSpec spec{ScorerKind::gptscore, std::nullopt};
        const auto run = evaluate_pairwise(one, spec, p);
        CHECK(run.reports[0].accuracy == 1.0);
        CHECK(run.reports[0].decided() == 1);
    }

    TEST_CASE("error rate threshold") {
        test::WordProvider p;
        p.word_logprob = {{"broken", 0.5}};  // positive logprob: perplexity rejects it
        std::vector<PairwiseExample> dataset;
        for (int i = 0; i < 10; ++i) dataset.push_back(example("e" + std::to_string(i), "fine", "also fine ok", 0));
        dataset[3].answer_b = "broken";
        const ScorerSpec spec{ScorerKind::pplqa, std::nullopt};
        CHECK_THROWS_AS(evaluate_pairwise(dataset, spec, p), ErrorRateExceeded);
        PairwiseOptions lenient;
        lenient.max_error_rate = 0.2;
        const auto run = evaluate_pairwise(dataset, spec, p, lenient);
        REQUIRE(run.failures.size() == 1);
        CHECK(run.failures[0].find("e3") != std::string::npos);
        CHECK(run.reports[0].errors == 1);
        CHECK(run.reports[0].decided() + run.reports[0].ties() == 9);
    }

    TEST_CASE("empty dataset") {
        test::WordProvider p;
        const ScorerSpec spec{ScorerKind::pplqa, std::nullopt};
        CHECK_THROWS_WITH_AS(evaluate_pairwise(std::vector<PairwiseExample>{}, spec, p),
                             doctest::Contains("no examples"), DataError);
    }

    TEST_CASE("score records and reports are persisted") {
        test::TempDir dir;
        ResultStore store(dir / "results.jsonl", "run-1");
        test::WordProvider p;
        const std::vector<PairwiseExample> data{example("e1", "x", "y z", 0, "d1"), example("e2", "x", "y", 1, "d2")};
        const ScorerSpec spec{ScorerKind::pplqa, std::nullopt};
        evaluate_pairwise(data, spec, p, {}, &store);
        const auto scores = store.scan("score");
        CHECK(scores.records.size() == 4);
        CHECK(scores.warnings.empty());
        const auto metrics = store.scan("metrics");
        CHECK(metrics.records.size() == 3);
        CHECK(score_record_from_json(scores.records[0].payload).question_id == "e1");
    }

    TEST_CASE("results do not depend on the worker count") {
        NgramProvider oracle(corpus_oracle());
        const auto dataset = synthetic_pairs();
        const ScorerSpec spec{ScorerKind::pplqa, std::nullopt};
        PairwiseOptions one;
        one.workers = 1;
        PairwiseOptions eight;
        eight.workers = 8;
        const auto a = evaluate_pairwise(dataset, spec, oracle, one);
        const auto b = evaluate_pairwise(dataset, spec, oracle, eight);
        CHECK(a.records == b.records);
        for (std::size_t i = 0; i < a.reports.size(); ++i) CHECK(to_json(a.reports[i]) == to_json(b.reports[i]));
    }
}
