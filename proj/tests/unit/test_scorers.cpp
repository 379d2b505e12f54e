#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "pplqa/error.hpp"
#include "pplqa/ngram.hpp"
#include "pplqa/scorers.hpp"
#include "pplqa/templates.hpp"
#include "test_support.hpp"

using namespace pplqa;

namespace {

NgramProvider unigram_abab() {
    return NgramProvider(std::make_shared<const NgramModel>(NgramModel::train("a a a b", 1, 0.0)));
}

QAItem item(std::string question, std::vector<std::pair<std::string, std::string>> responses) {
    QAItem out;
    out.question_id = "q1";
    out.domain = "test";
    out.question = std::move(question);
    out.responses = std::move(responses);
    return out;
}

}  // namespace

TEST_SUITE("pplqa scorer") {
    TEST_CASE("without a template the scorer reports pplqa_score") {
        auto p = unigram_abab();
        ScorerOptions options;
        options.separator = " ";
        const auto rec = score_pplqa(item("a a b", {{"m", "a b"}}), "m", p, nullptr, options);
        const auto direct = pplqa_score("a a b", "a b", p, " ");
        CHECK(rec.value == direct.pplqa);
        CHECK(std::abs(rec.value - 0.2403) < 1e-4);
        CHECK(rec.direction == Direction::lower_better);
        CHECK(rec.template_name == "none");
        CHECK(rec.scorer == "pplqa");
        REQUIRE(rec.components.size() == 2);
        CHECK(rec.components[0].first == "ppl_qa");
        CHECK(rec.components[0].second == direct.ppl_qa);
        CHECK(rec.components[1].second == direct.ppl_a);
    }

    TEST_CASE("identical responses get identical scores") {
        test::WordProvider p;
        p.word_logprob = {{"plasma", -2.5}, {"gas", -0.25}};
        const auto it = item("what is a star", {{"m1", "hot plasma gas"}, {"m2", "hot plasma gas"}});
        const auto a = score_pplqa(it, "m1", p);
        const auto b = score_pplqa(it, "m2", p);
        CHECK(a.value == b.value);
        CHECK(a.components == b.components);
    }

    TEST_CASE("templated variant carries the template name") {
        test::WordProvider p;
        const auto registry = TemplateRegistry::with_builtins();
        const auto& tmpl = registry.get("coherence");
        const auto rec = score_pplqa(item("why", {{"m", "because"}}), "m", p, &tmpl);
        CHECK(rec.template_name == "coherence");
        CHECK(rec.scorer == "pplqa[coherence]");
    }

    TEST_CASE("unknown model is a data error") {
        test::WordProvider p;
        CHECK_THROWS_WITH_AS(score_pplqa(item("q", {{"m", "a"}}), "other", p), doctest::Contains("other"), DataError);
    }
}

TEST_SUITE("gptscore") {
    TEST_CASE("answer span mean over offsets") {
        TokenLogProbs t;
        t.tokens = {"q", " x", " y", " z"};
        t.logprobs = {-7.0, -1.0, -3.0, -9.0};
        t.offsets = {0, 1, 3, 5};
        CHECK(answer_span_mean(t, 1, 5) == doctest::Approx(-2.0));
        CHECK_THROWS_WITH_AS(answer_span_mean(t, 10, 12), doctest::Contains("answer span empty"), DataError);
    }

    TEST_CASE("unigram gptscore matches the hand value") {
        auto p = unigram_abab();
        ScorerOptions options;
        options.separator = " ";
        const auto rec = score_gptscore(item("a", {{"m", "a b"}}), "m", p, nullptr, options);
        const double expected = (std::log(0.75) + std::log(0.25)) / 2.0;
        CHECK(rec.value == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(rec.value - (-0.8370)) < 1e-4);
        CHECK(rec.direction == Direction::higher_better);
    }

    TEST_CASE("changing the prefix does not move the value when answer tokens keep their logprobs") {
        test::WordProvider p;
        p.word_logprob = {{"x", -1.0}, {"y", -3.0}, {"long", -8.0}};
        const auto short_q = score_gptscore(item("q", {{"m", "x y"}}), "m", p);
        const auto long_q = score_gptscore(item("a long long question", {{"m", "x y"}}), "m", p);
        CHECK(short_q.value == doctest::Approx(-2.0));
        CHECK(long_q.value == short_q.value);
    }

    TEST_CASE("tokens after the answer in a template are not averaged") {
        test::WordProvider p;
        p.word_logprob = {{"x", -1.0}, {"tail", -50.0}};
        const PromptTemplate tmpl{"wrap", Aspect::none, TemplateKind::qa, "Q: {question} A: {answer} tail tail", ""};
        const auto rec = score_gptscore(item("q", {{"m", "x x"}}), "m", p, &tmpl);
        CHECK(rec.value == doctest::Approx(-1.0));
    }
}

TEST_SUITE("geval") {
    TEST_CASE("score parsing") {
        CHECK(parse_geval_score("Score: 4") == 4);
        CHECK(parse_geval_score(" 5") == 5);
        CHECK(parse_geval_score("I would rate this 3 out of 5") == 3);
        CHECK(parse_geval_score("On a 1-5 scale: 2") == 2);
        CHECK(parse_geval_score("4/5") == 4);
        CHECK(parse_geval_score("excellent") == std::nullopt);
        CHECK(parse_geval_score("7") == std::nullopt);
        CHECK(parse_geval_score("3.5") == std::nullopt);
        CHECK(parse_geval_score("") == std::nullopt);
    }

    TEST_CASE("generation is parsed into the record value") {
        test::WordProvider p;
        p.on_generate = [](const GenerationRequest&) { return std::string(" Score: 4"); };
        const auto registry = TemplateRegistry::with_builtins();
        const auto rec = score_geval(item("q", {{"m", "answer"}}), "m", p, registry.get("geval_coherence"));
        CHECK(rec.value == 4.0);
        CHECK(rec.direction == Direction::higher_better);
        CHECK(rec.template_name == "geval_coherence");
    }

    TEST_CASE("prompt is the rendered form with temperature zero") {
        test::WordProvider p;
        GenerationRequest seen;
        p.on_generate = [&](const GenerationRequest& r) {
            seen = r;
            return std::string("2");
        };
        const auto registry = TemplateRegistry::with_builtins();
        score_geval(item("What is rain?", {{"m", "Water falling."}}), "m", p, registry.get("geval_fluency"));
        CHECK(seen.prompt.find("Question: What is rain?") != std::string::npos);
        CHECK(seen.prompt.find("Answer: Water falling.") != std::string::npos);
        CHECK(seen.temperature == 0.0);
    }

    TEST_CASE("unparseable completions are retried then reported") {
        test::WordProvider p;
        p.on_generate = [](const GenerationRequest&) { return std::string("excellent"); };
        const auto registry = TemplateRegistry::with_builtins();
        ScorerOptions options;
        options.max_attempts = 3;
        CHECK_THROWS_WITH_AS(score_geval(item("q", {{"m", "a"}}), "m", p, registry.get("geval_coherence"), options),
                             doctest::Contains("excellent"), DataError);
        CHECK(p.generate_calls == 3);
    }

    TEST_CASE("a retry can recover") {
        test::WordProvider p;
        p.on_generate = [&](const GenerationRequest&) {
            return p.generate_calls == 1 ? std::string("hmm") : std::string("Score: 5");
        };
        const auto registry = TemplateRegistry::with_builtins();
        const auto rec = score_geval(item("q", {{"m", "a"}}), "m", p, registry.get("geval_relevance"));
        CHECK(rec.value == 5.0);
        CHECK(p.generate_calls == 2);
    }

    TEST_CASE("geval without a template is a usage error") {
        test::WordProvider p;
        const ScorerSpec spec{ScorerKind::geval, std::nullopt};
        CHECK_THROWS_AS(run_scorer(spec, "q", "m", "q", "a", p), UsageError);
    }
}

TEST_SUITE("judge") {
    TEST_CASE("order extraction") {
        CHECK(extract_judge_order("Answer 2, Answer 1, Answer 4, Answer 3", 4) == std::vector<int>{2, 1, 4, 3});
        CHECK(extract_judge_order("best: Answer 1 ... worst: Answer 2", 2) == std::vector<int>{1, 2});
        CHECK(extract_judge_order("answer #3 > Answer 1 > answer 2", 3) == std::vector<int>{3, 1, 2});
    }

    TEST_CASE("invalid rankings carry the raw completion") {
        CHECK_THROWS_WITH_AS(extract_judge_order("Answer 2, Answer 2, Answer 1, Answer 3", 4),
                             doctest::Contains("invalid judge ranking"), DataError);
        CHECK_THROWS_WITH_AS(extract_judge_order("Answer 1 then Answer 5", 2), doctest::Contains("Answer 5"),
                             DataError);
        CHECK_THROWS_AS(extract_judge_order("no idea", 4), DataError);
    }

    TEST_CASE("judge_rank maps mention order to ranks") {
        test::WordProvider p;
        std::string prompt;
        p.on_generate = [&](const GenerationRequest& r) {
            prompt = r.prompt;
            return std::string("Answer 2, Answer 1, Answer 4, Answer 3");
        };
        const auto registry = TemplateRegistry::with_builtins();
        const std::vector<std::string> answers{"one", "two", "three", "four"};
        const auto ranks = judge_rank("Which?", answers, p, registry.get("judge_4"));
        CHECK(ranks.ranks == std::vector<int>{2, 1, 4, 3});
        CHECK(prompt.find("Answer 3: 'three'") != std::string::npos);
        CHECK(prompt.find("Question: Which?") != std::string::npos);
    }

    TEST_CASE("judge with fewer answers than slots drops unused lines") {
        test::WordProvider p;
        std::string prompt;
        p.on_generate = [&](const GenerationRequest& r) {
            prompt = r.prompt;
            return std::string("best: Answer 2 ... worst: Answer 1");
        };
        const auto registry = TemplateRegistry::with_builtins();
        const std::vector<std::string> answers{"left", "right"};
        const auto ranks = judge_rank("Which?", answers, p, registry.get("judge_4"));
        CHECK(ranks.ranks == std::vector<int>{2, 1});
        CHECK(prompt.find("Answer 3") == std::string::npos);
        CHECK(prompt.find("{answer_") == std::string::npos);
    }

    TEST_CASE("judge rejects a single or empty answer") {
        test::WordProvider p;
        const auto registry = TemplateRegistry::with_builtins();
        const std::vector<std::string> one{"only"};
        CHECK_THROWS_AS(judge_rank("q", one, p, registry.get("judge_4")), UsageError);
        const std::vector<std::string> blank{"x", "  "};
        CHECK_THROWS_AS(judge_rank("q", blank, p, registry.get("judge_4")), DataError);
    }
}

TEST_SUITE("templates") {
    TEST_CASE("placeholder text inside inputs is not expanded") {
        const PromptTemplate t{"t", Aspect::none, TemplateKind::qa, "{question}|{answer}", ""};
        const auto r = render_qa(t, "{answer}", "x");
        CHECK(r.text == "{answer}|x");
        CHECK(r.answer_begin == 9);
        CHECK(r.answer_end == 10);
    }

    TEST_CASE("answer span counts code points") {
        const PromptTemplate t{"t", Aspect::none, TemplateKind::qa, "é {question} {answer}", ""};
        const auto r = render_qa(t, "ñ", "ü!");
        CHECK(r.answer_begin == 4);
        CHECK(r.answer_end == 6);
    }

    TEST_CASE("file format round trip") {
        const PromptTemplate t{"mine", Aspect::fluency, TemplateKind::qa, "Q {question}\n---\nA {answer}", ""};
        const auto back = parse_template(format_template(t));
        CHECK(back.name == t.name);
        CHECK(back.aspect == t.aspect);
        CHECK(back.kind == t.kind);
        CHECK(back.body == t.body);
    }

    TEST_CASE("judge capacity and missing placeholders") {
        const auto registry = TemplateRegistry::with_builtins();
        CHECK(judge_capacity(registry.get("judge_4")) == 4);
        const PromptTemplate bad{"b", Aspect::none, TemplateKind::judge, "{question} {answer_2}", ""};
        CHECK_THROWS_AS(bad.validate(), UsageError);
        CHECK_THROWS_AS(registry.get("nonexistent"), UsageError);
    }

    TEST_CASE("templates directory overrides builtins") {
        test::TempDir dir;
        test::write_file(dir / "coherence.txt", "name: coherence\naspect: coherence\nkind: qa\n---\n{question} / {answer}\n");
        auto registry = TemplateRegistry::with_builtins();
        registry.load_directory(dir.path());
        CHECK(registry.get("coherence").body == "{question} / {answer}");
    }

    TEST_CASE("shipped template files parse and validate") {
        auto registry = TemplateRegistry::with_builtins();
        registry.load_directory(test::fixture("../../templates"));
        for (const auto* name : {"coherence_short", "judge_3", "geval_helpfulness"}) {
            CAPTURE(name);
            const auto& t = registry.get(name);
            CHECK_NOTHROW(t.validate());
        }
        CHECK(judge_capacity(registry.get("judge_3")) == 3);
        CHECK(registry.get("geval_helpfulness").kind == TemplateKind::form);
    }
}
