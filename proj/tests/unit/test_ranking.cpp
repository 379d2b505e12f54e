#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pplqa/error.hpp"
#include "pplqa/ranking.hpp"
#include "test_support.hpp"

using namespace pplqa;

namespace {

RankVector rv(std::vector<int> ranks, std::string qid = "q", std::string evaluator = "e") {
    return RankVector{std::move(qid), std::move(evaluator), std::move(ranks)};
}

int sgn(int v) { return (v > 0) - (v < 0); }

double brute_tau(const std::vector<int>& x, const std::vector<int>& y) {
    const auto n = x.size();
    long concordant = 0;
    long discordant = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const int s = sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
            if (s > 0) ++concordant;
            if (s < 0) ++discordant;
        }
    }
    // Every unordered pair was visited twice.
    return static_cast<double>(concordant - discordant) / static_cast<double>(n * (n - 1));
}

// Exact expectation of the kept (non-negative) taus between two uniform
// permutations of n items, by enumerating every relative permutation.
double exact_baseline(int n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 1);
    std::vector<int> identity = perm;
    double sum = 0.0;
    long kept = 0;
    do {
        const double t = brute_tau(identity, perm);
        if (t >= 0.0) {
            sum += t;
            ++kept;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum / static_cast<double>(kept);
}

std::vector<int> random_ranks(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> u(1, n);
    std::vector<int> r(static_cast<std::size_t>(n));
    for (auto& v : r) v = u(rng);
    return r;
}

std::vector<RankPair> identical_pairs(std::size_t n, std::mt19937_64& rng) {
    std::vector<RankPair> out;
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<int> p{1, 2, 3, 4};
        std::shuffle(p.begin(), p.end(), rng);
        const auto id = "q" + std::to_string(k);
        out.push_back({rv(p, id, "x"), rv(p, id, "y")});
    }
    return out;
}

// Independent CSV reading for the leaderboard fixture: quoted fields,
// doubled quotes, no embedded newlines.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> fields(1);
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    fields.back() += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.emplace_back();
            } else {
                fields.back() += c;
            }
        }
        rows.push_back(fields);
    }
    return rows;
}

}  // namespace

TEST_SUITE("scores_to_ranks") {
    TEST_CASE("examples") {
        const std::vector<double> a{0.5, 2.0, 1.0, 3.0};
        CHECK(scores_to_ranks(a, Direction::lower_better).ranks == std::vector<int>{1, 3, 2, 4});
        const std::vector<double> b{1.0, 1.0, 2.0};
        CHECK(scores_to_ranks(b, Direction::lower_better).ranks == std::vector<int>{1, 1, 3});
        const std::vector<double> c{-1.0, -0.5};
        CHECK(scores_to_ranks(c, Direction::higher_better).ranks == std::vector<int>{2, 1});
        const std::vector<double> d{2.0, 5.0, 5.0, 1.0};
        CHECK(scores_to_ranks(d, Direction::higher_better).ranks == std::vector<int>{3, 1, 1, 4});
    }

    TEST_CASE("rejects non-finite and short input") {
        const std::vector<double> bad{1.0, NAN};
        CHECK_THROWS_AS(scores_to_ranks(bad, Direction::lower_better), DataError);
        const std::vector<double> inf{1.0, INFINITY};
        CHECK_THROWS_AS(scores_to_ranks(inf, Direction::lower_better), DataError);
        const std::vector<double> one{1.0};
        CHECK_THROWS_AS(scores_to_ranks(one, Direction::lower_better), DataError);
    }
}

TEST_SUITE("kendall") {
    TEST_CASE("examples") {
        CHECK(kendall_tau(rv({1, 2, 3, 4}), rv({1, 2, 3, 4})) == 1.0);
        CHECK(kendall_tau(rv({1, 2, 3, 4}), rv({4, 3, 2, 1})) == -1.0);
        CHECK(kendall_tau(rv({1, 2, 3, 4}), rv({2, 1, 3, 4})) == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
        CHECK(kendall_tau(rv({1, 1, 3}), rv({1, 2, 3})) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    }

    TEST_CASE("mismatches are rejected") {
        CHECK_THROWS_AS(kendall_tau(rv({1, 2, 3}), rv({1, 2})), DataError);
        CHECK_THROWS_AS(kendall_tau(rv({1, 2}, "q1"), rv({1, 2}, "q2")), DataError);
    }

    TEST_CASE("brute force agreement, symmetry, bounds and relabelling") {
        std::mt19937_64 rng(17);
        std::uniform_int_distribution<int> len(2, 6);
        for (int i = 0; i < 5000; ++i) {
            const int n = len(rng);
            const auto x = random_ranks(rng, n);
            const auto y = random_ranks(rng, n);
            const double t = kendall_tau(rv(x), rv(y));
            CHECK(std::abs(t - brute_tau(x, y)) <= 1e-12);
            CHECK(t == kendall_tau(rv(y), rv(x)));
            CHECK(t >= -1.0);
            CHECK(t <= 1.0);
            std::vector<std::size_t> idx(x.size());
            std::iota(idx.begin(), idx.end(), 0U);
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<int> px;
            std::vector<int> py;
            for (auto k : idx) {
                px.push_back(x[k]);
                py.push_back(y[k]);
            }
            CHECK(kendall_tau(rv(px), rv(py)) == doctest::Approx(t).epsilon(1e-15));
        }
    }
}

TEST_SUITE("mean_tau") {
    TEST_CASE("identical rankings give mean one and a tiny p") {
        std::mt19937_64 rng(1);
        const auto pairs = identical_pairs(50, rng);
        const auto s = mean_tau(pairs, {10000, 42, 1});
        CHECK(s.mean_tau == 1.0);
        CHECK(s.n_questions == 50);
        CHECK(s.per_question.size() == 50);
        CHECK(s.p_value < 0.001);
    }

    TEST_CASE("opposite questions cancel and p is near one") {
        std::vector<RankPair> pairs;
        for (int k = 0; k < 20; ++k) {
            const auto id = "q" + std::to_string(k);
            pairs.push_back({rv({1, 2, 3, 4}, id), rv(k % 2 ? std::vector<int>{4, 3, 2, 1} : std::vector<int>{1, 2, 3, 4}, id)});
        }
        const auto s = mean_tau(pairs, {2000, 7, 1});
        CHECK(s.mean_tau == 0.0);
        CHECK(std::abs(s.p_value - 1.0) <= 0.05);
    }

    TEST_CASE("mean equals an independent summation") {
        std::mt19937_64 rng(99);
        std::vector<RankPair> pairs;
        double sum = 0.0;
        for (int k = 0; k < 50; ++k) {
            const auto x = random_ranks(rng, 4);
            const auto y = random_ranks(rng, 4);
            const auto id = "q" + std::to_string(k);
            pairs.push_back({rv(x, id), rv(y, id)});
            sum += brute_tau(x, y);
        }
        const auto s = mean_tau(pairs, {1000, 3, 1});
        CHECK(std::abs(s.mean_tau - sum / 50.0) <= 1e-12);
        const double inner = std::accumulate(s.per_question.begin(), s.per_question.end(), 0.0) / 50.0;
        CHECK(std::abs(s.mean_tau - inner) <= 1e-12);
    }

    TEST_CASE("p-value is bit-identical across runs and worker counts") {
        std::mt19937_64 rng(4);
        std::vector<RankPair> pairs;
        for (int k = 0; k < 30; ++k) {
            const auto id = "q" + std::to_string(k);
            pairs.push_back({rv(random_ranks(rng, 4), id), rv(random_ranks(rng, 4), id)});
        }
        const double a = tau_p_value(pairs, 5000, 11, 1);
        const double b = tau_p_value(pairs, 5000, 11, 1);
        const double c = tau_p_value(pairs, 5000, 11, 6);
        CHECK(a == b);
        CHECK(a == c);
        CHECK(a > 0.0);
        CHECK(a <= 1.0);
    }

    TEST_CASE("errors") {
        CHECK_THROWS_AS(mean_tau(std::vector<RankPair>{}), DataError);
        std::vector<RankPair> mixed{{rv({1, 2}, "a"), rv({2, 1}, "a")}, {rv({1, 2, 3}, "b"), rv({1, 2, 3}, "b")}};
        CHECK_THROWS_AS(mean_tau(mixed), DataError);
        std::mt19937_64 rng(1);
        const auto pairs = identical_pairs(5, rng);
        CHECK_THROWS_AS(tau_p_value(pairs, 999, 1), UsageError);
    }
}

TEST_SUITE("baseline") {
    TEST_CASE("exact enumeration helper") {
        CHECK(exact_baseline(4) == doctest::Approx(14.0 / 45.0).epsilon(1e-15));
        CHECK(exact_baseline(2) == 1.0);
    }

    TEST_CASE("monte carlo agrees with enumeration") {
        CHECK(std::abs(mc_tau_baseline(4, 100000, 1) - 14.0 / 45.0) <= 0.01);
        CHECK(std::abs(mc_tau_baseline(4, 100000, 2, 4) - 14.0 / 45.0) <= 0.01);
        CHECK(mc_tau_baseline(2, 1000, 5) == 1.0);
        CHECK(std::abs(mc_tau_baseline(5, 100000, 3) - exact_baseline(5)) <= 0.01);
    }

    TEST_CASE("seed determinism across worker counts") {
        CHECK(mc_tau_baseline(4, 20000, 8, 1) == mc_tau_baseline(4, 20000, 8, 7));
    }

    TEST_CASE("invalid arguments") {
        CHECK_THROWS_AS(mc_tau_baseline(4, 0, 1), UsageError);
        CHECK_THROWS_AS(mc_tau_baseline(1, 100, 1), UsageError);
    }
}

TEST_SUITE("consistency") {
    EvaluatorTable table(std::string name, std::vector<std::vector<int>> ranks) {
        EvaluatorTable t{name, {}};
        for (std::size_t k = 0; k < ranks.size(); ++k) t.ranks.push_back(rv(ranks[k], "q" + std::to_string(k), name));
        return t;
    }

    TEST_CASE("identical tables give one") {
        const std::vector<std::vector<int>> r{{1, 2, 3, 4}, {2, 1, 4, 3}, {4, 3, 2, 1}};
        const std::vector<EvaluatorTable> tables{table("a", r), table("b", r)};
        const auto m = evaluator_consistency_matrix(tables, {1000, 1, 1});
        REQUIRE(m.size() == 1);
        CHECK(m[0].first == "a");
        CHECK(m[0].second == "b");
        CHECK(m[0].summary.mean_tau == 1.0);
    }

    TEST_CASE("four evaluators give six pairs in order") {
        const std::vector<std::vector<int>> r{{1, 2, 3, 4}, {2, 1, 4, 3}};
        const std::vector<EvaluatorTable> tables{table("a", r), table("b", r), table("c", r), table("d", r)};
        const auto m = evaluator_consistency_matrix(tables, {1000, 1, 1});
        REQUIRE(m.size() == 6);
        CHECK(m[0].first + m[0].second == "ab");
        CHECK(m[2].first + m[2].second == "ad");
        CHECK(m[5].first + m[5].second == "cd");
    }

    TEST_CASE("asymmetric question ids are listed") {
        auto a = table("a", {{1, 2}, {2, 1}});
        auto b = table("b", {{1, 2}, {2, 1}});
        b.ranks[1].question_id = "zzz";
        const std::vector<EvaluatorTable> tables{a, b};
        CHECK_THROWS_WITH_AS(evaluator_consistency_matrix(tables), doctest::Contains("zzz"), DataError);
    }
}

TEST_SUITE("leaderboard") {
    TEST_CASE("fixture import matches an independent recomputation") {
        const auto tables = import_leaderboard_csv(test::fixture("leaderboard.csv"));
        REQUIRE(tables.size() == 4);
        CHECK(tables[0].evaluator == "ARC");
        REQUIRE(tables[0].ranks.size() == 1);
        CHECK(tables[0].ranks[0].size() == 73);

        const auto rows = read_csv(test::fixture("leaderboard.csv"));
        REQUIRE(rows.size() == 74);
        CHECK(rows[1].size() == 5);
        std::vector<std::vector<double>> cols(4);
        for (std::size_t r = 1; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < 4; ++c) cols[c].push_back(std::stod(rows[r][c + 1]));
        }
        // Pairwise tau straight from scores: higher score = better rank.
        auto tau_from_scores = [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto n = a.size();
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double da = a[i] - a[j];
                    const double db = b[i] - b[j];
                    s += static_cast<double>(((da > 0) - (da < 0)) * ((db > 0) - (db < 0)));
                }
            }
            return 2.0 * s / static_cast<double>(n * (n - 1));
        };
        const auto m = evaluator_consistency_matrix(tables, {1000, 1, 1});
        REQUIRE(m.size() == 6);
        std::size_t k = 0;
        double lib_mean = 0.0;
        double ref_mean = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = i + 1; j < 4; ++j, ++k) {
                const double ref = tau_from_scores(cols[i], cols[j]);
                CHECK(std::abs(m[k].summary.mean_tau - ref) <= 1e-12);
                lib_mean += m[k].summary.mean_tau / 6.0;
                ref_mean += ref / 6.0;
            }
        }
        CHECK(std::abs(lib_mean - ref_mean) <= 1e-12);
    }

    TEST_CASE("quoted names, top filter and errors") {
        std::istringstream in("Model,A,B\n\"x, y\",1,2\nz,3,1\nw,2,2\n");
        const auto tables = import_leaderboard_csv(in);
        REQUIRE(tables.size() == 2);
        CHECK(tables[0].ranks[0].ranks == std::vector<int>{3, 1, 2});
        CHECK(tables[1].ranks[0].ranks == std::vector<int>{1, 3, 1});
        std::istringstream top_in("Model,A,B\na,1,2\nb,3,1\nc,2,2\n");
        CHECK(import_leaderboard_csv(top_in, 2)[0].ranks[0].size() == 2);
        std::istringstream one_col("Model,A\na,1\nb,2\n");
        CHECK_THROWS_AS(import_leaderboard_csv(one_col), DataError);
        std::istringstream bad("Model,A,B\na,1,x\nb,2,3\n");
        CHECK_THROWS_WITH_AS(import_leaderboard_csv(bad), doctest::Contains("line 2"), DataError);
    }
}

TEST_CASE("rank jsonl round trip") {
    const std::vector<EvaluatorTable> tables{
        {"pplqa", {rv({1, 2, 3}, "q1", "pplqa"), rv({2, 2, 1}, "q2", "pplqa")}},
        {"human", {rv({3, 1, 2}, "q1", "human"), rv({1, 2, 3}, "q2", "human")}},
    };
    std::stringstream ss;
    write_rank_jsonl(ss, tables);
    const auto back = read_rank_jsonl(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].evaluator == "pplqa");
    CHECK(back[0].ranks == tables[0].ranks);
    CHECK(back[1].ranks == tables[1].ranks);
}
