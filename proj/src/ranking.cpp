#include "pplqa/ranking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/parallel.hpp"
#include "pplqa/random.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

constexpr int sgn(int v) noexcept { return (v > 0) - (v < 0); }

constexpr std::size_t permutation_chunk = 256;
constexpr std::size_t baseline_chunk = 4096;

std::size_t chunk_count(std::size_t total, std::size_t chunk) { return (total + chunk - 1) / chunk; }

std::size_t uniform_length(std::span<const RankPair> per_question) {
    if (per_question.empty()) throw DataError("no questions to average over");
    const auto length = per_question.front().x.size();
    for (const auto& pair : per_question) {
        if (pair.x.size() != length || pair.y.size() != length) {
            throw DataError(fmt::format("question '{}' ranks {} items, expected {}", pair.x.question_id,
                                        std::max(pair.x.size(), pair.y.size()), length));
        }
    }
    return length;
}

double normaliser(std::size_t length) { return 2.0 / (static_cast<double>(length) * static_cast<double>(length - 1)); }

// Minimal RFC 4180 field splitter: quoted fields may hold commas and "".
std::vector<std::string> parse_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back().push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back().push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back().push_back(c);
        }
    }
    if (quoted) throw DataError(fmt::format("line {}: unterminated quoted field", line_no));
    return fields;
}

}  // namespace

RankVector scores_to_ranks(std::span<const double> scores, Direction direction, std::string question_id,
                           std::string evaluator) {
    if (scores.size() < 2) throw DataError(fmt::format("need at least 2 scores to rank, got {}", scores.size()));
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError(fmt::format("score {} at index {} is not finite", scores[i], i));
    }
    RankVector out{std::move(question_id), std::move(evaluator), std::vector<int>(scores.size(), 1)};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t j = 0; j < scores.size(); ++j) {
            const bool better =
                direction == Direction::lower_better ? scores[j] < scores[i] : scores[j] > scores[i];
            if (better) ++out.ranks[i];
        }
    }
    return out;
}

long concordance_sum(std::span<const int> x, std::span<const int> y) {
    if (x.size() != y.size()) throw DataError(fmt::format("rank vectors differ in length ({} vs {})", x.size(), y.size()));
    long sum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) sum += sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
    }
    return sum;
}

double kendall_tau(const RankVector& x, const RankVector& y) {
    if (x.size() != y.size()) {
        throw DataError(fmt::format("rank vectors for '{}' differ in length ({} vs {})", x.question_id, x.size(), y.size()));
    }
    if (x.question_id != y.question_id) {
        throw DataError(fmt::format("rank vectors belong to different questions ('{}' vs '{}')", x.question_id,
                                    y.question_id));
    }
    if (x.size() < 2) throw DataError("Kendall's tau needs at least 2 ranked items");
    return static_cast<double>(concordance_sum(x.ranks, y.ranks)) * normaliser(x.size());
}

TauSummary mean_tau(std::span<const RankPair> per_question, const PermutationOptions& options) {
    uniform_length(per_question);
    TauSummary summary;
    summary.n_questions = per_question.size();
    summary.per_question.reserve(per_question.size());
    double total = 0.0;
    for (const auto& pair : per_question) {
        const double tau = kendall_tau(pair.x, pair.y);
        summary.per_question.push_back(tau);
        total += tau;
    }
    summary.mean_tau = total / static_cast<double>(per_question.size());
    summary.p_value = tau_p_value(per_question, options.resamples, options.seed, options.workers);
    return summary;
}

double tau_p_value(std::span<const RankPair> per_question, std::size_t resamples, std::uint64_t seed,
                   std::size_t workers) {
    if (resamples < 1000) throw UsageError(fmt::format("permutation test needs >= 1000 resamples, got {}", resamples));
    uniform_length(per_question);
    // All questions share L, so comparing integer concordance sums is exact.
    long observed = 0;
    for (const auto& pair : per_question) observed += concordance_sum(pair.x.ranks, pair.y.ranks);
    const long threshold = std::labs(observed);

    const auto chunks = chunk_count(resamples, permutation_chunk);
    std::vector<std::size_t> extreme(chunks, 0);
    parallel_for(chunks, workers, [&](std::size_t c) {
        std::mt19937_64 rng(stream_seed(seed, c));
        const auto begin = c * permutation_chunk;
        const auto end = std::min(resamples, begin + permutation_chunk);
        std::vector<int> shuffled;
        for (std::size_t r = begin; r < end; ++r) {
            long sum = 0;
            for (const auto& pair : per_question) {
                shuffled = pair.y.ranks;
                std::shuffle(shuffled.begin(), shuffled.end(), rng);
                sum += concordance_sum(pair.x.ranks, shuffled);
            }
            if (std::labs(sum) >= threshold) ++extreme[c];
        }
    });
    const auto count = std::accumulate(extreme.begin(), extreme.end(), std::size_t{0});
    return static_cast<double>(count + 1) / static_cast<double>(resamples + 1);
}

double mc_tau_baseline(int items, std::size_t reps, std::uint64_t seed, std::size_t workers) {
    if (items < 2) throw UsageError(fmt::format("baseline needs at least 2 items, got {}", items));
    if (reps < 1) throw UsageError("baseline needs at least 1 repetition");
    const auto length = static_cast<std::size_t>(items);
    const auto chunks = chunk_count(reps, baseline_chunk);
    struct Partial {
        long kept_sum = 0;
        std::size_t kept = 0;
    };
    std::vector<Partial> partials(chunks);
    parallel_for(chunks, workers, [&](std::size_t c) {
        std::mt19937_64 rng(stream_seed(seed, c));
        std::vector<int> first(length);
        std::vector<int> second(length);
        const auto begin = c * baseline_chunk;
        const auto end = std::min(reps, begin + baseline_chunk);
        for (std::size_t r = begin; r < end; ++r) {
            std::iota(first.begin(), first.end(), 1);
            std::iota(second.begin(), second.end(), 1);
            std::shuffle(first.begin(), first.end(), rng);
            std::shuffle(second.begin(), second.end(), rng);
            const long s = concordance_sum(first, second);
            if (s >= 0) {
                partials[c].kept_sum += s;
                ++partials[c].kept;
            }
        }
    });
    Partial total;
    for (const auto& p : partials) {
        total.kept_sum += p.kept_sum;
        total.kept += p.kept;
    }
    if (total.kept == 0) throw DataError("every sampled tau was negative; nothing to average");
    return static_cast<double>(total.kept_sum) / static_cast<double>(total.kept) * normaliser(length);
}

std::vector<ConsistencyCell> evaluator_consistency_matrix(std::span<const EvaluatorTable> tables,
                                                          const PermutationOptions& options) {
    if (tables.size() < 2) throw UsageError(fmt::format("need at least 2 evaluators, got {}", tables.size()));
    std::vector<std::map<std::string, const RankVector*>> by_question(tables.size());
    for (std::size_t t = 0; t < tables.size(); ++t) {
        for (const auto& rv : tables[t].ranks) {
            if (!by_question[t].emplace(rv.question_id, &rv).second) {
                throw DataError(fmt::format("evaluator '{}' ranks question '{}' twice", tables[t].evaluator,
                                            rv.question_id));
            }
        }
    }
    for (std::size_t t = 1; t < tables.size(); ++t) {
        std::vector<std::string> asymmetric;
        for (const auto& [id, _] : by_question[0]) {
            if (!by_question[t].contains(id)) asymmetric.push_back(id);
        }
        for (const auto& [id, _] : by_question[t]) {
            if (!by_question[0].contains(id)) asymmetric.push_back(id);
        }
        if (!asymmetric.empty()) {
            throw DataError(fmt::format("evaluators '{}' and '{}' rank different questions: {}", tables[0].evaluator,
                                        tables[t].evaluator, join(asymmetric, ", ")));
        }
    }

    std::vector<ConsistencyCell> cells;
    for (std::size_t a = 0; a < tables.size(); ++a) {
        for (std::size_t b = a + 1; b < tables.size(); ++b) {
            std::vector<RankPair> pairs;
            pairs.reserve(tables[a].ranks.size());
            for (const auto& rv : tables[a].ranks) pairs.push_back({rv, *by_question[b].at(rv.question_id)});
            cells.push_back({tables[a].evaluator, tables[b].evaluator, mean_tau(pairs, options)});
        }
    }
    return cells;
}

std::vector<EvaluatorTable> import_leaderboard_csv(std::istream& in, std::size_t top) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) header = parse_csv_line(line, line_no);
    }
    if (header.size() < 3) {
        throw DataError("leaderboard CSV needs a header with a name column and at least 2 score columns");
    }
    const auto columns = header.size() - 1;
    std::vector<std::vector<double>> scores(columns);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (top > 0 && rows >= top) break;
        const auto fields = parse_csv_line(line, line_no);
        if (fields.size() != header.size()) {
            throw DataError(fmt::format("line {}: expected {} fields, got {}", line_no, header.size(), fields.size()));
        }
        for (std::size_t c = 0; c < columns; ++c) {
            const auto text = trim(fields[c + 1]);
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
            if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
                throw DataError(fmt::format("line {}: column '{}' value '{}' is not a number", line_no,
                                            header[c + 1], text));
            }
            scores[c].push_back(value);
        }
        ++rows;
    }
    if (rows < 2) throw DataError(fmt::format("leaderboard CSV needs at least 2 rows, got {}", rows));
    std::vector<EvaluatorTable> tables;
    for (std::size_t c = 0; c < columns; ++c) {
        const auto name = std::string(trim(header[c + 1]));
        tables.push_back(
            {name, {scores_to_ranks(scores[c], Direction::higher_better, std::string(leaderboard_question_id), name)}});
    }
    return tables;
}

std::vector<EvaluatorTable> import_leaderboard_csv(const std::filesystem::path& path, std::size_t top) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot read leaderboard file {}", path.string()));
    try {
        return import_leaderboard_csv(in, top);
    } catch (const Error& e) {
        rethrow_with_context(e, path.string());
    }
}

void write_rank_jsonl(std::ostream& out, std::span<const EvaluatorTable> tables) {
    for (const auto& table : tables) {
        for (const auto& rv : table.ranks) {
            auto copy = rv;
            copy.evaluator = table.evaluator;
            out << to_json(copy).dump() << '\n';
        }
    }
}

std::vector<EvaluatorTable> read_rank_jsonl(std::istream& in) {
    std::vector<EvaluatorTable> tables;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        RankVector rv;
        try {
            rv = rank_vector_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("line {}: {}", line_no, e.what()));
        } catch (const Error& e) {
            rethrow_with_context(e, fmt::format("line {}", line_no));
        }
        auto it = std::find_if(tables.begin(), tables.end(),
                               [&](const EvaluatorTable& t) { return t.evaluator == rv.evaluator; });
        if (it == tables.end()) {
            tables.push_back({rv.evaluator, {}});
            it = std::prev(tables.end());
        }
        it->ranks.push_back(std::move(rv));
    }
    return tables;
}

}  // namespace pplqa
