#include "pplqa/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/parallel.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void line_error(std::size_t line_no, std::string_view problem) {
    throw DataError(fmt::format("line {}: {}", line_no, problem));
}

template <class Json>
Json parse_line(std::string_view line, std::size_t line_no) {
    try {
        auto j = Json::parse(line);
        if (!j.is_object()) line_error(line_no, "expected a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        line_error(line_no, fmt::format("invalid JSON at byte {}", e.byte));
    }
}

template <class Json>
const Json& field(const Json& j, std::string_view name, std::size_t line_no) {
    const auto it = j.find(std::string(name));
    if (it == j.end()) line_error(line_no, fmt::format("missing field '{}'", name));
    return *it;
}

template <class Json>
std::string string_field(const Json& j, std::string_view name, std::size_t line_no) {
    const auto& v = field(j, name, line_no);
    if (!v.is_string()) line_error(line_no, fmt::format("field '{}' must be a string", name));
    return v.template get<std::string>();
}

template <class Json>
std::string id_field(const Json& j, std::size_t line_no) {
    const auto& v = field(j, "question_id", line_no);
    if (v.is_string()) return v.template get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.template get<long long>());
    line_error(line_no, "field 'question_id' must be a string or an integer");
}

template <class Fn>
void for_each_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        fn(std::string_view(line), line_no);
    }
}

// Contents of the first `turns` messages with the given role.
std::vector<std::string> messages_for(const nlohmann::json& conversation, std::string_view role, std::size_t turns,
                                      std::string_view name, std::size_t line_no) {
    if (!conversation.is_array()) line_error(line_no, fmt::format("field '{}' must be an array", name));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < conversation.size() && out.size() < turns; ++i) {
        const auto& message = conversation[i];
        if (!message.is_object() || !message.contains("role") || !message.contains("content") ||
            !message["role"].is_string() || !message["content"].is_string()) {
            line_error(line_no, fmt::format("{}[{}] must be an object with string 'role' and 'content'", name, i));
        }
        if (message["role"].get<std::string>() == role) out.push_back(message["content"].get<std::string>());
    }
    if (out.size() < turns) {
        line_error(line_no, fmt::format("{} has {} '{}' message(s), turn needs {}", name, out.size(), role, turns));
    }
    return out;
}

template <class T>
std::vector<T> load_file(const std::filesystem::path& path, const auto& loader) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    try {
        return loader(in);
    } catch (const Error& e) {
        rethrow_with_context(e, path.string());
    }
}

}  // namespace

MtBenchLoad load_mtbench(std::istream& in, std::string_view separator) {
    MtBenchLoad result;
    for_each_line(in, [&](std::string_view line, std::size_t line_no) {
        ++result.lines;
        const auto j = parse_line<nlohmann::json>(line, line_no);
        const auto winner = string_field(j, "winner", line_no);
        int label = 0;
        if (winner == "model_a") {
            label = 0;
        } else if (winner == "model_b") {
            label = 1;
        } else if (winner == "tie" || winner.starts_with("tie ")) {
            ++result.ties_dropped;
            return;
        } else {
            line_error(line_no, fmt::format("unknown winner '{}'", winner));
        }
        const auto& turn_value = field(j, "turn", line_no);
        if (!turn_value.is_number_integer() || turn_value.get<long long>() < 1) {
            line_error(line_no, "field 'turn' must be a positive integer");
        }
        const auto turns = turn_value.get<std::size_t>();
        PairwiseExample ex;
        ex.question_id = id_field(j, line_no);
        ex.model_a = string_field(j, "model_a", line_no);
        ex.model_b = string_field(j, "model_b", line_no);
        const auto& conv_a = field(j, "conversation_a", line_no);
        const auto& conv_b = field(j, "conversation_b", line_no);
        ex.question = join(messages_for(conv_a, "user", turns, "conversation_a", line_no), separator);
        ex.answer_a = join(messages_for(conv_a, "assistant", turns, "conversation_a", line_no), separator);
        ex.answer_b = join(messages_for(conv_b, "assistant", turns, "conversation_b", line_no), separator);
        if (trim(ex.answer_a).empty() || trim(ex.answer_b).empty()) line_error(line_no, "empty answer");
        ex.label = label;
        ex.source = "mt_bench";
        if (const auto it = j.find("category"); it != j.end() && it->is_string()) ex.domain = it->get<std::string>();
        result.examples.push_back(std::move(ex));
    });
    return result;
}

MtBenchLoad load_mtbench(const std::filesystem::path& path, std::string_view separator) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    try {
        return load_mtbench(in, separator);
    } catch (const Error& e) {
        rethrow_with_context(e, path.string());
    }
}

std::vector<QAItem> load_domain_questions(std::istream& in) {
    std::vector<QAItem> items;
    std::set<std::string, std::less<>> seen;
    for_each_line(in, [&](std::string_view line, std::size_t line_no) {
        const auto j = parse_line<ordered_json>(line, line_no);
        QAItem item;
        item.question_id = id_field(j, line_no);
        if (item.question_id.empty()) line_error(line_no, "empty question_id");
        if (!seen.insert(item.question_id).second) {
            line_error(line_no, fmt::format("duplicate question_id '{}'", item.question_id));
        }
        item.domain = string_field(j, "domain", line_no);
        item.question = string_field(j, "question", line_no);
        if (trim(item.question).empty()) line_error(line_no, "empty question");
        const auto& responses = field(j, "responses", line_no);
        if (!responses.is_object() || responses.empty()) {
            line_error(line_no, "field 'responses' must be a non-empty object");
        }
        for (const auto& [model, text] : responses.items()) {
            if (!text.is_string()) line_error(line_no, fmt::format("response of model '{}' must be a string", model));
            item.responses.emplace_back(model, text.get<std::string>());
        }
        if (const auto it = j.find("human_ranks"); it != j.end() && !it->is_null()) {
            if (!it->is_array()) line_error(line_no, "field 'human_ranks' must be an array");
            RankVector ranks{item.question_id, "human", {}};
            for (const auto& r : *it) {
                if (!r.is_number_integer()) line_error(line_no, "human_ranks must hold integers");
                ranks.ranks.push_back(r.get<int>());
            }
            if (ranks.size() != item.responses.size()) {
                line_error(line_no, fmt::format("rank-length mismatch: {} human_ranks for {} responses", ranks.size(),
                                                item.responses.size()));
            }
            try {
                ranks.validate();
            } catch (const Error& e) {
                line_error(line_no, e.what());
            }
            item.human_ranks = std::move(ranks);
        }
        if (const auto it = j.find("binary_label"); it != j.end() && !it->is_null()) {
            if (!it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1)) {
                line_error(line_no, "binary_label must be 0 or 1");
            }
            if (item.responses.size() != 2) {
                line_error(line_no, fmt::format("binary_label needs exactly 2 responses, got {}", item.responses.size()));
            }
            item.binary_label = it->get<int>();
        }
        items.push_back(std::move(item));
    });
    return items;
}

std::vector<QAItem> load_domain_questions(const std::filesystem::path& path) {
    return load_file<QAItem>(path, [](std::istream& in) { return load_domain_questions(in); });
}

bool looks_like_mtbench(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            return j.is_object() && j.contains("conversation_a");
        } catch (const nlohmann::json::exception&) {
            return false;
        }
    }
    return false;
}

std::vector<std::string> domains_of(std::span<const QAItem> items) {
    std::vector<std::string> domains;
    for (const auto& item : items) {
        if (std::find(domains.begin(), domains.end(), item.domain) == domains.end()) domains.push_back(item.domain);
    }
    return domains;
}

std::vector<PairwiseExample> pairwise_from_items(std::span<const QAItem> items, std::string_view source) {
    std::vector<PairwiseExample> out;
    for (const auto& item : items) {
        if (item.responses.size() != 2 || !item.binary_label) continue;
        out.push_back({item.question_id, item.domain, item.question, item.responses[0].first,
                       item.responses[1].first, item.responses[0].second, item.responses[1].second,
                       *item.binary_label, std::string(source)});
    }
    return out;
}

std::vector<QAItem> items_from_pairwise(std::span<const PairwiseExample> examples) {
    std::vector<QAItem> items;
    items.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        QAItem item;
        item.question_id = fmt::format("{}#{}", ex.question_id, i);
        item.domain = ex.domain;
        item.question = ex.question;
        item.responses = {{ex.model_a, ex.answer_a}, {ex.model_b, ex.answer_b}};
        if (ex.model_a == ex.model_b) item.responses[1].first += "#b";
        item.binary_label = ex.label;
        items.push_back(std::move(item));
    }
    return items;
}

void write_domain_questions(std::ostream& out, std::span<const QAItem> items) {
    for (const auto& item : items) out << to_json(item).dump() << '\n';
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError(fmt::format("columns differ in length ({} vs {})", x.size(), y.size()));
    if (x.size() < 3) throw DataError(fmt::format("correlation needs at least 3 points, got {}", x.size()));
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<LengthCorrelation> ppl_length_correlation(std::span<const QAItem> items, LogprobProvider& provider,
                                                      const LengthCorrelationOptions& options) {
    struct Point {
        std::size_t item;
        std::string model;
        double ppl = 0.0;
        double words = 0.0;
    };
    std::vector<Point> points;
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (const auto& [model, text] : items[i].responses) {
            if (trim(text).empty()) {
                throw DataError(fmt::format("question '{}': empty response from '{}'", items[i].question_id, model));
            }
            points.push_back({i, model, 0.0, static_cast<double>(word_count(text))});
        }
    }
    parallel_for(points.size(), options.workers, [&](std::size_t p) {
        auto& point = points[p];
        const auto& item = items[point.item];
        std::string qa(trim(item.question));
        qa += options.separator;
        qa += trim(*item.response_for(point.model));
        point.ppl = perplexity(provider.score_text(qa).logprobs).ppl;
    });

    std::vector<std::string> models;
    for (const auto& p : points) {
        if (std::find(models.begin(), models.end(), p.model) == models.end()) models.push_back(p.model);
    }
    std::vector<std::string> groups{""};
    if (options.per_domain) {
        for (auto& d : domains_of(items)) groups.push_back(std::move(d));
    }
    std::vector<LengthCorrelation> out;
    for (const auto& model : models) {
        for (const auto& group : groups) {
            std::vector<double> ppl;
            std::vector<double> words;
            for (const auto& p : points) {
                if (p.model != model) continue;
                if (!group.empty() && items[p.item].domain != group) continue;
                ppl.push_back(p.ppl);
                words.push_back(p.words);
            }
            if (ppl.size() < 3) {
                throw DataError(fmt::format("model '{}'{} has {} responses; correlation needs at least 3", model,
                                            group.empty() ? "" : fmt::format(" in domain '{}'", group), ppl.size()));
            }
            out.push_back({model, group, ppl.size(), pearson(ppl, words)});
        }
    }
    return out;
}

}  // namespace pplqa
