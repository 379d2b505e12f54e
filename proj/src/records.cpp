#include "pplqa/records.hpp"

#include <fmt/format.h>

#include "pplqa/error.hpp"

namespace pplqa {

std::string_view to_string(Direction direction) noexcept {
    return direction == Direction::lower_better ? "lower_better" : "higher_better";
}

Direction direction_from_string(std::string_view text) {
    if (text == "lower_better") return Direction::lower_better;
    if (text == "higher_better") return Direction::higher_better;
    throw DataError(fmt::format("unknown direction '{}'", text));
}

void RankVector::validate() const {
    const auto length = static_cast<int>(ranks.size());
    if (length < 2) {
        throw DataError(fmt::format("rank vector for '{}' needs at least 2 entries, got {}", question_id, length));
    }
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (ranks[i] < 1 || ranks[i] > length) {
            throw DataError(fmt::format("rank vector for '{}': rank {} at position {} is outside 1..{}",
                                        question_id, ranks[i], i, length));
        }
    }
}

const std::string* QAItem::response_for(std::string_view model_id) const {
    for (const auto& [model, text] : responses) {
        if (model == model_id) return &text;
    }
    return nullptr;
}

nlohmann::ordered_json to_json(const RankVector& ranks) {
    return {{"question_id", ranks.question_id}, {"evaluator", ranks.evaluator}, {"ranks", ranks.ranks}};
}

RankVector rank_vector_from_json(const nlohmann::json& j) {
    try {
        RankVector out;
        out.question_id = j.at("question_id").get<std::string>();
        out.evaluator = j.value("evaluator", std::string{});
        out.ranks = j.at("ranks").get<std::vector<int>>();
        out.validate();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("invalid rank vector: {}", e.what()));
    }
}

nlohmann::ordered_json to_json(const ScoreRecord& record) {
    nlohmann::ordered_json components = nlohmann::ordered_json::object();
    for (const auto& [name, value] : record.components) components[name] = value;
    return {{"scorer", record.scorer},
            {"question_id", record.question_id},
            {"model_id", record.model_id},
            {"value", record.value},
            {"direction", to_string(record.direction)},
            {"components", std::move(components)},
            {"provider", record.provider},
            {"template", record.template_name}};
}

ScoreRecord score_record_from_json(const nlohmann::json& j) {
    try {
        ScoreRecord out;
        out.scorer = j.at("scorer").get<std::string>();
        out.question_id = j.at("question_id").get<std::string>();
        out.model_id = j.at("model_id").get<std::string>();
        out.value = j.at("value").get<double>();
        out.direction = direction_from_string(j.at("direction").get<std::string>());
        if (const auto it = j.find("components"); it != j.end()) {
            for (const auto& [name, value] : it->items()) out.components.emplace_back(name, value.get<double>());
        }
        out.provider = j.value("provider", std::string{});
        out.template_name = j.value("template", std::string{"none"});
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("invalid score record: {}", e.what()));
    }
}

nlohmann::ordered_json to_json(const QAItem& item) {
    nlohmann::ordered_json responses = nlohmann::ordered_json::object();
    for (const auto& [model, text] : item.responses) responses[model] = text;
    nlohmann::ordered_json j = {{"question_id", item.question_id},
                                {"domain", item.domain},
                                {"question", item.question},
                                {"responses", std::move(responses)}};
    if (item.human_ranks) j["human_ranks"] = item.human_ranks->ranks;
    if (item.binary_label) j["binary_label"] = *item.binary_label;
    return j;
}

}  // namespace pplqa
