#pragma once

// Plain data records shared by the scoring, comparison, ranking and dataset
// layers, together with their JSON forms.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace pplqa {

enum class Direction { lower_better, higher_better };

std::string_view to_string(Direction direction) noexcept;
Direction direction_from_string(std::string_view text);

/// Ranks over L systems for one question, best = 1. Equal integers are ties.
struct RankVector {
    std::string question_id;
    std::string evaluator;
    std::vector<int> ranks;

    std::size_t size() const noexcept { return ranks.size(); }
    /// Throws DataError unless L >= 2 and every rank is in 1..L.
    void validate() const;
    bool operator==(const RankVector&) const = default;
};

struct ScoreRecord {
    std::string scorer;
    std::string question_id;
    std::string model_id;
    double value = 0.0;
    Direction direction = Direction::lower_better;
    std::vector<std::pair<std::string, double>> components;
    std::string provider;
    std::string template_name;  // "none" when no template was applied

    bool operator==(const ScoreRecord&) const = default;
};

/// One question with responses from several models. `responses` keeps the
/// order in which the models appear in the source file; rank vectors and
/// binary labels refer to that order.
struct QAItem {
    std::string question_id;
    std::string domain;
    std::string question;
    std::vector<std::pair<std::string, std::string>> responses;  // model_id -> text
    std::optional<RankVector> human_ranks;
    std::optional<int> binary_label;

    const std::string* response_for(std::string_view model_id) const;
    bool operator==(const QAItem&) const = default;
};

/// Two answers to one question; label 0 means answer_a is better.
struct PairwiseExample {
    std::string question_id;
    std::string domain;
    std::string question;
    std::string model_a;
    std::string model_b;
    std::string answer_a;
    std::string answer_b;
    int label = 0;
    std::string source;

    bool operator==(const PairwiseExample&) const = default;
};

nlohmann::ordered_json to_json(const RankVector& ranks);
RankVector rank_vector_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const ScoreRecord& record);
ScoreRecord score_record_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const QAItem& item);

}  // namespace pplqa
