#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pplqa/provider.hpp"

namespace pplqa {

inline constexpr std::string_view unknown_token = "<unk>";

struct OracleToken {
    std::string text;  // lowercased
    std::size_t offset = 0;
};

/// Whitespace split, lowercased, with code-point offsets into `text`.
std::vector<OracleToken> oracle_tokenize(std::string_view text);

/// Count-based n-gram language model with optional Laplace smoothing.
///
/// The corpus is treated as one continuous token stream. A token is scored
/// against the `order - 1` tokens before it, so the first `order - 1` tokens
/// of any text have no context and are not scored. Words outside the
/// training vocabulary map to `<unk>`, which always belongs to the
/// vocabulary. With alpha = 0 an unseen event has probability 0.
class NgramModel {
public:
    using Context = std::vector<std::string>;

    static NgramModel train(std::string_view corpus, int order, double alpha);

    int order() const noexcept { return order_; }
    double alpha() const noexcept { return alpha_; }
    const std::set<std::string, std::less<>>& vocabulary() const noexcept { return vocabulary_; }

    /// P(token | context). `context` must hold exactly order - 1 tokens.
    double probability(std::span<const std::string> context, std::string_view token) const;

    /// Total count of windows that start with `context`.
    std::uint64_t context_count(std::span<const std::string> context) const;

    const std::map<Context, std::map<std::string, std::uint64_t, std::less<>>>& counts() const noexcept {
        return counts_;
    }

    /// Hex digest over order, alpha and counts; distinguishes trained models.
    const std::string& fingerprint() const noexcept { return fingerprint_; }

private:
    NgramModel() = default;

    int order_ = 1;
    double alpha_ = 0.0;
    std::set<std::string, std::less<>> vocabulary_;
    std::map<Context, std::map<std::string, std::uint64_t, std::less<>>> counts_;
    std::map<Context, std::uint64_t> context_totals_;
    std::string fingerprint_;
};

NgramModel ngram_train(std::string_view corpus, int order, double alpha);

/// Deterministic offline provider backed by an NgramModel.
class NgramProvider final : public LogprobProvider {
public:
    explicit NgramProvider(std::shared_ptr<const NgramModel> model, std::string model_id = "ngram-oracle",
                           std::uint64_t sampling_seed = 0);

    TokenLogProbs score_text(std::string_view text) override;

    /// Greedy at temperature 0 (ties go to the lexicographically smallest
    /// token); otherwise samples from p^(1/T) with a generator seeded from the
    /// prompt and the sampling seed. `<unk>` is never emitted.
    std::string generate(const GenerationRequest& request) override;

    std::string identity() const override;
    std::string model_id() const override { return model_id_; }

    const NgramModel& model() const noexcept { return *model_; }

private:
    std::shared_ptr<const NgramModel> model_;
    std::string model_id_;
    std::uint64_t sampling_seed_;
};

}  // namespace pplqa
