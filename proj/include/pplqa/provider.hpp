#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pplqa {

/// Per-token conditional log-probabilities (natural log) for a scored text.
/// Offsets are code-point positions of each token in that text. Tokens the
/// provider could not score (no conditioning context) are absent.
struct TokenLogProbs {
    std::vector<std::string> tokens;
    std::vector<double> logprobs;
    std::vector<std::size_t> offsets;

    std::size_t size() const noexcept { return tokens.size(); }
    /// Throws DataError on unequal lengths, emptiness, a logprob that is
    /// non-finite or positive, or offsets that are not strictly increasing.
    void validate() const;
    bool operator==(const TokenLogProbs&) const = default;
};

/// Largest positive logprob treated as float noise and clamped to zero.
inline constexpr double logprob_clamp_tolerance = 1e-6;

/// Clamps values in (0, 1e-6] to 0. Throws DataError for larger positive or
/// non-finite values, naming `index`.
double clamp_logprob(double value, std::size_t index);

struct GenerationRequest {
    std::string prompt;
    int max_tokens = 32;
    double temperature = 0.0;
    std::vector<std::string> stop;

    /// Throws UsageError when max_tokens < 1 or temperature < 0.
    void validate() const;
};

/// An evaluator model: returns token log-probabilities for text and
/// completions for prompts. Implementations must be safe to call from
/// several threads at once.
class LogprobProvider {
public:
    virtual ~LogprobProvider() = default;

    virtual TokenLogProbs score_text(std::string_view text) = 0;
    virtual std::string generate(const GenerationRequest& request) = 0;

    /// Stable identifier of the backend (kind plus whatever distinguishes
    /// one instance's outputs from another's). Used in cache keys.
    virtual std::string identity() const = 0;
    virtual std::string model_id() const = 0;
};

}  // namespace pplqa
