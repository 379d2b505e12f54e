#include "pplqa/provider.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pplqa/error.hpp"

namespace pplqa {

void TokenLogProbs::validate() const {
    if (tokens.empty()) throw DataError("empty token sequence");
    if (logprobs.size() != tokens.size() || offsets.size() != tokens.size()) {
        throw DataError(fmt::format("token/logprob/offset lengths differ: {}/{}/{}", tokens.size(), logprobs.size(),
                                    offsets.size()));
    }
    for (std::size_t i = 0; i < logprobs.size(); ++i) {
        if (!std::isfinite(logprobs[i]) || logprobs[i] > 0.0) {
            throw DataError(fmt::format("logprob {} at index {} is not a finite value <= 0", logprobs[i], i));
        }
        if (i > 0 && offsets[i] <= offsets[i - 1]) {
            throw DataError(fmt::format("offsets not strictly increasing at index {} ({} after {})", i, offsets[i],
                                        offsets[i - 1]));
        }
    }
}

double clamp_logprob(double value, std::size_t index) {
    if (!std::isfinite(value)) throw DataError(fmt::format("non-finite logprob at index {}", index));
    if (value > logprob_clamp_tolerance) {
        throw DataError(fmt::format("positive logprob {} at index {}", value, index));
    }
    return value > 0.0 ? 0.0 : value;
}

void GenerationRequest::validate() const {
    if (max_tokens < 1) throw UsageError(fmt::format("max_tokens must be >= 1, got {}", max_tokens));
    if (!(temperature >= 0.0)) throw UsageError(fmt::format("temperature must be >= 0, got {}", temperature));
}

}  // namespace pplqa
