#include "pplqa/ngram.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "pplqa/cache.hpp"
#include "pplqa/error.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

std::uint64_t fnv1a(std::string_view data, std::uint64_t hash = 1469598103934665603ULL) {
    for (const unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

}  // namespace

std::vector<OracleToken> oracle_tokenize(std::string_view text) {
    std::vector<OracleToken> tokens;
    for (const auto& word : split_words(text)) tokens.push_back({to_lower_ascii(word.text), word.offset});
    return tokens;
}

NgramModel NgramModel::train(std::string_view corpus, int order, double alpha) {
    if (order < 1) throw UsageError(fmt::format("n-gram order must be >= 1, got {}", order));
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw UsageError(fmt::format("smoothing alpha must be a finite value >= 0, got {}", alpha));
    }
    const auto tokens = oracle_tokenize(corpus);
    if (tokens.size() < static_cast<std::size_t>(order)) {
        throw DataError(fmt::format("corpus too short: {} tokens for an order-{} model", tokens.size(), order));
    }
    NgramModel model;
    model.order_ = order;
    model.alpha_ = alpha;
    model.vocabulary_.emplace(unknown_token);
    for (const auto& t : tokens) model.vocabulary_.insert(t.text);

    const auto width = static_cast<std::size_t>(order);
    for (std::size_t end = width; end <= tokens.size(); ++end) {
        Context context;
        for (std::size_t i = end - width; i + 1 < end; ++i) context.push_back(tokens[i].text);
        ++model.counts_[context][tokens[end - 1].text];
        ++model.context_totals_[context];
    }

    std::string summary = fmt::format("order={};alpha={:.17g};", order, alpha);
    for (const auto& [context, nexts] : model.counts_) {
        summary += join(context, "\x1f");
        summary += '\x1e';
        for (const auto& [token, count] : nexts) summary += fmt::format("{}\x1f{};", token, count);
        summary += '\n';
    }
    model.fingerprint_ = sha256_hex(summary);
    return model;
}

std::uint64_t NgramModel::context_count(std::span<const std::string> context) const {
    const auto it = context_totals_.find(Context(context.begin(), context.end()));
    return it == context_totals_.end() ? 0 : it->second;
}

double NgramModel::probability(std::span<const std::string> context, std::string_view token) const {
    if (context.size() + 1 != static_cast<std::size_t>(order_)) {
        throw UsageError(fmt::format("order-{} model needs {} context tokens, got {}", order_, order_ - 1,
                                     context.size()));
    }
    const std::string_view key = vocabulary_.contains(token) ? token : unknown_token;
    const auto ctx_it = counts_.find(Context(context.begin(), context.end()));
    std::uint64_t count = 0;
    std::uint64_t total = 0;
    if (ctx_it != counts_.end()) {
        total = context_totals_.at(ctx_it->first);
        if (const auto it = ctx_it->second.find(key); it != ctx_it->second.end()) count = it->second;
    }
    if (alpha_ > 0.0) {
        return (static_cast<double>(count) + alpha_) /
               (static_cast<double>(total) + alpha_ * static_cast<double>(vocabulary_.size()));
    }
    return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

NgramModel ngram_train(std::string_view corpus, int order, double alpha) {
    return NgramModel::train(corpus, order, alpha);
}

NgramProvider::NgramProvider(std::shared_ptr<const NgramModel> model, std::string model_id,
                             std::uint64_t sampling_seed)
    : model_(std::move(model)), model_id_(std::move(model_id)), sampling_seed_(sampling_seed) {
    if (!model_) throw UsageError("n-gram provider needs a model");
}

TokenLogProbs NgramProvider::score_text(std::string_view text) {
    const auto tokens = oracle_tokenize(text);
    if (tokens.empty()) throw DataError("cannot score empty text");
    const auto width = static_cast<std::size_t>(model_->order());
    if (tokens.size() < width) {
        throw DataError(fmt::format("text has {} tokens; an order-{} oracle scores none of them", tokens.size(),
                                    model_->order()));
    }
    const auto& vocab = model_->vocabulary();
    auto mapped = [&](const std::string& t) { return vocab.contains(t) ? t : std::string(unknown_token); };

    TokenLogProbs out;
    std::vector<std::string> context;
    for (std::size_t i = width - 1; i < tokens.size(); ++i) {
        context.clear();
        for (std::size_t j = i + 1 - width; j < i; ++j) context.push_back(mapped(tokens[j].text));
        const double p = model_->probability(context, tokens[i].text);
        if (!(p > 0.0)) {
            throw DataError(fmt::format("token '{}' at offset {} has zero probability under the oracle (alpha = 0)",
                                        tokens[i].text, tokens[i].offset));
        }
        out.tokens.push_back(tokens[i].text);
        out.logprobs.push_back(std::log(p));
        out.offsets.push_back(tokens[i].offset);
    }
    return out;
}

std::string NgramProvider::generate(const GenerationRequest& request) {
    request.validate();
    const auto& vocab = model_->vocabulary();
    std::vector<std::string> history;
    for (auto& t : oracle_tokenize(request.prompt)) {
        history.push_back(vocab.contains(t.text) ? std::move(t.text) : std::string(unknown_token));
    }
    const auto width = static_cast<std::size_t>(model_->order());
    std::mt19937_64 rng(fnv1a(request.prompt) ^ sampling_seed_);

    std::string text;
    std::vector<double> weights;
    std::vector<const std::string*> candidates;
    for (int step = 0; step < request.max_tokens; ++step) {
        std::vector<std::string> context;
        if (width > 1) {
            const auto need = width - 1;
            // Short histories are padded with a token that never occurs, which
            // makes the context unseen.
            for (std::size_t k = need; k > 0; --k) {
                context.push_back(history.size() >= k ? history[history.size() - k] : std::string{});
            }
        }
        candidates.clear();
        weights.clear();
        for (const auto& token : vocab) {
            if (token == unknown_token) continue;
            candidates.push_back(&token);
            weights.push_back(model_->probability(context, token));
        }
        std::size_t pick = 0;
        if (request.temperature == 0.0) {
            for (std::size_t i = 1; i < weights.size(); ++i) {
                if (weights[i] > weights[pick]) pick = i;
            }
            if (!(weights[pick] > 0.0)) break;
        } else {
            double total = 0.0;
            for (auto& w : weights) {
                w = w > 0.0 ? std::pow(w, 1.0 / request.temperature) : 0.0;
                total += w;
            }
            if (!(total > 0.0)) break;
            std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
            pick = dist(rng);
        }
        const auto& token = *candidates[pick];
        if (!text.empty()) text.push_back(' ');
        text += token;
        history.push_back(token);

        bool stopped = false;
        for (const auto& stop : request.stop) {
            if (stop.empty()) continue;
            if (const auto at = text.find(stop); at != std::string::npos) {
                text.resize(at);
                stopped = true;
                break;
            }
        }
        if (stopped) break;
    }
    if (trim(text).empty()) throw DataError("empty completion");
    return text;
}

std::string NgramProvider::identity() const { return "ngram:" + model_->fingerprint().substr(0, 16); }

}  // namespace pplqa
