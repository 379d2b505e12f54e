#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "pplqa/provider.hpp"

namespace pplqa {

std::string sha256_hex(std::string_view data);

inline constexpr int cache_schema_version = 1;

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t writes = 0;
};

/// Persistent response cache in front of any provider.
///
/// One file per entry, named by the SHA-256 of the canonical request key
/// (provider identity, model id, operation, request). Entries are written
/// to a unique temporary file and renamed into place, so concurrent readers
/// see either nothing or a complete entry. Unreadable or mismatched entries
/// count as misses and are rewritten. Sampled generations (temperature > 0)
/// bypass the cache.
class CachedProvider final : public LogprobProvider {
public:
    /// Throws UsageError if `dir` cannot be created or written.
    CachedProvider(std::shared_ptr<LogprobProvider> inner, std::filesystem::path dir);

    TokenLogProbs score_text(std::string_view text) override;
    std::string generate(const GenerationRequest& request) override;
    std::string identity() const override { return inner_->identity(); }
    std::string model_id() const override { return inner_->model_id(); }

    CacheStats stats() const noexcept;
    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    std::optional<nlohmann::json> load(const std::string& digest, const nlohmann::json& key) const;
    void store(const std::string& digest, const nlohmann::json& key, const nlohmann::json& payload);
    nlohmann::json make_key(std::string_view operation, nlohmann::json request) const;

    std::shared_ptr<LogprobProvider> inner_;
    std::filesystem::path dir_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
    std::atomic<std::uint64_t> writes_{0};
};

std::shared_ptr<CachedProvider> cached(std::shared_ptr<LogprobProvider> provider, const std::filesystem::path& dir);

struct CacheDirSummary {
    std::uint64_t entries = 0;
    std::uintmax_t bytes = 0;
};

CacheDirSummary cache_summary(const std::filesystem::path& dir);
/// Removes every entry file; returns how many were removed.
std::uint64_t cache_clear(const std::filesystem::path& dir);

nlohmann::json to_json(const TokenLogProbs& scored);
TokenLogProbs token_logprobs_from_json(const nlohmann::json& j);

}  // namespace pplqa
