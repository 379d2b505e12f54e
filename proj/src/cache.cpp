#include "pplqa/cache.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "pplqa/error.hpp"

namespace pplqa {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view entry_extension = ".json";

std::string unique_suffix() {
    thread_local std::mt19937_64 rng(std::random_device{}() ^
                                     std::hash<std::thread::id>{}(std::this_thread::get_id()));
    return fmt::format("{:016x}", rng());
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

nlohmann::json to_json(const TokenLogProbs& scored) {
    return {{"tokens", scored.tokens}, {"logprobs", scored.logprobs}, {"offsets", scored.offsets}};
}

TokenLogProbs token_logprobs_from_json(const nlohmann::json& j) {
    TokenLogProbs out;
    out.tokens = j.at("tokens").get<std::vector<std::string>>();
    out.logprobs = j.at("logprobs").get<std::vector<double>>();
    out.offsets = j.at("offsets").get<std::vector<std::size_t>>();
    return out;
}

CachedProvider::CachedProvider(std::shared_ptr<LogprobProvider> inner, fs::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    if (!inner_) throw UsageError("cache needs a provider to wrap");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
        throw UsageError(fmt::format("cache directory {} cannot be created: {}", dir_.string(), ec.message()));
    }
    const auto probe = dir_ / (".probe-" + unique_suffix());
    {
        std::ofstream out(probe);
        if (!out || !(out << "ok")) {
            throw UsageError(fmt::format("cache directory {} is not writable", dir_.string()));
        }
    }
    fs::remove(probe, ec);
}

nlohmann::json CachedProvider::make_key(std::string_view operation, nlohmann::json request) const {
    return {{"provider", inner_->identity()},
            {"model_id", inner_->model_id()},
            {"operation", operation},
            {"request", std::move(request)}};
}

std::optional<nlohmann::json> CachedProvider::load(const std::string& digest, const nlohmann::json& key) const {
    std::ifstream in(dir_ / (digest + std::string(entry_extension)), std::ios::binary);
    if (!in) return std::nullopt;
    try {
        const auto entry = nlohmann::json::parse(in);
        if (entry.at("schema_version").get<int>() != cache_schema_version) return std::nullopt;
        if (entry.at("key") != key) return std::nullopt;
        return std::optional<nlohmann::json>(std::in_place, entry.at("payload"));
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

void CachedProvider::store(const std::string& digest, const nlohmann::json& key, const nlohmann::json& payload) {
    const nlohmann::json entry = {{"schema_version", cache_schema_version}, {"key", key}, {"payload", payload}};
    const auto final_path = dir_ / (digest + std::string(entry_extension));
    const auto temp_path = dir_ / (".tmp-" + digest + "-" + unique_suffix());
    {
        std::ofstream out(temp_path, std::ios::binary | std::ios::trunc);
        out << entry.dump();
        if (!out.flush()) {
            std::error_code ec;
            fs::remove(temp_path, ec);
            throw UsageError(fmt::format("cannot write cache entry in {}", dir_.string()));
        }
    }
    std::error_code ec;
    fs::rename(temp_path, final_path, ec);
    if (ec) {
        fs::remove(temp_path, ec);
        throw UsageError(fmt::format("cannot publish cache entry {}: {}", final_path.string(), ec.message()));
    }
    ++writes_;
}

TokenLogProbs CachedProvider::score_text(std::string_view text) {
    const auto key = make_key("score_text", {{"text", text}});
    const auto digest = sha256_hex(key.dump());
    if (const auto payload = load(digest, key)) {
        try {
            auto scored = token_logprobs_from_json(*payload);
            ++hits_;
            return scored;
        } catch (const nlohmann::json::exception&) {
        }
    }
    ++misses_;
    auto scored = inner_->score_text(text);
    store(digest, key, to_json(scored));
    return scored;
}

std::string CachedProvider::generate(const GenerationRequest& request) {
    if (request.temperature > 0.0) return inner_->generate(request);
    const auto key = make_key("generate", {{"prompt", request.prompt},
                                           {"max_tokens", request.max_tokens},
                                           {"temperature", request.temperature},
                                           {"stop", request.stop}});
    const auto digest = sha256_hex(key.dump());
    if (const auto payload = load(digest, key); payload && payload->is_object() && payload->contains("text")) {
        ++hits_;
        return payload->at("text").get<std::string>();
    }
    ++misses_;
    auto text = inner_->generate(request);
    store(digest, key, {{"text", text}});
    return text;
}

CacheStats CachedProvider::stats() const noexcept { return {hits_.load(), misses_.load(), writes_.load()}; }

std::shared_ptr<CachedProvider> cached(std::shared_ptr<LogprobProvider> provider, const fs::path& dir) {
    return std::make_shared<CachedProvider>(std::move(provider), dir);
}

CacheDirSummary cache_summary(const fs::path& dir) {
    CacheDirSummary summary;
    if (!fs::is_directory(dir)) return summary;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == entry_extension &&
            !entry.path().filename().string().starts_with(".")) {
            ++summary.entries;
            summary.bytes += entry.file_size();
        }
    }
    return summary;
}

std::uint64_t cache_clear(const fs::path& dir) {
    std::uint64_t removed = 0;
    if (!fs::is_directory(dir)) return removed;
    std::vector<fs::path> doomed;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == entry_extension) doomed.push_back(entry.path());
    }
    for (const auto& p : doomed) {
        std::error_code ec;
        if (fs::remove(p, ec)) ++removed;
    }
    return removed;
}

}  // namespace pplqa
