#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pplqa {

inline constexpr int result_store_schema_version = 1;

struct StoredRecord {
    std::string kind;
    std::string run_id;
    std::string timestamp;
    int schema_version = result_store_schema_version;
    nlohmann::json payload;
    std::size_t line = 0;  // 1-based position in the file
};

struct ScanResult {
    std::vector<StoredRecord> records;
    std::vector<std::string> warnings;  // one per corrupt line, with its line number
};

/// Append-only JSON Lines log of run outputs. Every line is
/// {"kind", "run_id", "timestamp", "schema_version", "payload"}. Appends
/// are single write(2) calls under an exclusive file lock, so concurrent
/// writers (threads or processes) never interleave within a line.
class ResultStore {
public:
    /// Throws UsageError if the file cannot be opened for appending.
    ResultStore(std::filesystem::path path, std::string run_id);

    void append(std::string_view kind, const nlohmann::json& payload);

    using Filter = std::function<bool(const StoredRecord&)>;
    /// Records of `kind` (all kinds when empty) in file order.
    ScanResult scan(std::string_view kind = {}, const Filter& filter = {}) const;

    const std::filesystem::path& path() const noexcept { return path_; }
    const std::string& run_id() const noexcept { return run_id_; }

private:
    std::filesystem::path path_;
    std::string run_id_;
    std::mutex mutex_;
};

ScanResult scan_store(const std::filesystem::path& path, std::string_view kind = {},
                      const ResultStore::Filter& filter = {});

}  // namespace pplqa
