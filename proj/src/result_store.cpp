#include "pplqa/result_store.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <utility>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "pplqa/error.hpp"
#include "pplqa/text.hpp"

namespace pplqa {
namespace {

class FileDescriptor {
public:
    explicit FileDescriptor(int fd) : fd_(fd) {}
    FileDescriptor(FileDescriptor&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    FileDescriptor(const FileDescriptor&) = delete;
    FileDescriptor& operator=(const FileDescriptor&) = delete;
    ~FileDescriptor() {
        if (fd_ >= 0) ::close(fd_);
    }
    int get() const noexcept { return fd_; }

private:
    int fd_;
};

FileDescriptor open_for_append(const std::filesystem::path& path) {
    FileDescriptor fd(::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644));
    if (fd.get() < 0) {
        throw UsageError(fmt::format("cannot open result store {}: {}", path.string(), std::strerror(errno)));
    }
    return fd;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto millis = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), millis);
}

}  // namespace

ResultStore::ResultStore(std::filesystem::path path, std::string run_id)
    : path_(std::move(path)), run_id_(std::move(run_id)) {
    if (path_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
    }
    open_for_append(path_);
}

void ResultStore::append(std::string_view kind, const nlohmann::json& payload) {
    const nlohmann::json line = {{"kind", kind},
                                         {"run_id", run_id_},
                                         {"timestamp", utc_timestamp()},
                                         {"schema_version", result_store_schema_version},
                                         {"payload", payload}};
    const auto text = line.dump() + "\n";

    std::lock_guard lock(mutex_);
    const auto fd = open_for_append(path_);
    if (::flock(fd.get(), LOCK_EX) != 0) {
        throw UsageError(fmt::format("cannot lock result store {}: {}", path_.string(), std::strerror(errno)));
    }
    std::size_t written = 0;
    while (written < text.size()) {
        const auto n = ::write(fd.get(), text.data() + written, text.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const auto err = errno;
            ::flock(fd.get(), LOCK_UN);
            throw UsageError(fmt::format("cannot append to result store {}: {}", path_.string(), std::strerror(err)));
        }
        written += static_cast<std::size_t>(n);
    }
    ::flock(fd.get(), LOCK_UN);
}

ScanResult ResultStore::scan(std::string_view kind, const Filter& filter) const {
    return scan_store(path_, kind, filter);
}

ScanResult scan_store(const std::filesystem::path& path, std::string_view kind, const ResultStore::Filter& filter) {
    ScanResult result;
    std::ifstream in(path);
    if (!in) return result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        StoredRecord record;
        try {
            const auto j = nlohmann::json::parse(line);
            record.kind = j.at("kind").get<std::string>();
            record.run_id = j.at("run_id").get<std::string>();
            record.timestamp = j.at("timestamp").get<std::string>();
            record.schema_version = j.value("schema_version", result_store_schema_version);
            record.payload = j.at("payload");
            record.line = line_no;
        } catch (const nlohmann::json::exception& e) {
            result.warnings.push_back(fmt::format("{}:{}: corrupt record skipped ({})", path.string(), line_no, e.what()));
            continue;
        }
        if (!kind.empty() && record.kind != kind) continue;
        if (filter && !filter(record)) continue;
        result.records.push_back(std::move(record));
    }
    return result;
}

}  // namespace pplqa
