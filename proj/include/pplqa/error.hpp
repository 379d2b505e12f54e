#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pplqa {

enum class ErrorKind {
    usage,       // bad flags, config, or precondition violations
    data,        // malformed or out-of-contract input data
    protocol,    // a provider answered, but not in the expected shape
    transport,   // a provider could not be reached (retryable)
    error_rate,  // too many per-item failures in a batch run
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Carries a bounded excerpt of the offending payload so failures can be
/// traced back to the raw response.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::string payload)
        : Error(ErrorKind::protocol, what), payload_(std::move(payload)) {}
    const std::string& payload() const noexcept { return payload_; }

private:
    std::string payload_;
};

class TransportError : public Error {
public:
    explicit TransportError(const std::string& what) : Error(ErrorKind::transport, what) {}
};

class ErrorRateExceeded : public Error {
public:
    explicit ErrorRateExceeded(const std::string& what) : Error(ErrorKind::error_rate, what) {}
};

/// Rethrows `e` as the same error kind with `context` prepended to the message.
[[noreturn]] void rethrow_with_context(const Error& e, std::string_view context);

/// Process exit code for an error kind: 1 usage, 2 data, 3 provider.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace pplqa
