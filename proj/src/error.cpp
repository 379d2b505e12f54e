#include "pplqa/error.hpp"

namespace pplqa {

void rethrow_with_context(const Error& e, std::string_view context) {
    std::string what = std::string(context) + ": " + e.what();
    switch (e.kind()) {
        case ErrorKind::usage: throw UsageError(what);
        case ErrorKind::data: throw DataError(what);
        case ErrorKind::protocol: {
            const auto* protocol = dynamic_cast<const ProtocolError*>(&e);
            throw ProtocolError(what, protocol ? protocol->payload() : std::string{});
        }
        case ErrorKind::transport: throw TransportError(what);
        case ErrorKind::error_rate: throw ErrorRateExceeded(what);
    }
    throw Error(e.kind(), what);
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage: return 1;
        case ErrorKind::data: return 2;
        case ErrorKind::protocol:
        case ErrorKind::transport:
        case ErrorKind::error_rate: return 3;
    }
    return 1;
}

}  // namespace pplqa
