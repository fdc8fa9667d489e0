#include "harmony/error.hpp"

namespace harmony {

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numerical: return "numerical";
    }
    return "unknown";
}

void rethrow_with_context(const Error& e, const std::string& prefix)
{
    const std::string msg = prefix + ": " + e.what();
    switch (e.kind()) {
    case ErrorKind::Config: throw ConfigError(msg);
    case ErrorKind::Data: throw DataError(msg);
    case ErrorKind::Numerical: throw NumericalError(msg);
    }
    throw Error(e.kind(), msg);
}

} // namespace harmony
