#pragma once

#include <stdexcept>
#include <string>

namespace harmony {

/// Failure category. The CLI maps each one to its own exit code.
enum class ErrorKind { Config, Data, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Bad configuration, schema, or argument contract.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Input data that violates a dataset or model invariant.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Solver failures: non-convergence, singular systems, non-finite results.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

const char* to_string(ErrorKind kind) noexcept;

/// Rethrows `e` with `prefix` prepended to the message, preserving its kind.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& prefix);

} // namespace harmony
