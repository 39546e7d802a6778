#pragma once

#include <stdexcept>
#include <string>

namespace gamcn {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI's one-line error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Incompatible tensor shapes.
struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

/// Invalid or inconsistent configuration (model, training, CLI).
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

/// Violated precondition of an operation.
struct ContractError : Error {
    explicit ContractError(const std::string& what) : Error("contract", what) {}
};

/// Argument outside the mathematical domain of an operation (e.g. log of 0).
struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error("domain", what) {}
};

/// NaN or Inf produced or encountered.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

/// Malformed input file.
struct LoadError : Error {
    explicit LoadError(const std::string& what) : Error("load", what) {}
};

}  // namespace gamcn
