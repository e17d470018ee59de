#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sidq {

/// Error classes map one-to-one onto CLI exit codes: configuration
/// mistakes (bad flag or parameter values) exit 2, malformed or
/// inconsistent input files exit 3, numeric failures during training or
/// assignment exit 4. Anything else is an internal error and exits 1.
enum class ErrorClass { internal = 1, config = 2, format = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string msg) : std::runtime_error(std::move(msg)), cls_(cls) {}
    ErrorClass cls() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

/// Bad parameter values: out-of-range tau, non-monotone layer sizes, ...
class ConfigError : public Error {
public:
    explicit ConfigError(std::string msg) : Error(ErrorClass::config, std::move(msg)) {}
};

/// Malformed files and cross-input inconsistencies (bad magic, truncated
/// payload, embedding/codebook dimension mismatch, unknown item ids).
class FormatError : public Error {
public:
    explicit FormatError(std::string msg) : Error(ErrorClass::format, std::move(msg)) {}
};

/// Non-finite losses, degenerate inputs discovered mid-computation.
class NumericError : public Error {
public:
    explicit NumericError(std::string msg) : Error(ErrorClass::numeric, std::move(msg)) {}
};

/// Builds "<what>: expected dim <expected>, got <got>" and throws it as a
/// FormatError; shared by every place that checks embedding/codebook/query
/// dimension agreement.
[[noreturn]] void throw_dim_mismatch(const char* what, std::size_t expected, std::size_t got);

}  // namespace sidq
