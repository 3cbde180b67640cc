#pragma once

#include <stdexcept>
#include <string>

namespace ssae {

// Error taxonomy mirrored by the CLI exit codes (see tools/).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied parameter or configuration value.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed file, unsupported format, missing data.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Dimension / shape mismatch between operands.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// NaN or non-finite loss during optimization.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

// API misuse: calling an operation whose preconditions are not met.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Stage-wise training invoked out of order.
class SequencingError : public ContractError {
public:
    explicit SequencingError(const std::string& msg) : ContractError(msg) {}
};

}  // namespace ssae
