// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gsdiff {

/// Broad failure class. The CLI maps each category onto a distinct exit code.
enum class ErrorCategory {
    validation,
    configuration,
    parse,
    version,
    io,
    contract,
    divergence,
};

inline const char* to_string(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::configuration: return "configuration";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::version: return "version";
    case ErrorCategory::io: return "io";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::divergence: return "divergence";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error(ErrorCategory::validation, w) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorCategory::configuration, w) {}
};

struct ParseError : Error {
    ParseError(const std::string& w, std::size_t offset)
        : Error(ErrorCategory::parse, w + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

struct VersionError : Error {
    VersionError(unsigned found, unsigned supported)
        : Error(ErrorCategory::version, "unsupported container version " + std::to_string(found) +
                                            " (this build reads up to " + std::to_string(supported) + ")"),
          found_(found) {}

    unsigned found() const noexcept { return found_; }

private:
    unsigned found_;
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorCategory::io, w) {}
};

struct ContractViolation : Error {
    explicit ContractViolation(const std::string& w) : Error(ErrorCategory::contract, w) {}
};

struct DivergenceError : Error {
    explicit DivergenceError(const std::string& w) : Error(ErrorCategory::divergence, w) {}
};

} // namespace gsdiff
