#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace panelbreak {

enum class ErrorKind {
    // usage
    InvalidArgument,
    InvalidSegment,
    ConfigError,
    // data
    DimensionMismatch,
    ParseError,
    MissingValues,
    NonPositiveForLog,
    InvalidSpec,
    InvalidData,
    // numeric / degenerate
    DegenerateProfile,
    WindowOutOfRange,
    InvalidBandwidth,
    GridTooCoarse,
    CovarianceNotPSD,
    EmptySamples,
    MissingQuantiles,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

/// Process exit code for the command-line front end: 1 usage, 2 data, 3 numeric.
[[nodiscard]] int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

}  // namespace panelbreak
