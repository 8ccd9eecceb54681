#include "panelbreak/error.hpp"

namespace panelbreak {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::InvalidSegment: return "InvalidSegment";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::MissingValues: return "MissingValues";
        case ErrorKind::NonPositiveForLog: return "NonPositiveForLog";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::InvalidData: return "InvalidData";
        case ErrorKind::DegenerateProfile: return "DegenerateProfile";
        case ErrorKind::WindowOutOfRange: return "WindowOutOfRange";
        case ErrorKind::InvalidBandwidth: return "InvalidBandwidth";
        case ErrorKind::GridTooCoarse: return "GridTooCoarse";
        case ErrorKind::CovarianceNotPSD: return "CovarianceNotPSD";
        case ErrorKind::EmptySamples: return "EmptySamples";
        case ErrorKind::MissingQuantiles: return "MissingQuantiles";
    }
    return "Unknown";
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::InvalidSegment:
        case ErrorKind::ConfigError:
            return 1;
        case ErrorKind::DimensionMismatch:
        case ErrorKind::ParseError:
        case ErrorKind::MissingValues:
        case ErrorKind::NonPositiveForLog:
        case ErrorKind::InvalidSpec:
        case ErrorKind::InvalidData:
            return 2;
        default:
            return 3;
    }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

}  // namespace panelbreak
