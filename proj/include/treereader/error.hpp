#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace treereader {

enum class ErrorCode {
    EmptyDocument,
    UnsupportedMarkup,
    EmptyTree,
    UnknownNode,
    NotASection,
    InvalidTree,
    MissingSlot,
    MalformedResponse,
    MissingField,
    MissingChildSummary,
    BackendUnavailable,
    UnknownBackend,
    IoError,
    InvalidDocument,
    SchemaVersionMismatch,
    CorruptDocument,
    ConfigError,
    UnknownDocument,
    NotReady,
    PointIndexOutOfRange,
    PayloadTooLarge,
    NoSummary,
    BadRequest,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::UnsupportedMarkup: return "UnsupportedMarkup";
    case ErrorCode::EmptyTree: return "EmptyTree";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::NotASection: return "NotASection";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::MissingSlot: return "MissingSlot";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MissingChildSummary: return "MissingChildSummary";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::UnknownBackend: return "UnknownBackend";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidDocument: return "InvalidDocument";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::CorruptDocument: return "CorruptDocument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnknownDocument: return "UnknownDocument";
    case ErrorCode::NotReady: return "NotReady";
    case ErrorCode::PointIndexOutOfRange: return "PointIndexOutOfRange";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::NoSummary: return "NoSummary";
    case ErrorCode::BadRequest: return "BadRequest";
    }
    return "Unknown";
}

/// Every failure the library reports carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] std::string_view name() const noexcept { return to_string(code_); }

private:
    ErrorCode code_;
};

} // namespace treereader
