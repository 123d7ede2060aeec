#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eauwseg {

enum class ErrorCode {
    ErosionEmpty,
    MultiComponent,
    Degenerate,
    NoForeground,
    InvalidParams,
    MissingFile,
    ShapeMismatch,
    InvalidConfig,
    ConfigMismatch,
    NonFiniteLoss,
    EmptyPools,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::ErosionEmpty: return "ErosionEmpty";
    case ErrorCode::MultiComponent: return "MultiComponent";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::NoForeground: return "NoForeground";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyPools: return "EmptyPools";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Error raised by every module operation. `where` names the failing
/// operation so the CLI can report it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string where, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + " in " + where + ": " + message),
          code_(code), where_(std::move(where)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& where() const noexcept { return where_; }

private:
    ErrorCode code_;
    std::string where_;
};

} // namespace eauwseg
