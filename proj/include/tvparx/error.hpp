#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tvparx {

enum class ErrorKind {
    NonFiniteParameter,
    DimensionMismatch,
    DomainError,
    OverflowGuard,
    InvalidArgument,
    ParseError,
    NegativeCount,
    NonFiniteCovariate,
};

inline constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::NonFiniteParameter: return "NonFiniteParameter";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::OverflowGuard: return "OverflowGuard";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NegativeCount: return "NegativeCount";
    case ErrorKind::NonFiniteCovariate: return "NonFiniteCovariate";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace tvparx
