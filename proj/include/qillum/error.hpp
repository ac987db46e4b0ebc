#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qillum {

// Machine-readable failure categories. The numeric values are stable and are
// surfaced by the CLI and the Python bindings.
enum class ErrorCode : int {
    config = 10,
    domain = 11,
    truncation = 12,
    io = 13,
    numerical = 14,
    contract = 15,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::config: return "config";
        case ErrorCode::domain: return "domain";
        case ErrorCode::truncation: return "truncation";
        case ErrorCode::io: return "io";
        case ErrorCode::numerical: return "numerical";
        case ErrorCode::contract: return "contract";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view category() const noexcept { return to_string(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace qillum
