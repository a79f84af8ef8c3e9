#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dynscale {

enum class ErrorCode {
    invalid_config,
    schema_invalid,
    insufficient_budget,
    backend_unavailable,
    prompt_too_long,
    invalid_state,
    missing_gold,
    replay_divergence,
    precondition_failed,
    io_error,
};

std::string_view to_string(ErrorCode code);

/// Exception type for every recoverable failure surfaced by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dynscale
