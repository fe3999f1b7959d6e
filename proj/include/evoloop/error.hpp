#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evoloop {

enum class ErrorCode {
    // grammar / graph
    missing_section,
    duplicate_label,
    unknown_dependency,
    malformed_line,
    network_too_large,
    cycle_detected,
    empty_network,
    // agent runtime
    missing_placeholder,
    unknown_template,
    no_patches_found,
    unparsable_gradient,
    unsafe_filename,
    // provider
    auth_error,
    rate_limited,
    transport_error,
    script_miss,
    script_format,
    // forward / backprop
    organization_failed,
    agent_failed,
    gradient_failed,
    update_failed,
    // environment
    io_error,
    filename_collision,
    command_rejected,
    spawn_error,
    runner_protocol_error,
    // evolution / cli
    run_failed,
    corrupt_snapshot,
    missing_iteration,
    digest_mismatch,
    config_error,
    // metrics
    unknown_test_id,
};

std::string_view to_string(ErrorCode code);

/// Whether a caller may re-issue the request that produced this error.
bool is_retryable(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    bool retryable() const noexcept { return is_retryable(code_); }

private:
    ErrorCode code_;
};

} // namespace evoloop
