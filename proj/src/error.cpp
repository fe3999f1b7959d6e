#include "evoloop/error.hpp"

namespace evoloop {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::missing_section: return "MissingSection";
    case ErrorCode::duplicate_label: return "DuplicateLabel";
    case ErrorCode::unknown_dependency: return "UnknownDependency";
    case ErrorCode::malformed_line: return "MalformedLine";
    case ErrorCode::network_too_large: return "NetworkTooLarge";
    case ErrorCode::cycle_detected: return "CycleDetected";
    case ErrorCode::empty_network: return "EmptyNetwork";
    case ErrorCode::missing_placeholder: return "MissingPlaceholder";
    case ErrorCode::unknown_template: return "UnknownTemplate";
    case ErrorCode::no_patches_found: return "NoPatchesFound";
    case ErrorCode::unparsable_gradient: return "UnparsableGradient";
    case ErrorCode::unsafe_filename: return "UnsafeFilename";
    case ErrorCode::auth_error: return "AuthError";
    case ErrorCode::rate_limited: return "RateLimited";
    case ErrorCode::transport_error: return "TransportError";
    case ErrorCode::script_miss: return "ScriptMiss";
    case ErrorCode::script_format: return "ScriptFormat";
    case ErrorCode::organization_failed: return "OrganizationFailed";
    case ErrorCode::agent_failed: return "AgentFailed";
    case ErrorCode::gradient_failed: return "GradientFailed";
    case ErrorCode::update_failed: return "UpdateFailed";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::filename_collision: return "FilenameCollision";
    case ErrorCode::command_rejected: return "CommandRejected";
    case ErrorCode::spawn_error: return "SpawnError";
    case ErrorCode::runner_protocol_error: return "RunnerProtocolError";
    case ErrorCode::run_failed: return "RunFailed";
    case ErrorCode::corrupt_snapshot: return "CorruptSnapshot";
    case ErrorCode::missing_iteration: return "MissingIteration";
    case ErrorCode::digest_mismatch: return "DigestMismatch";
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::unknown_test_id: return "UnknownTestId";
    }
    return "Unknown";
}

bool is_retryable(ErrorCode code) {
    switch (code) {
    // Malformed model output: re-asking with the parse error usually fixes it.
    case ErrorCode::missing_section:
    case ErrorCode::duplicate_label:
    case ErrorCode::unknown_dependency:
    case ErrorCode::malformed_line:
    case ErrorCode::network_too_large:
    case ErrorCode::cycle_detected:
    case ErrorCode::empty_network:
    case ErrorCode::no_patches_found:
    case ErrorCode::unparsable_gradient:
    // Transient transport conditions.
    case ErrorCode::rate_limited:
    case ErrorCode::transport_error:
        return true;
    default:
        return false;
    }
}

} // namespace evoloop
