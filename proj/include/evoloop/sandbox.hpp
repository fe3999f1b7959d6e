#pragma once

#include "evoloop/report_protocol.hpp"
#include "evoloop/workspace.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace evoloop {

struct SandboxConfig {
    /// Fresh roots are created below this directory.
    std::filesystem::path work_parent = std::filesystem::temp_directory_path();
    std::chrono::milliseconds timeout{30000};
    std::size_t max_output_bytes = 64 * 1024;
    /// argv templates; the token "{file}" matches one safe relative filename
    /// present in the sandbox.
    std::vector<std::vector<std::string>> allowed_commands{{"python3", "{file}"}};
    std::vector<std::string> env_allowlist{"PATH", "HOME", "LANG", "LC_ALL", "TMPDIR"};
    /// Test runner argv prefix; "<suite> --report <path>" is appended.
    std::vector<std::string> runner_command;
    std::vector<std::string> log_capture_globs{"game.log"};
    /// Exported as DISPLAY when set.
    std::optional<std::string> headless_display;
    bool keep_roots = false;
};

struct CommandResult {
    int exit_code = 0;
    /// Terminated by a signal (always true when timed_out).
    bool killed = false;
    bool timed_out = false;
    std::string stdout_text;
    bool stdout_truncated = false;
    std::string stderr_text;
    bool stderr_truncated = false;
    std::chrono::milliseconds duration{0};
};

/// Owns one sandbox root. The root is removed on destruction unless the
/// config keeps it. Commands on one handle are serialized.
class SandboxHandle {
public:
    SandboxHandle(std::filesystem::path root, SandboxConfig config);
    ~SandboxHandle();
    SandboxHandle(SandboxHandle&&) noexcept;
    SandboxHandle& operator=(SandboxHandle&&) noexcept;
    SandboxHandle(const SandboxHandle&) = delete;
    SandboxHandle& operator=(const SandboxHandle&) = delete;

    const std::filesystem::path& root() const { return root_; }
    /// Materialized files; the working directory of every command.
    std::filesystem::path work_dir() const { return root_ / "work"; }
    std::filesystem::path reports_dir() const { return root_ / "reports"; }
    const SandboxConfig& config() const { return config_; }
    std::mutex& command_mutex() const { return *mutex_; }

private:
    std::filesystem::path root_;
    SandboxConfig config_;
    std::unique_ptr<std::mutex> mutex_;
};

/// Writes both workspaces under a fresh root. Shared filenames raise
/// FilenameCollision unless `allow_override` (tests then win).
SandboxHandle materialize(const Workspace& code, const Workspace& tests, const SandboxConfig& config,
                          bool allow_override = false);

/// Runs an allowlisted command with the configured timeout and output caps.
/// Throws CommandRejected or SpawnError.
CommandResult run_program(const SandboxHandle& handle, const std::vector<std::string>& argv);

/// Runs every suite through the runner protocol. A suite whose runner leaves
/// no report becomes one synthetic error case.
std::vector<TestReport> run_tests(const SandboxHandle& handle, const std::vector<std::string>& suites);

struct CapturedLog {
    std::string name;
    std::string content;

    friend bool operator==(const CapturedLog&, const CapturedLog&) = default;
};

/// Top-level sandbox files matching the configured globs, sorted by name.
std::vector<CapturedLog> capture_logs(const SandboxHandle& handle);

} // namespace evoloop
