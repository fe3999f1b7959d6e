#pragma once

// Bounded child-process execution. Internal to the library.

#include "evoloop/sandbox.hpp"

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace evoloop::detail {

struct ProcessSpec {
    std::vector<std::string> argv;
    std::filesystem::path cwd;
    std::vector<std::string> env; // "KEY=VALUE"
    std::chrono::milliseconds timeout{30000};
    std::size_t max_output_bytes = 64 * 1024;
};

/// Runs the child in its own process group; on timeout the whole group is
/// killed. Throws SpawnError when the program cannot be started.
CommandResult run_process(const ProcessSpec& spec);

} // namespace evoloop::detail
