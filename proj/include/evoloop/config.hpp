#pragma once

#include "evoloop/evolution.hpp"
#include "evoloop/prompts.hpp"
#include "evoloop/provider.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace evoloop {

struct ScriptedProviderConfig {
    std::filesystem::path script;
};

struct LiveProviderConfig {
    std::string model = "gpt-4o-mini";
    /// Overrides EVOLOOP_API_BASE when set.
    std::optional<std::string> api_base;
    std::size_t parallelism = 4;
    std::chrono::seconds timeout{120};
    int max_attempts = 3;
};

/// The CLI's config file (JSON):
///   {"task": {...}, "provider": {"scripted": {...}} | {"live": {...}},
///    "evolution": {...}, "bindings": "path", "prompts": "dir"}
/// Relative paths resolve against the config file's directory.
struct RunConfig {
    TaskSpec task;
    EvolutionConfig evolution;
    std::variant<ScriptedProviderConfig, LiveProviderConfig> provider;
    std::optional<std::filesystem::path> bindings;
    std::optional<std::filesystem::path> prompts_dir;
};

/// Throws ConfigError.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Live mode reads EVOLOOP_API_KEY (and EVOLOOP_API_BASE); throws
/// ConfigError when either is missing.
std::unique_ptr<Provider> make_provider(const RunConfig& config);

PromptLibrary make_prompt_library(const RunConfig& config);

} // namespace evoloop
