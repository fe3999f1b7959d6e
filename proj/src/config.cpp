#include "evoloop/config.hpp"

#include "evoloop/error.hpp"
#include "json_io.hpp"

#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace evoloop {

using json_io::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

LiveProviderConfig live_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::config_error, "provider.live must be an object");
    json_io::require_known_keys(j, "provider.live", {"model", "api_base", "parallelism", "timeout_s", "max_attempts"});
    LiveProviderConfig c;
    try {
        c.model = j.value("model", c.model);
        if (j.contains("api_base")) c.api_base = j.at("api_base").get<std::string>();
        c.parallelism = j.value("parallelism", c.parallelism);
        c.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<long long>(c.timeout.count())));
        c.max_attempts = j.value("max_attempts", c.max_attempts);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_error, std::string("bad provider.live: ") + e.what());
    }
    if (c.parallelism == 0 || c.max_attempts < 1 || c.timeout.count() <= 0)
        throw Error(ErrorCode::config_error, "provider.live values must be positive");
    return c;
}

} // namespace

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
    auto j = json_io::parse(text, "config");
    if (!j.is_object()) throw Error(ErrorCode::config_error, "config must be a JSON object");
    json_io::require_known_keys(j, "config", {"task", "provider", "evolution", "bindings", "prompts"});
    if (!j.contains("task")) throw Error(ErrorCode::config_error, "config has no task");
    if (!j.contains("provider")) throw Error(ErrorCode::config_error, "config has no provider");

    RunConfig c;
    c.task = json_io::task_from_json(j.at("task"));
    validate(c.task);
    if (j.contains("evolution")) c.evolution = json_io::config_from_json(j.at("evolution"));
    validate(c.evolution);

    const auto& p = j.at("provider");
    if (!p.is_object()) throw Error(ErrorCode::config_error, "provider must be an object");
    json_io::require_known_keys(p, "provider", {"live", "scripted"});
    const bool live = p.contains("live");
    const bool scripted = p.contains("scripted");
    if (live == scripted) throw Error(ErrorCode::config_error, "exactly one of provider.live and provider.scripted is required");
    if (scripted) {
        const auto& s = p.at("scripted");
        if (!s.is_object() || !s.contains("script") || !s.at("script").is_string())
            throw Error(ErrorCode::config_error, "provider.scripted needs a \"script\" path");
        json_io::require_known_keys(s, "provider.scripted", {"script"});
        c.provider = ScriptedProviderConfig{resolve(base_dir, s.at("script").get<std::string>())};
    } else {
        c.provider = live_from_json(p.at("live"));
    }

    try {
        if (j.contains("bindings")) c.bindings = resolve(base_dir, j.at("bindings").get<std::string>());
        if (j.contains("prompts")) c.prompts_dir = resolve(base_dir, j.at("prompts").get<std::string>());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_error, std::string("bad path: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::config_error, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

std::unique_ptr<Provider> make_provider(const RunConfig& config) {
    if (const auto* s = std::get_if<ScriptedProviderConfig>(&config.provider))
        return std::make_unique<ScriptedProvider>(load_script(s->script));
    const auto& l = std::get<LiveProviderConfig>(config.provider);
    auto live = LiveConfig::from_environment();
    if (l.api_base) live.api_base = *l.api_base;
    if (live.api_base.empty()) throw Error(ErrorCode::config_error, "EVOLOOP_API_BASE is not set");
    if (live.api_key.empty()) throw Error(ErrorCode::config_error, "EVOLOOP_API_KEY is not set");
    live.model = l.model;
    live.parallelism = l.parallelism;
    live.timeout = l.timeout;
    live.retry.max_attempts = l.max_attempts;
    return std::make_unique<LiveProvider>(std::move(live));
}

PromptLibrary make_prompt_library(const RunConfig& config) {
    return config.prompts_dir ? PromptLibrary::from_directory(*config.prompts_dir) : PromptLibrary::builtin();
}

} // namespace evoloop
