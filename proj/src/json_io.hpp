#pragma once

// JSON forms shared by the run manifest and the CLI config file.

#include "evoloop/evolution.hpp"
#include "evoloop/feedback.hpp"
#include "evoloop/prompts.hpp"
#include "evoloop/provider.hpp"

#include <json.hpp>
#include <initializer_list>
#include <string_view>

namespace evoloop::json_io {

using nlohmann::json;

/// Throws ConfigError naming the first key of `j` outside `allowed`.
void require_known_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed);

json task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const json& j);

/// Sandbox roots (work_parent, keep_roots) are runtime choices and are
/// left out.
json config_to_json(const EvolutionConfig& config);
/// Missing keys keep their defaults.
EvolutionConfig config_from_json(const json& j);

json command_result_to_json(const CommandResult& r);
CommandResult command_result_from_json(const json& j);

json reports_to_json(const std::vector<TestReport>& reports);
std::vector<TestReport> reports_from_json(const json& j);

json logs_to_json(const std::vector<CapturedLog>& logs);
std::vector<CapturedLog> logs_from_json(const json& j);

json provider_state_to_json(const ProviderState& s);
ProviderState provider_state_from_json(const json& j);

/// `s` with invalid UTF-8 sequences replaced by U+FFFD.
std::string valid_utf8(const std::string& s);

/// Stable text: two-space indent, sorted keys, trailing newline.
std::string dump(const json& j);
/// Throws ConfigError with `what` as context.
json parse(std::string_view text, std::string_view what);

} // namespace evoloop::json_io
