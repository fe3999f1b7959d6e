#include "json_io.hpp"

#include "evoloop/error.hpp"

#include <algorithm>

namespace evoloop::json_io {

namespace {

template <typename T>
void read(const json& j, std::string_view key, T& out) {
    auto it = j.find(std::string(key));
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_error, "bad value for \"" + std::string(key) + "\": " + e.what());
    }
}

void require_object(const json& j, std::string_view where) {
    if (!j.is_object()) throw Error(ErrorCode::config_error, std::string(where) + " must be an object");
}

json sandbox_to_json(const SandboxConfig& s) {
    json j;
    j["timeout_ms"] = s.timeout.count();
    j["max_output_bytes"] = s.max_output_bytes;
    j["allowed_commands"] = s.allowed_commands;
    j["env_allowlist"] = s.env_allowlist;
    j["runner_command"] = s.runner_command;
    j["log_capture_globs"] = s.log_capture_globs;
    j["headless_display"] = s.headless_display ? json(*s.headless_display) : json(nullptr);
    return j;
}

SandboxConfig sandbox_from_json(const json& j) {
    require_object(j, "sandbox");
    require_known_keys(j, "sandbox",
                       {"timeout_ms", "max_output_bytes", "allowed_commands", "env_allowlist", "runner_command",
                        "log_capture_globs", "headless_display", "work_parent", "keep_roots"});
    SandboxConfig s;
    long long timeout = s.timeout.count();
    read(j, "timeout_ms", timeout);
    s.timeout = std::chrono::milliseconds(timeout);
    read(j, "max_output_bytes", s.max_output_bytes);
    read(j, "allowed_commands", s.allowed_commands);
    read(j, "env_allowlist", s.env_allowlist);
    read(j, "runner_command", s.runner_command);
    read(j, "log_capture_globs", s.log_capture_globs);
    if (auto it = j.find("headless_display"); it != j.end() && !it->is_null()) s.headless_display = it->get<std::string>();
    if (auto it = j.find("work_parent"); it != j.end()) s.work_parent = it->get<std::string>();
    read(j, "keep_roots", s.keep_roots);
    return s;
}

json agents_to_json(const AgentSettings& a) {
    json j;
    j["max_repair_retries"] = a.max_repair_retries;
    j["max_network_nodes"] = a.max_network_nodes;
    j["predecessor_budget"] = a.predecessor_budget;
    j["listing_budget"] = a.listing_budget;
    j["test_prefix"] = a.test_prefix;
    j["coding_role"] = a.coding_role;
    j["updating_role"] = a.updating_role;
    j["additional_note"] = a.additional_note;
    j["ideas"] = a.ideas;
    j["model_name"] = a.model_name;
    j["temperature"] = a.temperature;
    j["max_output_tokens"] = a.max_output_tokens;
    return j;
}

AgentSettings agents_from_json(const json& j) {
    require_object(j, "agents");
    require_known_keys(j, "agents",
                       {"max_repair_retries", "max_network_nodes", "predecessor_budget", "listing_budget",
                        "test_prefix", "coding_role", "updating_role", "additional_note", "ideas", "model_name",
                        "temperature", "max_output_tokens"});
    AgentSettings a;
    read(j, "max_repair_retries", a.max_repair_retries);
    read(j, "max_network_nodes", a.max_network_nodes);
    read(j, "predecessor_budget", a.predecessor_budget);
    read(j, "listing_budget", a.listing_budget);
    read(j, "test_prefix", a.test_prefix);
    read(j, "coding_role", a.coding_role);
    read(j, "updating_role", a.updating_role);
    read(j, "additional_note", a.additional_note);
    read(j, "ideas", a.ideas);
    read(j, "model_name", a.model_name);
    read(j, "temperature", a.temperature);
    read(j, "max_output_tokens", a.max_output_tokens);
    return a;
}

} // namespace

void require_known_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw Error(ErrorCode::config_error, "unknown key \"" + key + "\" in " + std::string(where));
}

json task_to_json(const TaskSpec& task) {
    return json{{"name", task.name},
                {"description", task.description},
                {"modality", task.modality},
                {"language", task.language},
                {"requirements", task.requirements}};
}

TaskSpec task_from_json(const json& j) {
    require_object(j, "task");
    require_known_keys(j, "task", {"name", "description", "modality", "language", "requirements"});
    TaskSpec t;
    read(j, "name", t.name);
    read(j, "description", t.description);
    read(j, "modality", t.modality);
    read(j, "language", t.language);
    read(j, "requirements", t.requirements);
    return t;
}

json config_to_json(const EvolutionConfig& c) {
    json j;
    j["max_iterations"] = c.max_iterations;
    j["confirm_with_gradient"] = c.confirm_with_gradient;
    j["wrong_test_policy"] = std::string(to_string(c.wrong_test_policy));
    j["entry_command"] = c.entry_command;
    j["loss_budget"] = c.loss_budget;
    j["agents"] = agents_to_json(c.agents);
    auto sandbox = sandbox_to_json(c.sandbox);
    j["sandbox"] = sandbox;
    return j;
}

EvolutionConfig config_from_json(const json& j) {
    require_object(j, "evolution");
    require_known_keys(j, "evolution",
                       {"max_iterations", "confirm_with_gradient", "wrong_test_policy", "entry_command",
                        "loss_budget", "agents", "sandbox"});
    EvolutionConfig c;
    read(j, "max_iterations", c.max_iterations);
    read(j, "confirm_with_gradient", c.confirm_with_gradient);
    if (auto it = j.find("wrong_test_policy"); it != j.end()) {
        if (!it->is_string()) throw Error(ErrorCode::config_error, "wrong_test_policy must be a string");
        c.wrong_test_policy = parse_wrong_test_policy(it->get<std::string>());
    }
    read(j, "entry_command", c.entry_command);
    read(j, "loss_budget", c.loss_budget);
    if (auto it = j.find("agents"); it != j.end()) c.agents = agents_from_json(*it);
    if (auto it = j.find("sandbox"); it != j.end()) c.sandbox = sandbox_from_json(*it);
    return c;
}

json command_result_to_json(const CommandResult& r) {
    return json{{"exit_code", r.exit_code},
                {"killed", r.killed},
                {"timed_out", r.timed_out},
                {"stdout", r.stdout_text},
                {"stdout_truncated", r.stdout_truncated},
                {"stderr", r.stderr_text},
                {"stderr_truncated", r.stderr_truncated}};
}

CommandResult command_result_from_json(const json& j) {
    CommandResult r;
    r.exit_code = j.at("exit_code").get<int>();
    r.killed = j.at("killed").get<bool>();
    r.timed_out = j.at("timed_out").get<bool>();
    r.stdout_text = j.at("stdout").get<std::string>();
    r.stdout_truncated = j.at("stdout_truncated").get<bool>();
    r.stderr_text = j.at("stderr").get<std::string>();
    r.stderr_truncated = j.at("stderr_truncated").get<bool>();
    return r;
}

json reports_to_json(const std::vector<TestReport>& reports) {
    json arr = json::array();
    for (const auto& r : reports) {
        json cases = json::array();
        for (const auto& c : r.cases)
            cases.push_back(json{{"id", c.test_id}, {"status", std::string(to_string(c.status))}, {"message", c.message}});
        arr.push_back(json{{"suite", r.suite}, {"cases", cases}});
    }
    return arr;
}

std::vector<TestReport> reports_from_json(const json& j) {
    std::vector<TestReport> out;
    for (const auto& r : j) {
        TestReport report{r.at("suite").get<std::string>(), {}};
        for (const auto& c : r.at("cases"))
            report.cases.push_back(TestCase{c.at("id").get<std::string>(),
                                            parse_status(c.at("status").get<std::string>()),
                                            c.at("message").get<std::string>()});
        out.push_back(std::move(report));
    }
    return out;
}

json logs_to_json(const std::vector<CapturedLog>& logs) {
    json arr = json::array();
    for (const auto& l : logs) arr.push_back(json{{"name", l.name}, {"content", l.content}});
    return arr;
}

std::vector<CapturedLog> logs_from_json(const json& j) {
    std::vector<CapturedLog> out;
    for (const auto& l : j) out.push_back(CapturedLog{l.at("name").get<std::string>(), l.at("content").get<std::string>()});
    return out;
}

json provider_state_to_json(const ProviderState& s) {
    json occ = json::object();
    for (const auto& [d, n] : s.occurrences) occ[d] = n;
    return json{{"calls", s.calls}, {"occurrences", occ}};
}

ProviderState provider_state_from_json(const json& j) {
    ProviderState s;
    s.calls = j.at("calls").get<std::uint64_t>();
    for (const auto& [d, n] : j.at("occurrences").items()) s.occurrences[d] = n.get<std::uint64_t>();
    return s;
}

std::string valid_utf8(const std::string& s) {
    auto encoded = json(s).dump(-1, ' ', false, json::error_handler_t::replace);
    return json::parse(encoded).get<std::string>();
}

std::string dump(const json& j) {
    // Invalid UTF-8 from program output is replaced rather than rejected.
    return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

json parse(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_error, "cannot parse " + std::string(what) + ": " + e.what());
    }
}

} // namespace evoloop::json_io
