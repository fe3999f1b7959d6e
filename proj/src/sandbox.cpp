#include "evoloop/sandbox.hpp"

#include "evoloop/error.hpp"
#include "evoloop/parsers.hpp"
#include "evoloop/text.hpp"
#include "process.hpp"

#include <algorithm>
#include <cstdlib>
#include <fnmatch.h>
#include <fstream>
#include <sstream>
#include <system_error>

namespace fs = std::filesystem;

namespace evoloop {

namespace {

constexpr std::string_view kFileToken = "{file}";

fs::path make_fresh_root(const fs::path& parent) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    std::string pattern = (parent / "evoloop-sbx-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr)
        throw Error(ErrorCode::io_error, "cannot create sandbox root under " + parent.string());
    return fs::path(pattern);
}

void write_file(const fs::path& path, std::string_view content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_present_file(const SandboxHandle& handle, const std::string& name) {
    if (!is_safe_filename(name)) return false;
    std::error_code ec;
    auto st = fs::symlink_status(handle.work_dir() / name, ec);
    return !ec && fs::is_regular_file(st);
}

bool matches_template(const SandboxHandle& handle, const std::vector<std::string>& tmpl,
                      const std::vector<std::string>& argv) {
    if (tmpl.size() != argv.size()) return false;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] == kFileToken) {
            if (!is_present_file(handle, argv[i])) return false;
        } else if (tmpl[i] != argv[i]) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> child_environment(const SandboxConfig& config) {
    std::vector<std::string> env;
    for (const auto& key : config.env_allowlist) {
        if (key == "DISPLAY" && config.headless_display) continue;
        if (const char* value = std::getenv(key.c_str())) env.push_back(key + "=" + value);
    }
    if (config.headless_display) env.push_back("DISPLAY=" + *config.headless_display);
    env.push_back("PYTHONHASHSEED=0");
    env.push_back("PYTHONDONTWRITEBYTECODE=1");
    return env;
}

/// Outputs must not leak the (random) sandbox location.
void sanitize(const SandboxHandle& handle, CommandResult& result) {
    for (auto* s : {&result.stdout_text, &result.stderr_text}) {
        text::replace_all(*s, handle.work_dir().string(), ".");
        text::replace_all(*s, handle.root().string(), ".");
    }
}

CommandResult execute(const SandboxHandle& handle, const std::vector<std::string>& argv,
                      std::chrono::milliseconds timeout) {
    detail::ProcessSpec spec;
    spec.argv = argv;
    spec.cwd = handle.work_dir();
    spec.env = child_environment(handle.config());
    spec.timeout = timeout;
    spec.max_output_bytes = handle.config().max_output_bytes;
    auto result = detail::run_process(spec);
    sanitize(handle, result);
    return result;
}

std::string describe_start_failure(const CommandResult& r) {
    std::string msg = "suite did not produce a report";
    if (r.timed_out)
        msg += " (timed out)";
    else
        msg += " (exit code " + std::to_string(r.exit_code) + ")";
    auto tail = text::tail_bytes(r.stderr_text, 4096);
    auto err = text::trim(tail);
    if (!err.empty()) msg += "\n" + std::string(err);
    return msg;
}

} // namespace

SandboxHandle::SandboxHandle(fs::path root, SandboxConfig config)
    : root_(std::move(root)), config_(std::move(config)), mutex_(std::make_unique<std::mutex>()) {}

SandboxHandle::~SandboxHandle() {
    if (!root_.empty() && !config_.keep_roots) {
        std::error_code ec;
        fs::remove_all(root_, ec);
    }
}

SandboxHandle::SandboxHandle(SandboxHandle&& other) noexcept
    : root_(std::move(other.root_)), config_(std::move(other.config_)), mutex_(std::move(other.mutex_)) {
    other.root_.clear();
}

SandboxHandle& SandboxHandle::operator=(SandboxHandle&& other) noexcept {
    if (this != &other) {
        if (!root_.empty() && !config_.keep_roots) {
            std::error_code ec;
            fs::remove_all(root_, ec);
        }
        root_ = std::move(other.root_);
        config_ = std::move(other.config_);
        mutex_ = std::move(other.mutex_);
        other.root_.clear();
    }
    return *this;
}

SandboxHandle materialize(const Workspace& code, const Workspace& tests, const SandboxConfig& config,
                          bool allow_override) {
    if (config.timeout.count() <= 0) throw Error(ErrorCode::config_error, "sandbox timeout must be positive");
    if (!allow_override)
        for (const auto& [name, _] : tests.files())
            if (code.contains(name)) throw Error(ErrorCode::filename_collision, name + " is in both workspaces");

    SandboxHandle handle(make_fresh_root(config.work_parent), config);
    std::error_code ec;
    fs::create_directories(handle.work_dir(), ec);
    fs::create_directories(handle.reports_dir(), ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot prepare sandbox: " + ec.message());
    for (const auto* ws : {&code, &tests})
        for (const auto& [name, content] : ws->files()) {
            if (!is_safe_filename(name)) throw Error(ErrorCode::unsafe_filename, name);
            write_file(handle.work_dir() / name, content);
        }
    return handle;
}

CommandResult run_program(const SandboxHandle& handle, const std::vector<std::string>& argv) {
    bool allowed = false;
    for (const auto& tmpl : handle.config().allowed_commands)
        if (matches_template(handle, tmpl, argv)) {
            allowed = true;
            break;
        }
    if (!allowed) throw Error(ErrorCode::command_rejected, "command not allowed: " + text::join(argv, " "));
    std::lock_guard lock(handle.command_mutex());
    return execute(handle, argv, handle.config().timeout);
}

std::vector<TestReport> run_tests(const SandboxHandle& handle, const std::vector<std::string>& suites) {
    std::vector<TestReport> reports;
    if (suites.empty()) return reports;
    const auto& config = handle.config();
    if (config.runner_command.empty()) throw Error(ErrorCode::config_error, "no test runner configured");
    for (const auto& suite : suites)
        if (!is_present_file(handle, suite)) throw Error(ErrorCode::io_error, "suite not in sandbox: " + suite);

    std::lock_guard lock(handle.command_mutex());
    // One deadline for the whole call.
    const auto deadline = std::chrono::steady_clock::now() + config.timeout;
    for (std::size_t i = 0; i < suites.size(); ++i) {
        const auto& suite = suites[i];
        TestReport report{suite, {}};
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            report.cases.push_back(TestCase{suite, TestStatus::error, "suite not run: time limit reached"});
            reports.push_back(std::move(report));
            continue;
        }
        auto report_path = handle.reports_dir() / ("suite_" + std::to_string(i) + ".report");
        std::error_code ec;
        fs::remove(report_path, ec);
        auto argv = config.runner_command;
        argv.push_back(suite);
        argv.push_back("--report");
        argv.push_back(report_path.string());
        auto result = execute(handle, argv, remaining);
        if (!result.timed_out && fs::is_regular_file(report_path, ec)) {
            report.cases = decode_report(read_file(report_path));
            for (auto& c : report.cases) {
                text::replace_all(c.message, handle.work_dir().string(), ".");
                text::replace_all(c.message, handle.root().string(), ".");
            }
        } else {
            report.cases.push_back(TestCase{suite, TestStatus::error, describe_start_failure(result)});
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

std::vector<CapturedLog> capture_logs(const SandboxHandle& handle) {
    std::vector<CapturedLog> logs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(handle.work_dir(), ec)) {
        if (!entry.is_regular_file()) continue;
        auto name = entry.path().filename().string();
        for (const auto& glob : handle.config().log_capture_globs)
            if (::fnmatch(glob.c_str(), name.c_str(), 0) == 0) {
                logs.push_back(CapturedLog{name, read_file(entry.path())});
                break;
            }
    }
    std::sort(logs.begin(), logs.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return logs;
}

} // namespace evoloop
