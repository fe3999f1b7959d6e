#include "evoloop/feedback.hpp"

#include "evoloop/text.hpp"

namespace evoloop {

namespace {

constexpr std::string_view kTruncationMarker = "[earlier feedback truncated]\n";

void add_case(TestTally& t, TestStatus status) {
    switch (status) {
    case TestStatus::pass: ++t.passed; break;
    case TestStatus::fail: ++t.failed; break;
    case TestStatus::error: ++t.errors; break;
    case TestStatus::skip: ++t.skipped; break;
    }
}

void append_stream(std::string& out, std::string_view name, const std::string& body, bool truncated) {
    out += name;
    out += ":";
    if (body.empty()) {
        out += " (empty)\n";
    } else {
        out += "\n";
        out += body;
        if (body.back() != '\n') out += '\n';
    }
    if (truncated) out += "[" + std::string(name) + " truncated]\n";
}

std::string render_program(const CommandResult& program, const std::vector<CapturedLog>& logs) {
    std::string out = "## Program execution\n";
    if (program.timed_out)
        out += "result: killed after exceeding the time limit\n";
    else if (program.killed)
        out += "result: killed by signal (exit code " + std::to_string(program.exit_code) + ")\n";
    else
        out += "result: exit code " + std::to_string(program.exit_code) + "\n";
    append_stream(out, "stdout", program.stdout_text, program.stdout_truncated);
    append_stream(out, "stderr", program.stderr_text, program.stderr_truncated);
    for (const auto& log : logs) {
        out += "\n## Log " + log.name + "\n";
        out += log.content;
        if (!log.content.empty() && log.content.back() != '\n') out += '\n';
    }
    return out;
}

std::string render_counts(const TestTally& t) {
    return std::to_string(t.passed) + " passed, " + std::to_string(t.failed) + " failed, " +
           std::to_string(t.errors) + " errors, " + std::to_string(t.skipped) + " skipped";
}

std::string render_tests(const std::vector<TestReport>& reports) {
    std::string out = "## Test summary\n";
    for (const auto& r : reports) out += r.suite + ": " + render_counts(tally(r)) + "\n";
    auto all = tally(reports);
    out += "total: " + render_counts(all) + "\n";

    if (all.total() == 0) {
        out += "\nno test cases were executed\n";
        return out;
    }
    if (all.failing() == 0) {
        out += "\nall tests passed\n";
        return out;
    }
    out += "\n## Failures\n";
    for (const auto& r : reports)
        for (const auto& c : r.cases) {
            if (c.status != TestStatus::fail && c.status != TestStatus::error) continue;
            out += "### " + r.suite + "::" + c.test_id + " [" + std::string(to_string(c.status)) + "]\n";
            out += c.message;
            if (!c.message.empty() && c.message.back() != '\n') out += '\n';
        }
    return out;
}

} // namespace

TestTally tally(const TestReport& report) {
    TestTally t;
    for (const auto& c : report.cases) add_case(t, c.status);
    return t;
}

TestTally tally(const std::vector<TestReport>& reports) {
    TestTally t;
    for (const auto& r : reports)
        for (const auto& c : r.cases) add_case(t, c.status);
    return t;
}

bool ExecutionFeedback::all_passed() const {
    auto t = counts();
    return t.passed > 0 && t.failing() == 0;
}

ExecutionFeedback assemble_loss(const CommandResult& program, const std::vector<TestReport>& reports,
                                std::size_t budget, const std::vector<CapturedLog>& logs) {
    ExecutionFeedback fb;
    fb.program_ = program;
    fb.reports_ = reports;
    fb.logs_ = logs;
    fb.program_section_ = render_program(program, logs);
    fb.tests_section_ = render_tests(reports);
    std::string full = fb.program_section_ + "\n" + fb.tests_section_;
    if (full.size() > budget) {
        fb.truncated_ = true;
        if (budget > kTruncationMarker.size())
            fb.loss_text_ = std::string(kTruncationMarker) + text::tail_bytes(full, budget - kTruncationMarker.size());
        else
            fb.loss_text_ = text::tail_bytes(full, budget);
    } else {
        fb.loss_text_ = std::move(full);
    }
    return fb;
}

} // namespace evoloop
