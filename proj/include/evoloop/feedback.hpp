#pragma once

#include "evoloop/report_protocol.hpp"
#include "evoloop/sandbox.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace evoloop {

struct TestTally {
    std::size_t passed = 0;
    std::size_t failed = 0;
    std::size_t errors = 0;
    std::size_t skipped = 0;

    std::size_t total() const { return passed + failed + errors + skipped; }
    std::size_t failing() const { return failed + errors; }

    friend bool operator==(const TestTally&, const TestTally&) = default;
};

TestTally tally(const std::vector<TestReport>& reports);
TestTally tally(const TestReport& report);

inline constexpr std::string_view kEnvironmentProvenance = "environment";
inline constexpr std::size_t kDefaultLossBudget = 16 * 1024;

/// Textual loss produced by the environment. The only way to obtain one is
/// assemble_loss, so its text always derives from execution results.
class ExecutionFeedback {
public:
    const CommandResult& program_result() const { return program_; }
    const std::vector<TestReport>& test_reports() const { return reports_; }
    const std::vector<CapturedLog>& logs() const { return logs_; }

    const std::string& loss_text() const { return loss_text_; }
    bool truncated() const { return truncated_; }
    std::string_view provenance() const { return kEnvironmentProvenance; }

    /// Program run and captured logs, untruncated.
    const std::string& program_section() const { return program_section_; }
    /// Per-suite counts and failure blocks, untruncated.
    const std::string& tests_section() const { return tests_section_; }

    TestTally counts() const { return tally(reports_); }
    /// At least one passing case and no failing ones.
    bool all_passed() const;

private:
    ExecutionFeedback() = default;
    friend ExecutionFeedback assemble_loss(const CommandResult&, const std::vector<TestReport>&, std::size_t,
                                           const std::vector<CapturedLog>&);

    CommandResult program_;
    std::vector<TestReport> reports_;
    std::vector<CapturedLog> logs_;
    std::string loss_text_;
    std::string program_section_;
    std::string tests_section_;
    bool truncated_ = false;
};

/// Sections in fixed order: program run, captured logs, per-suite counts,
/// failure blocks (or an "all tests passed" line). Over budget, the head is
/// dropped so the latest failures survive.
ExecutionFeedback assemble_loss(const CommandResult& program, const std::vector<TestReport>& reports,
                                std::size_t budget = kDefaultLossBudget, const std::vector<CapturedLog>& logs = {});

} // namespace evoloop
