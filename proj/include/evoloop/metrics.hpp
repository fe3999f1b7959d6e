#pragma once

#include "evoloop/evolution.hpp"
#include "evoloop/report_protocol.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evoloop {

enum class Difficulty { basic, advanced };

std::string_view to_string(Difficulty d);
/// Throws ConfigError.
Difficulty parse_difficulty(std::string_view s);

struct RequirementBinding {
    std::string requirement;
    Difficulty difficulty = Difficulty::basic;
    /// "test_id" or "suite::test_id"; never empty.
    std::vector<std::string> test_ids;

    friend bool operator==(const RequirementBinding&, const RequirementBinding&) = default;
};

/// Exact passed/total; value() is 0 when total is 0.
struct Ratio {
    std::size_t passed = 0;
    std::size_t total = 0;

    double value() const { return total == 0 ? 0.0 : static_cast<double>(passed) / static_cast<double>(total); }
    /// "2/13 (0.1538)", or "0/0 (n/a)".
    std::string describe() const;

    friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct RequirementStatus {
    std::string requirement;
    Difficulty difficulty = Difficulty::basic;
    bool passed = false;
    std::size_t cases_passed = 0;
    std::size_t cases_total = 0;

    friend bool operator==(const RequirementStatus&, const RequirementStatus&) = default;
};

struct AccuracyReport {
    Ratio basic;
    Ratio advanced;
    Ratio overall;
    /// In binding order.
    std::vector<RequirementStatus> requirements;

    friend bool operator==(const AccuracyReport&, const AccuracyReport&) = default;
};

/// A requirement passes when every bound case passes. Throws UnknownTestId
/// for ids missing from the reports (or ambiguous without a suite prefix)
/// and ConfigError for a binding with no test ids.
AccuracyReport compute_accuracy(const std::vector<RequirementBinding>& bindings,
                                const std::vector<TestReport>& reports);

/// Bindings file: a JSON array of
///   {"requirement": "...", "difficulty": "basic"|"advanced", "tests": ["id", ...]}
/// Throws ConfigError.
std::vector<RequirementBinding> parse_bindings(std::string_view json_text);
std::vector<RequirementBinding> load_bindings(const std::filesystem::path& path);

enum class ReportFormat { text, structured };

/// Text lists per-iteration pass counts, the termination reason and the
/// accuracy. Structured is JSON holding the accuracy report and the run's
/// file digests.
std::string render_report(const EvolutionRun& run, const AccuracyReport& accuracy, ReportFormat format);

/// Reads the accuracy part of a structured report. Throws ConfigError.
AccuracyReport parse_structured_report(std::string_view json_text);

/// Test reports of the last iteration, or none.
std::vector<TestReport> final_reports(const EvolutionRun& run);

} // namespace evoloop
