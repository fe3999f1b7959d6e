#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace evoloop {

enum class TestStatus { pass, fail, error, skip };

std::string_view to_string(TestStatus status);
/// Throws RunnerProtocolError for anything outside the closed set.
TestStatus parse_status(std::string_view s);

struct TestCase {
    std::string test_id;
    TestStatus status = TestStatus::pass;
    std::string message;

    friend bool operator==(const TestCase&, const TestCase&) = default;
};

struct TestReport {
    std::string suite;
    std::vector<TestCase> cases;

    friend bool operator==(const TestReport&, const TestReport&) = default;
};

/// Runner report file (docs/runner-protocol.md):
///   line 1: "evoloop-report 1"
///   then one record per case: test_id TAB status TAB message LF
/// Within fields '\\', TAB, LF and CR are written as \\ \t \n \r.
std::string escape_field(std::string_view field);
std::string unescape_field(std::string_view field);

std::string encode_report(const std::vector<TestCase>& cases);
/// Throws RunnerProtocolError on a bad header, field count, escape, status,
/// or a repeated test id.
std::vector<TestCase> decode_report(std::string_view data);

} // namespace evoloop
