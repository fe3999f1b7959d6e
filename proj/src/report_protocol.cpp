#include "evoloop/report_protocol.hpp"

#include "evoloop/error.hpp"
#include "evoloop/text.hpp"

#include <set>

namespace evoloop {

namespace {

constexpr std::string_view kReportMagic = "evoloop-report 1";

[[noreturn]] void protocol_error(const std::string& why) {
    throw Error(ErrorCode::runner_protocol_error, "runner report: " + why);
}

} // namespace

std::string_view to_string(TestStatus status) {
    switch (status) {
    case TestStatus::pass: return "pass";
    case TestStatus::fail: return "fail";
    case TestStatus::error: return "error";
    case TestStatus::skip: return "skip";
    }
    return "unknown";
}

TestStatus parse_status(std::string_view s) {
    if (s == "pass") return TestStatus::pass;
    if (s == "fail") return TestStatus::fail;
    if (s == "error") return TestStatus::error;
    if (s == "skip") return TestStatus::skip;
    protocol_error("unknown status '" + std::string(s) + "'");
}

std::string escape_field(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (char c : field) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
        }
    }
    return out;
}

std::string unescape_field(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (field[i] == '\t' || field[i] == '\n' || field[i] == '\r') protocol_error("raw separator inside a field");
        if (field[i] != '\\') {
            out += field[i];
            continue;
        }
        if (++i == field.size()) protocol_error("dangling escape");
        switch (field[i]) {
        case '\\': out += '\\'; break;
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        default: protocol_error(std::string("unknown escape \\") + field[i]);
        }
    }
    return out;
}

std::string encode_report(const std::vector<TestCase>& cases) {
    std::string out(kReportMagic);
    out += '\n';
    for (const auto& c : cases) {
        out += escape_field(c.test_id);
        out += '\t';
        out += to_string(c.status);
        out += '\t';
        out += escape_field(c.message);
        out += '\n';
    }
    return out;
}

std::vector<TestCase> decode_report(std::string_view data) {
    auto nl = data.find('\n');
    auto header = data.substr(0, nl);
    if (!header.empty() && header.back() == '\r') header.remove_suffix(1);
    if (header != kReportMagic) protocol_error("missing 'evoloop-report 1' header");
    std::vector<TestCase> cases;
    std::set<std::string> ids;
    if (nl == std::string_view::npos) return cases;
    std::size_t pos = nl + 1;
    while (pos < data.size()) {
        auto eol = data.find('\n', pos);
        auto line = data.substr(pos, eol == std::string_view::npos ? data.npos : eol - pos);
        pos = eol == std::string_view::npos ? data.size() : eol + 1;
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos)
            protocol_error("record must have exactly three fields");
        TestCase c;
        c.test_id = unescape_field(line.substr(0, t1));
        c.status = parse_status(line.substr(t1 + 1, t2 - t1 - 1));
        c.message = unescape_field(line.substr(t2 + 1));
        if (c.test_id.empty()) protocol_error("empty test id");
        if (!ids.insert(c.test_id).second) protocol_error("duplicate test id '" + c.test_id + "'");
        cases.push_back(std::move(c));
    }
    return cases;
}

} // namespace evoloop
