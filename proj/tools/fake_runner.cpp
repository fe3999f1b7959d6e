// Scripted stand-in for a real test runner. Reads directives from comment
// lines of the suite file and writes a runner-protocol report.
//
//   # evoloop-case: <id> pass
//   # evoloop-case: <id> fail|error|skip <message>
//   # evoloop-case: <id> file-contains <file> <needle...>
//   # evoloop-import-error       exit 1 without a report
//   # evoloop-hang               never finish
//   # evoloop-garbage-report     write an unparsable report
//
// Messages may use the report escapes (\n, \t, \\).

#include "evoloop/report_protocol.hpp"
#include "evoloop/text.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

namespace {

std::string read_file(const std::string& path, bool& ok) {
    std::ifstream in(path, std::ios::binary);
    ok = static_cast<bool>(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string message_of(std::string_view raw) {
    try {
        return evoloop::unescape_field(raw);
    } catch (const std::exception&) {
        return std::string(raw);
    }
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 4 || std::string(argv[2]) != "--report") {
        std::cerr << "usage: evoloop-fake-runner <suite> --report <path>\n";
        return 2;
    }
    const std::string suite = argv[1];
    const std::string report_path = argv[3];
    bool ok = false;
    const auto source = read_file(suite, ok);
    if (!ok) {
        std::cerr << "cannot read suite " << suite << "\n";
        return 2;
    }

    std::vector<evoloop::TestCase> cases;
    for (auto line : evoloop::text::split_lines(source)) {
        auto s = evoloop::text::trim(line);
        if (s == "# evoloop-import-error") {
            std::cerr << "ImportError: cannot import suite " << suite << "\n";
            return 1;
        }
        if (s == "# evoloop-hang") {
            for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
        }
        if (s == "# evoloop-garbage-report") {
            std::ofstream(report_path, std::ios::binary) << "this is not a report\n";
            return 0;
        }
        constexpr std::string_view tag = "# evoloop-case:";
        if (s.substr(0, tag.size()) != tag) continue;
        auto rest = evoloop::text::trim(s.substr(tag.size()));
        auto sp = rest.find(' ');
        if (sp == std::string_view::npos) continue;
        evoloop::TestCase c;
        c.test_id = std::string(rest.substr(0, sp));
        rest = evoloop::text::trim(rest.substr(sp + 1));
        sp = rest.find(' ');
        auto kind = rest.substr(0, sp);
        auto arg = sp == std::string_view::npos ? std::string_view{} : evoloop::text::trim(rest.substr(sp + 1));
        if (kind == "pass") {
            c.status = evoloop::TestStatus::pass;
        } else if (kind == "fail" || kind == "error" || kind == "skip") {
            c.status = evoloop::parse_status(kind);
            c.message = message_of(arg);
        } else if (kind == "file-contains") {
            auto fsp = arg.find(' ');
            auto file = std::string(arg.substr(0, fsp));
            auto needle = fsp == std::string_view::npos ? std::string() : message_of(evoloop::text::trim(arg.substr(fsp + 1)));
            bool readable = false;
            auto content = read_file(file, readable);
            if (readable && content.find(needle) != std::string::npos) {
                c.status = evoloop::TestStatus::pass;
            } else {
                c.status = evoloop::TestStatus::fail;
                c.message = readable ? "AssertionError: " + file + " does not contain \"" + needle + "\""
                                     : "FileNotFoundError: " + file;
            }
        } else {
            std::cerr << "unknown directive kind: " << kind << "\n";
            return 2;
        }
        cases.push_back(std::move(c));
    }

    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    out << evoloop::encode_report(cases);
    if (!out) {
        std::cerr << "cannot write report " << report_path << "\n";
        return 2;
    }
    std::size_t failing = 0;
    for (const auto& c : cases)
        if (c.status == evoloop::TestStatus::fail || c.status == evoloop::TestStatus::error) ++failing;
    std::cout << cases.size() << " cases, " << failing << " failing\n";
    return 0;
}
