#include <doctest.h>

#include "evoloop/error.hpp"
#include "evoloop/feedback.hpp"
#include "evoloop/parsers.hpp"
#include "evoloop/report_protocol.hpp"
#include "evoloop/sandbox.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>

using namespace evoloop;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::io_error;
}

Workspace ws_of(std::initializer_list<std::pair<std::string, std::string>> files, const std::string& origin = "A") {
    Workspace ws;
    for (const auto& [name, content] : files) ws.put(name, content, origin);
    return ws;
}

std::string random_field(support::Rng& rng) {
    static const std::string alphabet = "ab\\\t\n\r x:";
    std::uniform_int_distribution<std::size_t> len(0, 24), pick(0, alphabet.size() - 1);
    std::string s(len(rng), ' ');
    for (auto& c : s) c = alphabet[pick(rng)];
    return s;
}

} // namespace

TEST_CASE("unsafe filenames never reach the sandbox") {
    for (const char* name : {"../evil.py", "a/../../evil.py", "/etc/passwd.py", "~/x.py", "a\\b.py", "C:x.py",
                             "./a.py", "a//b.py", "noext", "bad\nname.py", ""}) {
        CAPTURE(name);
        CHECK_FALSE(is_safe_filename(name));
        CHECK(code_of([&] { Workspace().put(name, "x", "A"); }) == ErrorCode::unsafe_filename);
    }
    CHECK(is_safe_filename("pkg/mod.py"));
    auto patches = parse_file_patches(support::fenced_file("../escape.py", "x") + support::fenced_file("ok.py", "y"));
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].filename == "ok.py");
    CHECK(code_of([] { parse_file_patches(support::fenced_file("../../etc/cron.py", "x")); }) ==
          ErrorCode::no_patches_found);
}

TEST_CASE("materialize writes both workspaces under a fresh root") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    fs::path root;
    {
        auto h = materialize(ws_of({{"main.py", "print(1)"}, {"pkg/util.py", "X = 1"}}),
                             ws_of({{"test_main.py", "# t"}}), cfg);
        root = h.root();
        CHECK(root.parent_path() == tmp.path());
        CHECK(root.filename().string().rfind("evoloop-sbx-", 0) == 0);
        CHECK(fs::exists(h.work_dir() / "pkg/util.py"));
        CHECK(fs::exists(h.work_dir() / "test_main.py"));
        CHECK(fs::is_directory(h.reports_dir()));
        auto moved = std::move(h);
        CHECK(fs::exists(moved.root()));
    }
    CHECK_FALSE(fs::exists(root));

    auto a = materialize({}, {}, cfg);
    auto b = materialize({}, {}, cfg);
    CHECK(a.root() != b.root());
}

TEST_CASE("filename collisions between code and tests") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    auto code = ws_of({{"main.py", "code"}});
    auto tests = ws_of({{"main.py", "tests"}});
    CHECK(code_of([&] { materialize(code, tests, cfg); }) == ErrorCode::filename_collision);
    auto h = materialize(code, tests, cfg, true);
    std::ifstream in(h.work_dir() / "main.py");
    std::string content((std::istreambuf_iterator<char>(in)), {});
    CHECK(content == "tests");
}

TEST_CASE("run_program runs allowlisted commands only") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    auto h = materialize(ws_of({{"main.py", "import os, sys\nprint('hi', os.getcwd().endswith('work'))\n"
                                            "print(os.environ.get('PYTHONHASHSEED'), file=sys.stderr)\nsys.exit(3)"}}),
                         {}, cfg);
    auto r = run_program(h, {"python3", "main.py"});
    CHECK(r.exit_code == 3);
    CHECK_FALSE(r.killed);
    CHECK(r.stdout_text == "hi True\n");
    CHECK(r.stderr_text == "0\n");

    CHECK(code_of([&] { run_program(h, {"sh", "-c", "echo no"}); }) == ErrorCode::command_rejected);
    CHECK(code_of([&] { run_program(h, {"python3", "missing.py"}); }) == ErrorCode::command_rejected);
    CHECK(code_of([&] { run_program(h, {"python3", "../main.py"}); }) == ErrorCode::command_rejected);
    CHECK(code_of([&] { run_program(h, {"python3", "main.py", "extra"}); }) == ErrorCode::command_rejected);
}

TEST_CASE("syntax errors surface as a failing exit with sanitized stderr") {
    support::TempDir tmp;
    auto h = materialize(ws_of({{"main.py", "def broken(:\n"}}), {}, support::sandbox_config(tmp.path()));
    auto r = run_program(h, {"python3", "main.py"});
    CHECK(r.exit_code != 0);
    CHECK(r.stderr_text.find("SyntaxError") != std::string::npos);
    CHECK(r.stderr_text.find(h.root().string()) == std::string::npos);
}

TEST_CASE("the child environment is filtered") {
    support::TempDir tmp;
    ::setenv("EVOLOOP_SECRET_FOR_TEST", "leak", 1);
    auto cfg = support::sandbox_config(tmp.path());
    cfg.headless_display = ":99";
    auto h = materialize(ws_of({{"main.py", "import os\nprint(os.environ.get('EVOLOOP_SECRET_FOR_TEST'), "
                                            "os.environ.get('DISPLAY'))"}}),
                         {}, cfg);
    CHECK(run_program(h, {"python3", "main.py"}).stdout_text == "None :99\n");
    ::unsetenv("EVOLOOP_SECRET_FOR_TEST");
}

TEST_CASE("an infinite loop is killed at the deadline") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    cfg.timeout = std::chrono::milliseconds(1000);
    auto h = materialize(ws_of({{"main.py", "import subprocess\n"
                                            "subprocess.Popen(['python3', '-c', 'while True: pass'])\n"
                                            "while True:\n    pass"}}),
                         {}, cfg);
    auto start = std::chrono::steady_clock::now();
    auto r = run_program(h, {"python3", "main.py"});
    auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(r.timed_out);
    CHECK(r.killed);
    CHECK(elapsed < std::chrono::seconds(3));
}

TEST_CASE("output caps truncate and flag") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    cfg.max_output_bytes = 1024;
    auto h = materialize(ws_of({{"main.py", "import sys\nsys.stdout.write('o' * 200000)\nsys.stderr.write('e' * 50)"}}),
                         {}, cfg);
    auto r = run_program(h, {"python3", "main.py"});
    CHECK(r.exit_code == 0);
    CHECK(r.stdout_truncated);
    CHECK(r.stdout_text.size() <= 1024);
    CHECK_FALSE(r.stderr_truncated);
    CHECK(r.stderr_text == std::string(50, 'e'));
}

TEST_CASE("report escapes round trip") {
    support::Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        auto s = random_field(rng);
        auto esc = escape_field(s);
        CHECK(esc.find_first_of("\t\n\r") == std::string::npos);
        REQUIRE(unescape_field(esc) == s);
    }
    std::vector<TestCase> cases{{"a", TestStatus::pass, ""}, {"b\tc", TestStatus::fail, "line1\nline2\\"},
                                {"d", TestStatus::skip, "why"}};
    CHECK(decode_report(encode_report(cases)) == cases);
    CHECK(encode_report({}) == "evoloop-report 1\n");
}

TEST_CASE("malformed reports are protocol errors") {
    auto bad = [](const std::string& s) { return code_of([&] { decode_report(s); }); };
    CHECK(bad("") == ErrorCode::runner_protocol_error);
    CHECK(bad("evoloop-report 2\n") == ErrorCode::runner_protocol_error);
    CHECK(bad("evoloop-report 1\na\tpass\n") == ErrorCode::runner_protocol_error);
    CHECK(bad("evoloop-report 1\na\tok\t\n") == ErrorCode::runner_protocol_error);
    CHECK(bad("evoloop-report 1\na\tpass\t\\q\n") == ErrorCode::runner_protocol_error);
    CHECK(bad("evoloop-report 1\na\tpass\t\na\tfail\tx\n") == ErrorCode::runner_protocol_error);
    CHECK(code_of([] { parse_status("PASS"); }) == ErrorCode::runner_protocol_error);
}

TEST_CASE("run_tests through the fake runner") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    auto tests = ws_of({
        {"test_a.py", "# evoloop-case: t1 pass\n# evoloop-case: t2 fail boom\\nat line 3\n"
                      "# evoloop-case: t3 skip later\n# evoloop-case: t4 file-contains main.py def add(\n"},
        {"test_b.py", "# evoloop-import-error\n"},
        {"test_c.py", "# evoloop-case: e1 error crashed in " + tmp.path().string() + "\n"},
    });
    auto h = materialize(ws_of({{"main.py", "def add(a, b): return a + b"}}), tests, cfg);
    auto reports = run_tests(h, {"test_a.py", "test_b.py", "test_c.py"});
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].suite == "test_a.py");
    REQUIRE(reports[0].cases.size() == 4);
    CHECK(reports[0].cases[1] == TestCase{"t2", TestStatus::fail, "boom\nat line 3"});
    CHECK(reports[0].cases[3].status == TestStatus::pass);
    CHECK(tally(reports[0]) == TestTally{2, 1, 0, 1});

    REQUIRE(reports[1].cases.size() == 1);
    CHECK(reports[1].cases[0].test_id == "test_b.py");
    CHECK(reports[1].cases[0].status == TestStatus::error);
    CHECK(reports[1].cases[0].message.find("exit code 1") != std::string::npos);
    CHECK(reports[1].cases[0].message.find("ImportError") != std::string::npos);

    CHECK(reports[2].cases[0].status == TestStatus::error);
    CHECK(tally(reports) == TestTally{2, 1, 2, 1});
}

TEST_CASE("runner protocol violations propagate") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    auto h = materialize({}, ws_of({{"test_g.py", "# evoloop-garbage-report\n"},
                                    {"test_d.py", "# evoloop-case: x pass\n# evoloop-case: x fail no\n"}}),
                         cfg);
    CHECK(code_of([&] { run_tests(h, {"test_g.py"}); }) == ErrorCode::runner_protocol_error);
    CHECK(code_of([&] { run_tests(h, {"test_d.py"}); }) == ErrorCode::runner_protocol_error);
    CHECK(code_of([&] { run_tests(h, {"test_missing.py"}); }) == ErrorCode::io_error);
    CHECK(run_tests(h, {}).empty());
}

TEST_CASE("a hanging suite uses up the shared deadline") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    cfg.timeout = std::chrono::milliseconds(1000);
    auto h = materialize({}, ws_of({{"test_h.py", "# evoloop-hang\n"}, {"test_ok.py", "# evoloop-case: a pass\n"}}),
                         cfg);
    auto start = std::chrono::steady_clock::now();
    auto reports = run_tests(h, {"test_h.py", "test_ok.py"});
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].cases[0].message.find("timed out") != std::string::npos);
    CHECK(reports[1].cases[0] == TestCase{"test_ok.py", TestStatus::error, "suite not run: time limit reached"});
}

TEST_CASE("logs matching the capture globs are collected in name order") {
    support::TempDir tmp;
    auto cfg = support::sandbox_config(tmp.path());
    cfg.log_capture_globs = {"*.log"};
    auto h = materialize(ws_of({{"main.py", "open('game.log', 'w').write('over')\nopen('b.log', 'w').write('x')"}}),
                         {}, cfg);
    run_program(h, {"python3", "main.py"});
    auto logs = capture_logs(h);
    CHECK(logs == std::vector<CapturedLog>{{"b.log", "x"}, {"game.log", "over"}});
}

TEST_CASE("assemble_loss layout") {
    CommandResult program;
    program.exit_code = 1;
    program.stderr_text = "Traceback\nNameError: sub";
    std::vector<TestReport> reports{{"test_calc.py",
                                     {{"test_add", TestStatus::pass, ""},
                                      {"test_sub", TestStatus::fail, "AttributeError: no sub"},
                                      {"test_mul", TestStatus::skip, "todo"}}}};
    auto fb = assemble_loss(program, reports, kDefaultLossBudget, {{"game.log", "score 3"}});
    CHECK(fb.loss_text() == "## Program execution\n"
                            "result: exit code 1\n"
                            "stdout: (empty)\n"
                            "stderr:\n"
                            "Traceback\n"
                            "NameError: sub\n"
                            "\n"
                            "## Log game.log\n"
                            "score 3\n"
                            "\n"
                            "## Test summary\n"
                            "test_calc.py: 1 passed, 1 failed, 0 errors, 1 skipped\n"
                            "total: 1 passed, 1 failed, 0 errors, 1 skipped\n"
                            "\n"
                            "## Failures\n"
                            "### test_calc.py::test_sub [fail]\n"
                            "AttributeError: no sub\n");
    CHECK_FALSE(fb.truncated());
    CHECK_FALSE(fb.all_passed());
    CHECK(fb.provenance() == "environment");
    CHECK(fb.counts() == TestTally{1, 1, 0, 1});
}

TEST_CASE("assemble_loss outcomes and truncation") {
    CommandResult timed;
    timed.timed_out = true;
    timed.killed = true;
    timed.stdout_text = "partial";
    timed.stdout_truncated = true;
    auto none = assemble_loss(timed, {});
    CHECK(none.loss_text().find("result: killed after exceeding the time limit\n") != std::string::npos);
    CHECK(none.loss_text().find("partial\n[stdout truncated]\n") != std::string::npos);
    CHECK(none.loss_text().find("no test cases were executed") != std::string::npos);
    CHECK_FALSE(none.all_passed());

    auto ok = assemble_loss(CommandResult{}, {{"test_a.py", {{"a", TestStatus::pass, ""}}}});
    CHECK(ok.all_passed());
    CHECK(ok.loss_text().ends_with("\nall tests passed\n"));

    auto only_skips = assemble_loss(CommandResult{}, {{"test_a.py", {{"a", TestStatus::skip, ""}}}});
    CHECK_FALSE(only_skips.all_passed());

    CommandResult noisy;
    noisy.stdout_text = std::string(5000, 'n');
    auto cut = assemble_loss(noisy, {{"test_a.py", {{"late", TestStatus::error, "final failure"}}}}, 300);
    CHECK(cut.truncated());
    CHECK(cut.loss_text().size() <= 300);
    CHECK(cut.loss_text().starts_with("[earlier feedback truncated]\n"));
    CHECK(cut.loss_text().ends_with("### test_a.py::late [error]\nfinal failure\n"));
    // The untruncated sections stay available.
    CHECK(cut.program_section().size() > 5000);
}
