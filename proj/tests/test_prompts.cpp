#include <doctest.h>

#include "evoloop/error.hpp"
#include "evoloop/prompts.hpp"
#include "evoloop/provider.hpp"
#include "support.hpp"

#include <fstream>

using namespace evoloop;

TEST_CASE("builtin library has the six templates") {
    auto lib = PromptLibrary::builtin();
    CHECK(lib.ids() == std::vector<std::string>{"coding_agent", "coding_organizer", "gradient_agent",
                                                "testing_agent", "testing_organizer", "updating_agent"});
    CHECK(placeholders_in(lib.get(templates::testing_organizer).body) ==
          std::set<std::string>{"language", "modality", "task"});
    CHECK(placeholders_in(lib.get(templates::gradient_agent).body).count("testcase_reports") == 1);
    try {
        lib.get("nope");
        FAIL("expected UnknownTemplate");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unknown_template);
    }
}

TEST_CASE("placeholder scanning") {
    CHECK(placeholders_in("{a} {b_1} {B} {1x} {} {a b} {{c}}") == std::set<std::string>{"a", "b_1", "c"});
}

TEST_CASE("substitution is single pass and literal") {
    PromptLibrary lib = PromptLibrary::builtin();
    lib.set(PromptTemplate{"t", "sys", "Do {task} with {extra}; {extra}."});
    TaskSpec task{"n", "build {extra} thing", "cli", "python", {}};
    auto p = render_prompt(lib, "t", task, {{"extra", "$1 \\n {task}"}});
    CHECK(p.user_text == "Do build {extra} thing with $1 \\n {task}; $1 \\n {task}.");
    CHECK(p.system_text == "sys");
    CHECK(p.placeholder_bindings == Bindings{{"extra", "$1 \\n {task}"}, {"task", "build {extra} thing"}});
}

TEST_CASE("context overrides task bindings") {
    PromptLibrary lib = PromptLibrary::builtin();
    lib.set(PromptTemplate{"t", "", "{language}"});
    auto p = render_prompt(lib, "t", TaskSpec{"n", "d", "", "python", {}}, {{"language", "rust"}});
    CHECK(p.user_text == "rust");
}

TEST_CASE("missing placeholder names the token") {
    PromptLibrary lib = PromptLibrary::builtin();
    try {
        lib.set(PromptTemplate{"t", "", "{language} then {additional_note}"});
        render_prompt(lib, "t", TaskSpec{"n", "d", "", "python", {}}, {});
        FAIL("expected MissingPlaceholder");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::missing_placeholder);
        CHECK(std::string(e.what()).find("additional_note") != std::string::npos);
    }
}

TEST_CASE("requirements render numbered, falling back to the description") {
    auto b = task_bindings(TaskSpec{"n", "desc", "m", "python", {"one", "two"}});
    CHECK(b.at("requirements") == "1. one\n2. two");
    CHECK(task_bindings(TaskSpec{"n", "desc", "m", "python", {}}).at("requirements") == "1. desc");
}

TEST_CASE("task validation") {
    CHECK_NOTHROW(validate(TaskSpec{"n", "d", "", "python", {}}));
    CHECK_THROWS_AS(validate(TaskSpec{"n", "  \n", "", "python", {}}), Error);
}

TEST_CASE("directory overrides replace bodies and systems") {
    support::TempDir dir;
    std::ofstream(dir / "testing_agent.txt") << "custom {subtask}";
    std::ofstream(dir / "testing_agent.system.txt") << "be terse";
    auto lib = PromptLibrary::from_directory(dir.path());
    CHECK(lib.get(templates::testing_agent).body == "custom {subtask}");
    CHECK(lib.get(templates::testing_agent).system_text == "be terse");
    CHECK(lib.get(templates::coding_agent).body == PromptLibrary::builtin().get(templates::coding_agent).body);
}

TEST_CASE("appended sections join the request identity") {
    PromptLibrary lib = PromptLibrary::builtin();
    lib.set(PromptTemplate{"t", "", "x {task}"});
    auto p = render_prompt(lib, "t", TaskSpec{"n", "d", "", "python", {}}, {});
    auto base = request_digest(make_request(p));
    p.append_section("pred:Task 1", "Output of Task 1", "hello");
    CHECK(p.user_text == "x d\n\nOutput of Task 1:\nhello");
    auto req = make_request(p);
    CHECK(req.bindings.at("+pred:Task 1") == "hello");
    CHECK(request_digest(req) != base);
}
