#include <doctest.h>

#include "evoloop/backprop.hpp"
#include "support.hpp"

#include <algorithm>
#include <map>
#include <type_traits>

using namespace evoloop;
using support::FnProvider;

// Feedback text can only come from the environment: there is no way to make
// an ExecutionFeedback, or a GradientContext, out of a plain string.
static_assert(!std::is_default_constructible_v<ExecutionFeedback>);
static_assert(!std::is_constructible_v<ExecutionFeedback, std::string>);
static_assert(!std::is_constructible_v<ExecutionFeedback, const char*>);
static_assert(!std::is_constructible_v<ExecutionFeedback, CommandResult>);
static_assert(!std::is_constructible_v<ExecutionFeedback, CommandResult, std::vector<TestReport>>);
static_assert(!std::is_constructible_v<GradientContext, TaskSpec, Workspace, Workspace, std::string>);
static_assert(!std::is_constructible_v<GradientContext, TaskSpec, Workspace, Workspace, const char*>);
static_assert(!std::is_constructible_v<GradientContext, TaskSpec, Workspace, Workspace, CommandResult>);
static_assert(!std::is_constructible_v<GradientContext, TaskSpec, Workspace, Workspace, std::vector<TestReport>>);
static_assert(!std::is_aggregate_v<ExecutionFeedback>);
static_assert(std::is_constructible_v<GradientContext, TaskSpec, Workspace, Workspace, const ExecutionFeedback&>);

namespace {

ExecutionFeedback failing_feedback() {
    CommandResult program;
    program.stderr_text = "AttributeError: module 'main' has no attribute 'sub'";
    return assemble_loss(program, {{"test_requirement_0.py",
                                    {{"test_add", TestStatus::pass, ""},
                                     {"test_sub", TestStatus::fail, "AttributeError: sub"}}}});
}

Workspace code_ws() {
    Workspace ws;
    ws.put("main.py", "def add(a, b):\n    return a + b", "Programmer 1");
    return ws;
}

Workspace tests_ws() {
    Workspace ws;
    ws.put("test_requirement_0.py", "import main", "Task 1");
    return ws;
}

MacNetwork one_programmer() {
    return build_network(NetworkDraft{{{"Programmer 1", "write main.py"}}, {{"Programmer 1", {}}}}, AgentRole::coder);
}

const char* kDiagnosis = "file name: main.py\nfunction name: sub\ndetailed analysis of the problem: sub is missing.\n";

std::string update_reply(const std::string& network) {
    return "### REQUIREMENTS PROGRESS\nrequirement: sub works\nachieved: False\ndouble-checked: True\n"
           "detailed progress: missing\n\n" +
           network;
}

} // namespace

TEST_CASE("gradient prompt carries code, tests and the environment loss") {
    auto prompts = PromptLibrary::builtin();
    FnProvider p([](const ChatRequest&, int) { return std::string(kDiagnosis); });
    AgentContext ctx{p, prompts, {}};
    auto fb = failing_feedback();
    GradientContext gc(support::calc_task(), code_ws(), tests_ws(), fb);
    auto out = compute_gradient(ctx, gc);
    CHECK(out.retries == 0);
    CHECK(out.gradient.kind == GradientKind::diagnoses);
    REQUIRE(out.gradient.diagnoses.size() == 1);
    CHECK(out.gradient.diagnoses[0].filename == "main.py");

    auto req = p.requests().at(0);
    CHECK(req.template_id == "gradient_agent");
    CHECK(req.bindings.at("codes").find("def add") != std::string::npos);
    CHECK(req.bindings.at("test_codes").find("test_requirement_0.py") != std::string::npos);
    CHECK(req.bindings.at("test_reports") == fb.program_section());
    CHECK(req.bindings.at("testcase_reports") == fb.tests_section());
    CHECK(req.user_text.find("test_requirement_0.py::test_sub [fail]") != std::string::npos);
}

TEST_CASE("gradient sentinels") {
    auto prompts = PromptLibrary::builtin();
    auto fb = failing_feedback();
    GradientContext gc(support::calc_task(), code_ws(), tests_ws(), fb);
    {
        FnProvider p([](const ChatRequest&, int) { return std::string("No error in codes."); });
        AgentContext ctx{p, prompts, {}};
        CHECK(compute_gradient(ctx, gc).gradient.kind == GradientKind::no_error);
    }
    {
        FnProvider p([](const ChatRequest&, int) {
            return std::string("Wrong test code. test_requirement_0.py expects the wrong sign.");
        });
        AgentContext ctx{p, prompts, {}};
        auto g = compute_gradient(ctx, gc).gradient;
        CHECK(g.kind == GradientKind::wrong_test_code);
        CHECK(g.raw_text.find("test_requirement_0.py") != std::string::npos);
    }
}

TEST_CASE("unparsable gradients are re-asked, then fail") {
    auto prompts = PromptLibrary::builtin();
    auto fb = failing_feedback();
    GradientContext gc(support::calc_task(), code_ws(), tests_ws(), fb);

    FnProvider fixes([](const ChatRequest&, int n) { return std::string(n == 0 ? "hmm, hard to say" : kDiagnosis); });
    AgentContext c1{fixes, prompts, {}};
    auto out = compute_gradient(c1, gc);
    CHECK(out.retries == 1);
    CHECK(fixes.requests()[1].bindings.at("+repair_feedback").find("UnparsableGradient") == 0);

    // Diagnoses naming only test files do not count.
    FnProvider blames_tests([](const ChatRequest&, int) {
        return std::string("file name: test_requirement_0.py\nfunction name: test_sub\n"
                           "detailed analysis of the problem: wrong.\n");
    });
    AgentContext c2{blames_tests, prompts, {}};
    try {
        compute_gradient(c2, gc);
        FAIL("expected GradientFailed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::gradient_failed);
    }
    CHECK(blames_tests.requests().size() == 3);
}

TEST_CASE("update prompt shows the current team with Programmer labels") {
    auto prompts = PromptLibrary::builtin();
    FnProvider p([](const ChatRequest&, int) {
        return update_reply(support::network_reply("", {{"Programmer 1", "write main.py"}, {"Programmer 2", "add sub"}},
                                                   {{"Programmer 1", ""}, {"Programmer 2", "Programmer 1"}}));
    });
    AgentContext ctx{p, prompts, {}};
    auto fb = failing_feedback();
    auto gradient = parse_gradient(kDiagnosis);
    auto out = compute_update(ctx, support::calc_task(), one_programmer(), code_ws(), fb, gradient);
    CHECK(out.retries == 0);
    CHECK(out.report.draft.composition.size() == 2);
    CHECK(out.report.progress.size() == 1);
    CHECK_FALSE(out.report.progress[0].achieved);

    auto req = p.requests().at(0);
    CHECK(req.template_id == "updating_agent");
    CHECK(req.bindings.at("composition") == "Programmer 1: write main.py\n");
    CHECK(req.bindings.at("workflow") == "Programmer 1: []\n");
    CHECK(req.bindings.at("issues") == describe_issues(gradient));
    CHECK(req.bindings.at("assistant_role") == "organization fine-tuner");
}

TEST_CASE("cyclic or malformed updates are re-asked") {
    auto prompts = PromptLibrary::builtin();
    FnProvider p([](const ChatRequest&, int n) -> std::string {
        if (n == 0)
            return update_reply(support::network_reply("", {{"Programmer 1", "a"}, {"Programmer 2", "b"}},
                                                       {{"Programmer 1", "Programmer 2"}, {"Programmer 2", "Programmer 1"}}));
        if (n == 1)
            return "### REQUIREMENTS PROGRESS\nrequirement: x\nachieved: maybe\ndouble-checked: True\n"
                   "detailed progress: -\n\n" +
                   support::network_reply("", {{"Programmer 1", "a"}}, {{"Programmer 1", ""}});
        return update_reply(support::network_reply("", {{"Programmer 1", "a"}}, {{"Programmer 1", ""}}));
    });
    AgentContext ctx{p, prompts, {}};
    auto fb = failing_feedback();
    auto out = compute_update(ctx, support::calc_task(), one_programmer(), code_ws(), fb, parse_gradient(kDiagnosis));
    CHECK(out.retries == 2);
    CHECK(p.requests()[1].bindings.at("+repair_feedback").find("CycleDetected") == 0);
    CHECK(p.requests()[2].bindings.at("+repair_feedback").find("MalformedLine") == 0);
}

TEST_CASE("no update is requested for an error-free gradient") {
    auto prompts = PromptLibrary::builtin();
    FnProvider p([](const ChatRequest&, int) { return std::string(); });
    AgentContext ctx{p, prompts, {}};
    auto fb = failing_feedback();
    try {
        compute_update(ctx, support::calc_task(), one_programmer(), code_ws(), fb, parse_gradient("No error in codes."));
        FAIL("expected UpdateFailed");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::update_failed);
    }
    CHECK(p.requests().empty());
}

TEST_CASE("apply_update diff agrees with a set-based oracle") {
    support::Rng rng(31);
    for (int i = 0; i < 300; ++i) {
        auto a = support::random_draft(rng, 8, LabelKind::programmer);
        auto b = support::random_draft(rng, 8, LabelKind::programmer);
        // Share some subtasks so "retained but unchanged" occurs.
        for (auto& [label, desc] : b.composition)
            for (const auto& [la, da] : a.composition)
                if (la == label && rng() % 2) desc = da;
        auto prev = build_network(a, AgentRole::coder);
        auto prev_copy = prev;
        auto applied = apply_update(prev, UpdateReport{{}, b});

        std::map<std::string, std::string> before(a.composition.begin(), a.composition.end());
        std::map<std::string, std::string> after(b.composition.begin(), b.composition.end());
        std::vector<std::string> removed, added, retained, rewritten;
        for (const auto& [label, desc] : a.composition) {
            if (!after.count(label)) {
                removed.push_back(label);
            } else {
                retained.push_back(label);
                if (after[label] != desc) rewritten.push_back(label);
            }
        }
        for (const auto& [label, desc] : b.composition)
            if (!before.count(label)) added.push_back(label);

        CHECK(applied.removed == removed);
        CHECK(applied.added == added);
        CHECK(applied.retained == retained);
        CHECK(applied.rewritten == rewritten);
        CHECK(applied.next == build_network(b, AgentRole::coder));
        CHECK(prev == prev_copy);
    }
}

TEST_CASE("apply_update rejects unusable drafts and renders its diff") {
    auto prev = one_programmer();
    NetworkDraft cyclic{{{"Programmer 1", "a"}, {"Programmer 2", "b"}},
                        {{"Programmer 1", {"Programmer 2"}}, {"Programmer 2", {"Programmer 1"}}}};
    CHECK_THROWS_AS(apply_update(prev, UpdateReport{{}, cyclic}), Error);
    CHECK_THROWS_AS(apply_update(prev, UpdateReport{{}, NetworkDraft{}}), Error);

    UpdateReport report{{{"sub works", false, true, "missing"}},
                        NetworkDraft{{{"Programmer 2", "add sub"}}, {{"Programmer 2", {}}}}};
    auto applied = apply_update(prev, report);
    auto text = serialize_applied_update(applied, report);
    CHECK(text.find("### CHANGES\nremoved: [Programmer 1]\nadded: [Programmer 2]\nretained: []\nrewritten: []\n") !=
          std::string::npos);
    CHECK(parse_update_report(text) == report);
}
