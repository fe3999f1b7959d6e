#include "evoloop/backprop.hpp"

#include "evoloop/text.hpp"

#include <algorithm>
#include <set>

namespace evoloop {

namespace {

constexpr const char* kRepairTitle = "Your previous reply could not be used";

std::string repair_note(const Error& e) {
    return std::string(to_string(e.code())) + ": " + e.what() +
           "\nAnswer again and strictly follow the required format.";
}

std::string capped(const std::string& s) { return text::tail_bytes(s, kDefaultLossBudget); }

} // namespace

GradientOutcome compute_gradient(const AgentContext& ctx, const GradientContext& gc) {
    const auto& fb = gc.feedback();
    Bindings bindings{
        {"codes", workspace_listing(gc.code(), ctx.settings.listing_budget)},
        {"test_reports", capped(fb.program_section())},
        {"test_codes", workspace_listing(gc.tests(), ctx.settings.listing_budget)},
        {"testcase_reports", capped(fb.tests_section())},
    };
    GradientOptions options{ctx.settings.test_prefix};
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= ctx.settings.max_repair_retries; ++attempt) {
        auto prompt = render_prompt(ctx.prompts, templates::gradient_agent, gc.task(), bindings);
        if (attempt > 0) prompt.append_section("repair_feedback", kRepairTitle, last_error);
        auto reply = ask(ctx, prompt);
        try {
            return GradientOutcome{parse_gradient(reply.text, options), static_cast<int>(attempt)};
        } catch (const Error& e) {
            if (!e.retryable()) throw;
            last_error = repair_note(e);
        }
    }
    throw Error(ErrorCode::gradient_failed, "gradient agent gave no usable analysis after " +
                                                std::to_string(ctx.settings.max_repair_retries + 1) +
                                                " attempts; last error: " + last_error);
}

UpdateOutcome compute_update(const AgentContext& ctx, const TaskSpec& task, const MacNetwork& net,
                             const Workspace& code, const ExecutionFeedback& feedback,
                             const TextualGradient& gradient) {
    if (gradient.kind == GradientKind::no_error)
        throw Error(ErrorCode::update_failed, "gradient reports no error; nothing to update");
    auto draft = relabel(to_draft(net), LabelKind::programmer);
    Bindings bindings{
        {"composition", serialize_composition(draft)},
        {"workflow", serialize_workflow(draft)},
        {"codes", workspace_listing(code, ctx.settings.listing_budget)},
        {"test_reports", capped(feedback.program_section())},
        {"issues", describe_issues(gradient)},
        {"assistant_role", ctx.settings.updating_role},
    };
    DraftOptions options{ctx.settings.max_network_nodes};
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= ctx.settings.max_repair_retries; ++attempt) {
        auto prompt = render_prompt(ctx.prompts, templates::updating_agent, task, bindings);
        if (attempt > 0) prompt.append_section("repair_feedback", kRepairTitle, last_error);
        auto reply = ask(ctx, prompt);
        try {
            auto report = parse_update_report(reply.text, options);
            build_network(report.draft, AgentRole::coder);
            return UpdateOutcome{std::move(report), static_cast<int>(attempt)};
        } catch (const Error& e) {
            if (!e.retryable()) throw;
            last_error = repair_note(e);
        }
    }
    throw Error(ErrorCode::update_failed, "updating agent gave no usable team after " +
                                              std::to_string(ctx.settings.max_repair_retries + 1) +
                                              " attempts; last error: " + last_error);
}

AppliedUpdate apply_update(const MacNetwork& prev, const UpdateReport& report) {
    auto next = build_network(report.draft, AgentRole::coder);
    AppliedUpdate out{prev, next, {}, {}, {}, {}, report.progress};
    for (const auto& node : prev.nodes()) {
        const auto* after = next.find(node.id);
        if (!after) {
            out.removed.push_back(node.id);
            continue;
        }
        out.retained.push_back(node.id);
        if (after->subtask != node.subtask) out.rewritten.push_back(node.id);
    }
    for (const auto& node : next.nodes())
        if (!prev.contains(node.id)) out.added.push_back(node.id);
    return out;
}

std::string serialize_applied_update(const AppliedUpdate& update, const UpdateReport& report) {
    std::string out = serialize_update_report(report);
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += "\n### CHANGES\n";
    out += "removed: [" + text::join(update.removed, ", ") + "]\n";
    out += "added: [" + text::join(update.added, ", ") + "]\n";
    out += "retained: [" + text::join(update.retained, ", ") + "]\n";
    out += "rewritten: [" + text::join(update.rewritten, ", ") + "]\n";
    return out;
}

} // namespace evoloop
