#pragma once

#include "evoloop/feedback.hpp"
#include "evoloop/forward.hpp"
#include "evoloop/graph.hpp"
#include "evoloop/parsers.hpp"
#include "evoloop/prompts.hpp"
#include "evoloop/workspace.hpp"

#include <string>
#include <vector>

namespace evoloop {

/// Inputs of the gradient agent. The loss can only come from an
/// ExecutionFeedback, which only assemble_loss creates.
class GradientContext {
public:
    GradientContext(TaskSpec task, Workspace code, Workspace tests, const ExecutionFeedback& feedback)
        : task_(std::move(task)), code_(std::move(code)), tests_(std::move(tests)), feedback_(feedback) {}

    const TaskSpec& task() const { return task_; }
    const Workspace& code() const { return code_; }
    const Workspace& tests() const { return tests_; }
    const ExecutionFeedback& feedback() const { return feedback_; }

private:
    TaskSpec task_;
    Workspace code_;
    Workspace tests_;
    ExecutionFeedback feedback_;
};

struct GradientOutcome {
    TextualGradient gradient;
    int retries = 0;
};

/// Asks the gradient agent and parses its reply, re-asking with the parse
/// error appended. Throws GradientFailed once retries are spent.
GradientOutcome compute_gradient(const AgentContext& ctx, const GradientContext& gc);

struct UpdateOutcome {
    UpdateReport report;
    int retries = 0;
};

/// Asks the updating agent for a new coding team. The reply must parse and
/// describe an acyclic network, otherwise it is re-asked. Throws
/// UpdateFailed once retries are spent or when `gradient` has nothing to fix.
UpdateOutcome compute_update(const AgentContext& ctx, const TaskSpec& task, const MacNetwork& net,
                             const Workspace& code, const ExecutionFeedback& feedback,
                             const TextualGradient& gradient);

struct AppliedUpdate {
    MacNetwork previous;
    MacNetwork next;
    std::vector<std::string> removed;
    std::vector<std::string> added;
    /// Labels present before and after.
    std::vector<std::string> retained;
    /// Retained labels whose subtask text changed.
    std::vector<std::string> rewritten;
    std::vector<RequirementProgress> progress;
};

/// Builds the next network from the report's draft. Nodes are matched by
/// label. Throws CycleDetected/EmptyNetwork; `prev` is never modified.
AppliedUpdate apply_update(const MacNetwork& prev, const UpdateReport& report);

/// Text form written to update.txt: the report followed by the label diff.
std::string serialize_applied_update(const AppliedUpdate& update, const UpdateReport& report);

} // namespace evoloop
