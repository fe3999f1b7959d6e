#pragma once

#include "evoloop/error.hpp"
#include "evoloop/graph.hpp"
#include "evoloop/prompts.hpp"
#include "evoloop/provider.hpp"
#include "evoloop/workspace.hpp"

#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace evoloop {

struct AgentSettings {
    std::size_t max_repair_retries = 2;
    std::size_t max_network_nodes = 10;
    /// Per-predecessor reply budget, tail-preserving.
    std::size_t predecessor_budget = 8 * 1024;
    /// Budget for the "Codes:" workspace listing.
    std::size_t listing_budget = 48 * 1024;
    std::string test_prefix = "test_";
    std::string coding_role = "Programmer";
    std::string updating_role = "organization fine-tuner";
    std::string additional_note;
    std::string ideas;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 4096;
};

/// Shared handles every agent call needs.
struct AgentContext {
    Provider& provider;
    const PromptLibrary& prompts;
    AgentSettings settings;
};

/// Sends a rendered prompt with the configured model parameters.
ChatResponse ask(const AgentContext& ctx, const RenderedPrompt& prompt);

enum class TeamKind { coding, testing };

struct Organization {
    MacNetwork network;
    int retries = 0;
};

/// Asks the matching organizer for a COMPOSITION/WORKFLOW and builds the
/// network, re-asking with the parse error appended on failure. Coding
/// networks are relabeled to "Programmer N" so they share labels with the
/// updating agent's output. Throws
/// OrganizationFailed once max_repair_retries are spent.
Organization self_organize(const AgentContext& ctx, const TaskSpec& task, TeamKind kind,
                           const Workspace& current = {});

struct NodeRecord {
    std::string node_id;
    std::string prompt_digest;
    std::string reply_digest;
    std::vector<std::string> patched_files;
    std::vector<std::string> rejected_files;
    int retries = 0;

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

/// One record per executed node, in merge (topological) order.
struct ForwardTrace {
    std::vector<NodeRecord> records;

    friend bool operator==(const ForwardTrace&, const ForwardTrace&) = default;
};

struct ForwardOptions {
    TeamKind team = TeamKind::coding;
    /// Overrides the sibling tie-break; the default is label_order.
    TieBreak tie_break;
    /// Read-only files shown to agents next to their own view (the code a
    /// testing team is writing tests for).
    const Workspace* reference = nullptr;
    /// When set, only these nodes run; the others contribute nothing but
    /// keep their positions.
    const std::set<std::string>* only = nullptr;
};

struct ForwardResult {
    Workspace workspace;
    ForwardTrace trace;
    /// Patches a testing agent produced for non-test files.
    std::vector<std::string> rejected;
};

/// Executes every node once in topological order. A node sees the seed plus
/// the patches of its ancestors, and the replies of its direct predecessors;
/// patches merge last-writer-wins in topological order. Siblings may run
/// concurrently when the provider allows it.
ForwardResult forward(const AgentContext& ctx, const TaskSpec& task, const MacNetwork& net,
                      const Workspace& seed, const ForwardOptions& options = {});

/// Test-file name the testing agent at `position` is told to write.
std::string test_file_name(const AgentSettings& settings, const TaskSpec& task, std::size_t position);

class AgentFailedError : public Error {
public:
    AgentFailedError(std::string node_id, const std::string& message, Workspace partial, ForwardTrace trace)
        : Error(ErrorCode::agent_failed, "agent " + node_id + " failed: " + message),
          node_id_(std::move(node_id)), partial_(std::move(partial)), trace_(std::move(trace)) {}

    const std::string& node_id() const { return node_id_; }
    /// Workspace as merged from the nodes that finished before the failure.
    const Workspace& partial() const { return partial_; }
    const ForwardTrace& trace() const { return trace_; }

private:
    std::string node_id_;
    Workspace partial_;
    ForwardTrace trace_;
};

} // namespace evoloop
