#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evoloop {

enum class AgentRole { organizer, coder, tester, gradient, updater };

std::string_view to_string(AgentRole role);

struct AgentNode {
    std::string id;
    AgentRole role = AgentRole::coder;
    std::string subtask;
    std::string prompt_template_id;

    friend bool operator==(const AgentNode&, const AgentNode&) = default;
};

/// Label prefix used by the organizer grammars: "Task N" or "Programmer N".
enum class LabelKind { task, programmer };

std::string_view label_prefix(LabelKind kind);

/// Organizer output before graph validation. Composition keeps document
/// order; every composition label has a workflow entry after parsing.
struct NetworkDraft {
    std::vector<std::pair<std::string, std::string>> composition;
    std::map<std::string, std::vector<std::string>> workflow;

    friend bool operator==(const NetworkDraft&, const NetworkDraft&) = default;
};

struct DraftOptions {
    std::size_t max_nodes = 10;
};

/// Parses the "### COMPOSITION" / "### WORKFLOW" sections of an organizer
/// reply. Headings match case-insensitively with or without leading '#';
/// code fences around section bodies are optional.
NetworkDraft parse_network_draft(std::string_view text, LabelKind kind,
                                 const DraftOptions& options = {});

/// Immutable, validated DAG of agent nodes. Nodes keep composition order.
class MacNetwork {
public:
    using Edge = std::pair<std::string, std::string>;

    /// Validates ids, endpoints, self-edges and acyclicity.
    static MacNetwork create(std::vector<AgentNode> nodes, std::set<Edge> edges);

    const std::vector<AgentNode>& nodes() const { return nodes_; }
    const std::set<Edge>& edges() const { return edges_; }
    std::size_t size() const { return nodes_.size(); }

    const AgentNode* find(std::string_view id) const;
    bool contains(std::string_view id) const { return find(id) != nullptr; }

    /// Direct predecessors of `id`, unordered.
    std::vector<std::string> predecessors(std::string_view id) const;
    /// All nodes with a path to `id`.
    std::set<std::string> ancestors(std::string_view id) const;

    friend bool operator==(const MacNetwork&, const MacNetwork&) = default;

private:
    MacNetwork() = default;

    std::vector<AgentNode> nodes_;
    std::set<Edge> edges_;
};

NetworkDraft to_draft(const MacNetwork& net);

/// Same draft with every label's prefix switched to `kind` ("Task 3" becomes
/// "Programmer 3"). Labels without a known prefix are kept.
NetworkDraft relabel(const NetworkDraft& draft, LabelKind kind);

/// Builds a network from a draft: one node per composition entry and an edge
/// (dep -> label) for every dependency.
MacNetwork build_network(const NetworkDraft& draft, AgentRole role);

/// Strict weak ordering used to break ties among ready nodes.
using TieBreak = std::function<bool(const std::string&, const std::string&)>;

/// Default tie-break: numeric label suffix, then lexicographic.
bool label_order(const std::string& a, const std::string& b);

std::vector<std::string> topological_order(const MacNetwork& net);
std::vector<std::string> topological_order(const MacNetwork& net, const TieBreak& before);

/// One cycle's labels in traversal order, or nullopt for a DAG.
std::optional<std::vector<std::string>>
find_cycle(const std::vector<std::string>& ids, const std::set<MacNetwork::Edge>& edges);

/// Canonical text form: both sections, fenced, labels in composition order.
std::string serialize_draft(const NetworkDraft& draft);
std::string serialize_composition(const NetworkDraft& draft);
std::string serialize_workflow(const NetworkDraft& draft);

std::string serialize_network(const MacNetwork& net);
/// Inverse of serialize_network; the label kind is detected from the text.
MacNetwork deserialize_network(std::string_view text, AgentRole role,
                               const DraftOptions& options = {});

std::string template_for_role(AgentRole role);

} // namespace evoloop
