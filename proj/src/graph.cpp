#include "evoloop/graph.hpp"

#include "evoloop/error.hpp"
#include "evoloop/text.hpp"
#include "markdown.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

namespace evoloop {

std::string_view to_string(AgentRole role) {
    switch (role) {
    case AgentRole::organizer: return "organizer";
    case AgentRole::coder: return "coder";
    case AgentRole::tester: return "tester";
    case AgentRole::gradient: return "gradient";
    case AgentRole::updater: return "updater";
    }
    return "unknown";
}

std::string_view label_prefix(LabelKind kind) {
    return kind == LabelKind::task ? "Task" : "Programmer";
}

std::string template_for_role(AgentRole role) {
    switch (role) {
    case AgentRole::organizer: return "coding_organizer";
    case AgentRole::coder: return "coding_agent";
    case AgentRole::tester: return "testing_agent";
    case AgentRole::gradient: return "gradient_agent";
    case AgentRole::updater: return "updating_agent";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Grammar

namespace {

using md::find_heading;
using md::section_body;
using md::strip_bold;
using md::strip_bullet;

/// Consumes "<Prefix> <digits>" (optionally bold) from the front of `s`.
std::optional<std::string> take_label(std::string_view& s, LabelKind kind) {
    auto rest = text::trim(s);
    if (rest.substr(0, 2) == "**") rest = text::trim(rest.substr(2));
    auto prefix = label_prefix(kind);
    if (!text::istarts_with(rest, prefix)) return std::nullopt;
    rest.remove_prefix(prefix.size());
    while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
    std::size_t n = 0;
    while (n < rest.size() && std::isdigit(static_cast<unsigned char>(rest[n]))) ++n;
    if (n == 0) return std::nullopt;
    auto digits = rest.substr(0, n);
    while (digits.size() > 1 && digits.front() == '0') digits.remove_prefix(1);
    rest.remove_prefix(n);
    rest = text::trim(rest);
    if (rest.substr(0, 2) == "**") rest = text::trim(rest.substr(2));
    s = rest;
    return std::string(prefix) + " " + std::string(digits);
}

[[noreturn]] void malformed(std::size_t line_no, std::string_view line, std::string_view why) {
    throw Error(ErrorCode::malformed_line, "line " + std::to_string(line_no + 1) + ": " +
                                               std::string(why) + ": \"" +
                                               std::string(text::trim(line)) + "\"");
}

} // namespace

NetworkDraft parse_network_draft(std::string_view text, LabelKind kind, const DraftOptions& options) {
    auto lines = text::split_lines(text);
    auto comp_at = find_heading(lines, "composition");
    if (!comp_at) throw Error(ErrorCode::missing_section, "missing COMPOSITION section");
    auto flow_at = find_heading(lines, "workflow");
    if (!flow_at) throw Error(ErrorCode::missing_section, "missing WORKFLOW section");

    NetworkDraft draft;
    std::set<std::string> declared;
    for (auto [no, line] : section_body(lines, *comp_at)) {
        auto s = strip_bullet(line);
        if (s.empty()) continue;
        auto label = take_label(s, kind);
        if (!label || s.empty() || s.front() != ':')
            malformed(no, line, "expected '" + std::string(label_prefix(kind)) + " N: description'");
        auto desc = strip_bold(s.substr(1));
        if (desc.empty()) malformed(no, line, "empty description");
        if (!declared.insert(*label).second)
            throw Error(ErrorCode::duplicate_label, "duplicate label in COMPOSITION: " + *label);
        draft.composition.emplace_back(*label, std::string(desc));
    }
    if (draft.composition.size() > options.max_nodes)
        throw Error(ErrorCode::network_too_large,
                    "composition has " + std::to_string(draft.composition.size()) +
                        " entries; at most " + std::to_string(options.max_nodes) + " allowed");

    for (auto [no, line] : section_body(lines, *flow_at)) {
        auto s = strip_bullet(line);
        if (s.empty()) continue;
        auto label = take_label(s, kind);
        if (!label || s.empty() || s.front() != ':')
            malformed(no, line, "expected '" + std::string(label_prefix(kind)) + " N: [dependencies]'");
        auto deps_text = text::trim(s.substr(1));
        if (deps_text.size() < 2 || deps_text.front() != '[' || deps_text.back() != ']')
            malformed(no, line, "dependencies must be a bracketed list");
        auto inner = text::trim(deps_text.substr(1, deps_text.size() - 2));
        std::vector<std::string> deps;
        if (!inner.empty()) {
            for (const auto& part : text::split(inner, ',')) {
                std::string_view p = text::trim(part);
                if (p.empty()) continue;
                auto dep = take_label(p, kind);
                if (!dep || !p.empty()) malformed(no, line, "bad dependency label");
                deps.push_back(*dep);
            }
        }
        if (draft.workflow.count(*label))
            throw Error(ErrorCode::duplicate_label, "duplicate label in WORKFLOW: " + *label);
        if (!declared.count(*label))
            throw Error(ErrorCode::unknown_dependency, "WORKFLOW names undeclared label: " + *label);
        for (const auto& d : deps)
            if (!declared.count(d))
                throw Error(ErrorCode::unknown_dependency,
                            *label + " depends on undeclared label: " + d);
        draft.workflow.emplace(*label, std::move(deps));
    }
    for (const auto& [label, desc] : draft.composition) draft.workflow.try_emplace(label);
    return draft;
}

// ---------------------------------------------------------------------------
// Network

std::optional<std::vector<std::string>>
find_cycle(const std::vector<std::string>& ids, const std::set<MacNetwork::Edge>& edges) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& id : ids) adj[id];
    for (const auto& [from, to] : edges) adj[from].push_back(to);

    enum Color { white, grey, black };
    std::map<std::string, Color> color;
    std::vector<std::string> stack;
    std::optional<std::vector<std::string>> found;

    std::function<bool(const std::string&)> visit = [&](const std::string& v) {
        color[v] = grey;
        stack.push_back(v);
        for (const auto& w : adj[v]) {
            if (color[w] == grey) {
                auto it = std::find(stack.begin(), stack.end(), w);
                found = std::vector<std::string>(it, stack.end());
                return true;
            }
            if (color[w] == white && visit(w)) return true;
        }
        stack.pop_back();
        color[v] = black;
        return false;
    };
    for (const auto& id : ids)
        if (color[id] == white && visit(id)) return found;
    return std::nullopt;
}

MacNetwork MacNetwork::create(std::vector<AgentNode> nodes, std::set<Edge> edges) {
    if (nodes.empty()) throw Error(ErrorCode::empty_network, "network has no nodes");
    std::set<std::string> ids;
    std::vector<std::string> order;
    for (const auto& n : nodes) {
        if (n.id.empty()) throw Error(ErrorCode::malformed_line, "node with empty id");
        if (!ids.insert(n.id).second) throw Error(ErrorCode::duplicate_label, "duplicate node id: " + n.id);
        if ((n.role == AgentRole::coder || n.role == AgentRole::tester) && text::trim(n.subtask).empty())
            throw Error(ErrorCode::malformed_line, "node " + n.id + " has an empty subtask");
        order.push_back(n.id);
    }
    for (const auto& [from, to] : edges) {
        if (!ids.count(from) || !ids.count(to))
            throw Error(ErrorCode::unknown_dependency, "edge " + from + " -> " + to + " names a missing node");
        if (from == to) throw Error(ErrorCode::cycle_detected, "cycle: [" + from + "]");
    }
    if (auto cycle = find_cycle(order, edges))
        throw Error(ErrorCode::cycle_detected, "cycle: [" + text::join(*cycle, ", ") + "]");
    MacNetwork net;
    net.nodes_ = std::move(nodes);
    net.edges_ = std::move(edges);
    return net;
}

const AgentNode* MacNetwork::find(std::string_view id) const {
    for (const auto& n : nodes_)
        if (n.id == id) return &n;
    return nullptr;
}

std::vector<std::string> MacNetwork::predecessors(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& [from, to] : edges_)
        if (to == id) out.push_back(from);
    return out;
}

std::set<std::string> MacNetwork::ancestors(std::string_view id) const {
    std::set<std::string> seen;
    std::vector<std::string> work = predecessors(id);
    while (!work.empty()) {
        auto v = std::move(work.back());
        work.pop_back();
        if (!seen.insert(v).second) continue;
        for (auto& p : predecessors(v)) work.push_back(std::move(p));
    }
    return seen;
}

MacNetwork build_network(const NetworkDraft& draft, AgentRole role) {
    if (draft.composition.empty()) throw Error(ErrorCode::empty_network, "composition is empty");
    std::vector<AgentNode> nodes;
    for (const auto& [label, desc] : draft.composition)
        nodes.push_back(AgentNode{label, role, desc, template_for_role(role)});
    std::set<MacNetwork::Edge> edges;
    for (const auto& [label, deps] : draft.workflow)
        for (const auto& d : deps) edges.emplace(d, label);
    return MacNetwork::create(std::move(nodes), std::move(edges));
}

bool label_order(const std::string& a, const std::string& b) {
    auto key = [](const std::string& s) {
        std::size_t i = s.size();
        while (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) --i;
        std::string_view digits(s.data() + i, s.size() - i);
        while (digits.size() > 1 && digits.front() == '0') digits.remove_prefix(1);
        bool has = i < s.size();
        return std::make_tuple(has, digits.size(), digits, std::string_view(s));
    };
    return key(a) < key(b);
}

std::vector<std::string> topological_order(const MacNetwork& net) {
    return topological_order(net, label_order);
}

std::vector<std::string> topological_order(const MacNetwork& net, const TieBreak& before) {
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& n : net.nodes()) indegree[n.id] = 0;
    for (const auto& [from, to] : net.edges()) {
        ++indegree[to];
        out[from].push_back(to);
    }
    std::vector<std::string> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0) ready.push_back(id);
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto it = std::min_element(ready.begin(), ready.end(), before);
        auto v = *it;
        ready.erase(it);
        order.push_back(v);
        for (const auto& w : out[v])
            if (--indegree[w] == 0) ready.push_back(w);
    }
    return order;
}

// ---------------------------------------------------------------------------
// Canonical text

namespace {

std::string one_line(std::string_view s) {
    std::string out(text::trim(s));
    for (auto& c : out)
        if (c == '\n' || c == '\r') c = ' ';
    return out;
}

} // namespace

NetworkDraft to_draft(const MacNetwork& net) {
    NetworkDraft draft;
    for (const auto& n : net.nodes()) {
        draft.composition.emplace_back(n.id, n.subtask);
        auto preds = net.predecessors(n.id);
        std::sort(preds.begin(), preds.end(), label_order);
        draft.workflow[n.id] = std::move(preds);
    }
    return draft;
}

NetworkDraft relabel(const NetworkDraft& draft, LabelKind kind) {
    auto convert = [&](const std::string& label) {
        for (auto from : {LabelKind::task, LabelKind::programmer}) {
            auto prefix = std::string(label_prefix(from)) + " ";
            if (label.rfind(prefix, 0) == 0) return std::string(label_prefix(kind)) + " " + label.substr(prefix.size());
        }
        return label;
    };
    NetworkDraft out;
    for (const auto& [label, desc] : draft.composition) out.composition.emplace_back(convert(label), desc);
    for (const auto& [label, deps] : draft.workflow) {
        std::vector<std::string> mapped;
        for (const auto& d : deps) mapped.push_back(convert(d));
        out.workflow.emplace(convert(label), std::move(mapped));
    }
    return out;
}

std::string serialize_composition(const NetworkDraft& draft) {
    std::string out;
    for (const auto& [label, desc] : draft.composition) out += label + ": " + one_line(desc) + "\n";
    return out;
}

std::string serialize_workflow(const NetworkDraft& draft) {
    std::string out;
    for (const auto& [label, desc] : draft.composition) {
        auto it = draft.workflow.find(label);
        std::vector<std::string> deps = it == draft.workflow.end() ? std::vector<std::string>{} : it->second;
        out += label + ": [" + text::join(deps, ", ") + "]\n";
    }
    return out;
}

std::string serialize_draft(const NetworkDraft& draft) {
    return "### COMPOSITION\n```\n" + serialize_composition(draft) + "```\n\n### WORKFLOW\n```\n" +
           serialize_workflow(draft) + "```\n";
}

std::string serialize_network(const MacNetwork& net) { return serialize_draft(to_draft(net)); }

MacNetwork deserialize_network(std::string_view text, AgentRole role, const DraftOptions& options) {
    LabelKind kind = LabelKind::task;
    for (auto line : text::split_lines(text)) {
        auto s = strip_bullet(line);
        if (text::istarts_with(s, "Programmer")) {
            kind = LabelKind::programmer;
            break;
        }
        if (text::istarts_with(s, "Task")) break;
    }
    return build_network(parse_network_draft(text, kind, options), role);
}

} // namespace evoloop
