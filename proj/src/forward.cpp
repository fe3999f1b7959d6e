#include "evoloop/forward.hpp"

#include "evoloop/digest.hpp"
#include "evoloop/parsers.hpp"
#include "evoloop/text.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <optional>

namespace evoloop {

ChatResponse ask(const AgentContext& ctx, const RenderedPrompt& prompt) {
    auto req = make_request(prompt);
    req.model_name = ctx.settings.model_name;
    req.temperature = ctx.settings.temperature;
    req.max_output_tokens = ctx.settings.max_output_tokens;
    return ctx.provider.complete(req);
}

namespace {

constexpr const char* kRepairTitle = "Your previous reply could not be used";

std::string repair_note(const Error& e) {
    return std::string(to_string(e.code())) + ": " + e.what() +
           "\nAnswer again and strictly follow the required format.";
}

std::string basename(const std::string& path) {
    auto slash = path.rfind('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

} // namespace

Organization self_organize(const AgentContext& ctx, const TaskSpec& task, TeamKind kind, const Workspace& current) {
    const bool coding = kind == TeamKind::coding;
    Bindings bindings;
    if (coding) {
        bindings["ideas"] = ctx.settings.ideas;
        bindings["codes"] = workspace_listing(current, ctx.settings.listing_budget);
        bindings["num_agents"] = std::to_string(ctx.settings.max_network_nodes);
    }
    auto tpl = coding ? templates::coding_organizer : templates::testing_organizer;
    DraftOptions draft_options{ctx.settings.max_network_nodes};

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= ctx.settings.max_repair_retries; ++attempt) {
        auto prompt = render_prompt(ctx.prompts, tpl, task, bindings);
        if (attempt > 0) prompt.append_section("repair_feedback", kRepairTitle, last_error);
        auto reply = ask(ctx, prompt);
        try {
            auto draft = parse_network_draft(reply.text, LabelKind::task, draft_options);
            if (coding) draft = relabel(draft, LabelKind::programmer);
            return Organization{build_network(draft, coding ? AgentRole::coder : AgentRole::tester),
                                static_cast<int>(attempt)};
        } catch (const Error& e) {
            if (!e.retryable()) throw;
            last_error = repair_note(e);
        }
    }
    throw Error(ErrorCode::organization_failed,
                std::string(coding ? "coding" : "testing") + " organizer gave no usable network after " +
                    std::to_string(ctx.settings.max_repair_retries + 1) + " attempts; last error: " + last_error);
}

std::string test_file_name(const AgentSettings& settings, const TaskSpec& task, std::size_t position) {
    return settings.test_prefix + "requirement_" + std::to_string(position) + "." + extension_for(task.language);
}

namespace {

struct NodeInput {
    Workspace view;
    std::string predecessor_text;
};

struct NodeOutcome {
    std::string reply;
    std::vector<FilePatch> accepted;
    NodeRecord record;
};

NodeOutcome run_node(const AgentContext& ctx, const TaskSpec& task, const AgentNode& node, std::size_t position,
                     const NodeInput& input, const ForwardOptions& options) {
    const bool testing = options.team == TeamKind::testing;
    Bindings bindings{{"subtask", node.subtask}};
    std::string template_id;
    if (testing) {
        Workspace shown = input.view;
        if (options.reference)
            for (const auto& [name, content] : options.reference->files())
                if (!shown.contains(name)) shown.put(name, content, std::string(kSeedOrigin));
        template_id = std::string(templates::testing_agent);
        bindings["codes"] = workspace_listing(shown, ctx.settings.listing_budget);
        bindings["test_file_name"] = test_file_name(ctx.settings, task, position);
    } else {
        template_id = node.prompt_template_id.empty() ? std::string(templates::coding_agent) : node.prompt_template_id;
        bindings["codes"] = workspace_listing(input.view, ctx.settings.listing_budget);
        bindings["unimplemented_file"] = text::join(unimplemented_files(input.view), "\n");
        bindings["assistant_role"] = ctx.settings.coding_role;
        bindings["additional_note"] = ctx.settings.additional_note;
    }

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= ctx.settings.max_repair_retries; ++attempt) {
        auto prompt = render_prompt(ctx.prompts, template_id, task, bindings);
        if (!input.predecessor_text.empty())
            prompt.append_section("predecessor_outputs", "Outputs of the preceding agents", input.predecessor_text);
        if (attempt > 0) prompt.append_section("repair_feedback", kRepairTitle, last_error);
        auto reply = ask(ctx, prompt);
        try {
            auto patches = parse_file_patches(reply.text);
            NodeOutcome out;
            out.reply = reply.text;
            out.record.node_id = node.id;
            out.record.prompt_digest = request_digest(make_request(prompt));
            out.record.reply_digest = sha256_hex(reply.text);
            out.record.retries = static_cast<int>(attempt);
            for (auto& p : patches) {
                if (testing && basename(p.filename).rfind(ctx.settings.test_prefix, 0) != 0) {
                    out.record.rejected_files.push_back(p.filename);
                    continue;
                }
                out.record.patched_files.push_back(p.filename);
                out.accepted.push_back(std::move(p));
            }
            return out;
        } catch (const Error& e) {
            if (!e.retryable()) throw;
            last_error = repair_note(e);
        }
    }
    throw Error(ErrorCode::no_patches_found, "no usable file patches after " +
                                                 std::to_string(ctx.settings.max_repair_retries + 1) +
                                                 " attempts; last error: " + last_error);
}

} // namespace

ForwardResult forward(const AgentContext& ctx, const TaskSpec& task, const MacNetwork& net, const Workspace& seed,
                      const ForwardOptions& options) {
    const auto order = topological_order(net, options.tie_break ? options.tie_break : TieBreak(label_order));
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;

    const Workspace base = seed.as_seed();
    std::map<std::string, NodeOutcome> done;

    auto merged = [&](const std::set<std::string>* only) {
        Workspace ws = base;
        for (const auto& id : order) {
            auto it = done.find(id);
            if (it == done.end() || (only && !only->count(id))) continue;
            for (const auto& p : it->second.accepted) ws.put(p.filename, p.content, id);
        }
        return ws;
    };
    std::set<std::string> skipped;
    if (options.only)
        for (const auto& id : order)
            if (!options.only->count(id)) {
                skipped.insert(id);
                done.emplace(id, NodeOutcome{});
            }
    auto trace_of_done = [&] {
        ForwardTrace trace;
        for (const auto& id : order)
            if (auto it = done.find(id); it != done.end() && !skipped.count(id)) trace.records.push_back(it->second.record);
        return trace;
    };
    auto prepare = [&](const std::string& id) {
        NodeInput input;
        auto ancestors = net.ancestors(id);
        input.view = merged(&ancestors);
        auto preds = net.predecessors(id);
        std::sort(preds.begin(), preds.end(),
                  [&](const std::string& a, const std::string& b) { return position[a] < position[b]; });
        for (const auto& p : preds) {
            if (skipped.count(p)) continue;
            if (!input.predecessor_text.empty()) input.predecessor_text += "\n\n";
            input.predecessor_text += "[" + p + "]\n" + text::tail_bytes(done.at(p).reply, ctx.settings.predecessor_budget);
        }
        return input;
    };
    auto fail = [&](const std::string& id, const std::string& what) -> AgentFailedError {
        return AgentFailedError(id, what, merged(nullptr), trace_of_done());
    };

    const std::size_t width = ctx.provider.order_independent() ? std::max<std::size_t>(1, ctx.provider.parallelism()) : 1;
    std::vector<std::string> pending;
    for (const auto& id : order)
        if (!skipped.count(id)) pending.push_back(id);
    while (!pending.empty()) {
        std::vector<std::string> wave;
        for (const auto& id : pending) {
            if (wave.size() == width) break;
            auto preds = net.predecessors(id);
            if (std::all_of(preds.begin(), preds.end(), [&](const std::string& p) { return done.count(p) != 0; }))
                wave.push_back(id);
        }
        std::vector<NodeInput> inputs;
        for (const auto& id : wave) inputs.push_back(prepare(id));

        std::vector<std::optional<NodeOutcome>> outcomes(wave.size());
        std::vector<std::string> errors(wave.size());
        auto run_one = [&](std::size_t i) {
            try {
                outcomes[i] = run_node(ctx, task, *net.find(wave[i]), position[wave[i]], inputs[i], options);
            } catch (const Error& e) {
                errors[i] = std::string(to_string(e.code())) + ": " + e.what();
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        };
        if (wave.size() == 1) {
            run_one(0);
        } else {
            std::vector<std::future<void>> futures;
            for (std::size_t i = 0; i < wave.size(); ++i) futures.push_back(std::async(std::launch::async, run_one, i));
            for (auto& f : futures) f.get();
        }
        for (std::size_t i = 0; i < wave.size(); ++i)
            if (outcomes[i]) done.emplace(wave[i], std::move(*outcomes[i]));
        for (std::size_t i = 0; i < wave.size(); ++i)
            if (!outcomes[i]) throw fail(wave[i], errors[i]);
        std::erase_if(pending, [&](const std::string& id) { return done.count(id) != 0; });
    }

    ForwardResult result;
    result.workspace = merged(nullptr);
    result.trace = trace_of_done();
    for (const auto& r : result.trace.records)
        result.rejected.insert(result.rejected.end(), r.rejected_files.begin(), r.rejected_files.end());
    return result;
}

} // namespace evoloop
