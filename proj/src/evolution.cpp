#include "evoloop/evolution.hpp"

#include "evoloop/digest.hpp"
#include "evoloop/error.hpp"
#include "evoloop/parsers.hpp"
#include "evoloop/text.hpp"
#include "json_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <system_error>

namespace fs = std::filesystem;

namespace evoloop {

using json_io::json;

namespace {

constexpr std::string_view kManifestFormat = "evoloop-run 1";
constexpr const char* kManifest = "manifest";
constexpr const char* kScript = "script";
constexpr const char* kTestingNetwork = "testing_network.txt";

} // namespace

std::string_view to_string(WrongTestPolicy policy) {
    return policy == WrongTestPolicy::drop_suite ? "drop_suite" : "regenerate_suite";
}

std::string_view to_string(Termination t) {
    switch (t) {
    case Termination::running: return "running";
    case Termination::converged: return "converged";
    case Termination::budget_exhausted: return "budget_exhausted";
    case Termination::failed: return "failed";
    }
    return "running";
}

WrongTestPolicy parse_wrong_test_policy(std::string_view s) {
    if (s == "drop_suite") return WrongTestPolicy::drop_suite;
    if (s == "regenerate_suite") return WrongTestPolicy::regenerate_suite;
    throw Error(ErrorCode::config_error, "unknown wrong_test_policy: " + std::string(s));
}

Termination parse_termination(std::string_view s) {
    for (auto t : {Termination::running, Termination::converged, Termination::budget_exhausted, Termination::failed})
        if (to_string(t) == s) return t;
    throw Error(ErrorCode::corrupt_snapshot, "unknown termination: " + std::string(s));
}

bool operator==(const EvolutionConfig& a, const EvolutionConfig& b) {
    return json_io::config_to_json(a) == json_io::config_to_json(b);
}

void validate(const EvolutionConfig& c) {
    if (c.max_iterations < 1) throw Error(ErrorCode::config_error, "max_iterations must be at least 1");
    if (c.entry_command.empty()) throw Error(ErrorCode::config_error, "entry_command is empty");
    if (c.sandbox.timeout.count() <= 0) throw Error(ErrorCode::config_error, "sandbox timeout must be positive");
    if (c.loss_budget == 0) throw Error(ErrorCode::config_error, "loss_budget must be positive");
    if (c.agents.max_network_nodes == 0) throw Error(ErrorCode::config_error, "max_network_nodes must be positive");
}

TargetProxy generate_target_proxy(const AgentContext& ctx, const TaskSpec& task, const TieBreak& tie_break) {
    auto org = self_organize(ctx, task, TeamKind::testing);
    ForwardOptions options;
    options.team = TeamKind::testing;
    options.tie_break = tie_break;
    auto fr = forward(ctx, task, org.network, {}, options);
    return TargetProxy{org.network, std::move(fr.workspace), std::move(fr.rejected)};
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::corrupt_snapshot, "cannot read " + path.filename().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, std::string_view content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

void write_workspace(const fs::path& dir, const Workspace& ws) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    for (const auto& [name, content] : ws.files()) write_text(dir / name, content);
}

Workspace read_workspace(const fs::path& dir, const std::map<std::string, std::string>& origins = {}) {
    Workspace ws;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::corrupt_snapshot, "missing directory " + dir.filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        auto name = fs::relative(f, dir).generic_string();
        if (!is_safe_filename(name)) throw Error(ErrorCode::corrupt_snapshot, "unsafe file in snapshot: " + name);
        auto it = origins.find(name);
        ws.put(name, read_text(f), it == origins.end() ? std::string(kSeedOrigin) : it->second);
    }
    return ws;
}

std::string iter_dir(std::size_t k) { return "iter_" + std::to_string(k); }

/// Iteration index of a run-relative path "iter_<k>/...", if any.
std::optional<std::size_t> iteration_of(const std::string& rel) {
    if (rel.rfind("iter_", 0) != 0) return std::nullopt;
    auto slash = rel.find('/');
    auto digits = rel.substr(5, slash == std::string::npos ? std::string::npos : slash - 5);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    return static_cast<std::size_t>(std::stoull(digits));
}

json string_list(const std::vector<std::string>& v) { return json(v); }

json gradient_to_json(const TextualGradient& g) {
    json diagnoses = json::array();
    for (const auto& d : g.diagnoses)
        diagnoses.push_back(json{{"file", d.filename}, {"functions", d.functions}, {"analysis", d.analysis}});
    return json{{"kind", std::string(to_string(g.kind))}, {"diagnoses", diagnoses}, {"raw_text", g.raw_text}};
}

TextualGradient gradient_from_json(const json& j) {
    TextualGradient g;
    auto kind = j.at("kind").get<std::string>();
    if (kind == to_string(GradientKind::no_error))
        g.kind = GradientKind::no_error;
    else if (kind == to_string(GradientKind::wrong_test_code))
        g.kind = GradientKind::wrong_test_code;
    else if (kind == to_string(GradientKind::diagnoses))
        g.kind = GradientKind::diagnoses;
    else
        throw Error(ErrorCode::corrupt_snapshot, "unknown gradient kind: " + kind);
    for (const auto& d : j.at("diagnoses"))
        g.diagnoses.push_back(Diagnosis{d.at("file").get<std::string>(),
                                        d.at("functions").get<std::vector<std::string>>(),
                                        d.at("analysis").get<std::string>()});
    g.raw_text = j.at("raw_text").get<std::string>();
    return g;
}

json update_to_json(const UpdateReport& r) {
    json progress = json::array();
    for (const auto& p : r.progress)
        progress.push_back(json{{"requirement", p.requirement},
                                {"achieved", p.achieved},
                                {"double_checked", p.double_checked},
                                {"detail", p.detail}});
    return json{{"progress", progress}, {"draft", serialize_draft(r.draft)}};
}

UpdateReport update_from_json(const json& j) {
    UpdateReport r;
    for (const auto& p : j.at("progress"))
        r.progress.push_back(RequirementProgress{p.at("requirement").get<std::string>(), p.at("achieved").get<bool>(),
                                                 p.at("double_checked").get<bool>(),
                                                 p.at("detail").get<std::string>()});
    r.draft = parse_network_draft(j.at("draft").get<std::string>(), LabelKind::programmer, DraftOptions{1000});
    return r;
}

json trace_to_json(const ForwardTrace& t) {
    json arr = json::array();
    for (const auto& r : t.records)
        arr.push_back(json{{"node", r.node_id},
                           {"prompt_digest", r.prompt_digest},
                           {"reply_digest", r.reply_digest},
                           {"patched", r.patched_files},
                           {"rejected", r.rejected_files},
                           {"retries", r.retries}});
    return arr;
}

ForwardTrace trace_from_json(const json& j) {
    ForwardTrace t;
    for (const auto& r : j)
        t.records.push_back(NodeRecord{r.at("node").get<std::string>(), r.at("prompt_digest").get<std::string>(),
                                       r.at("reply_digest").get<std::string>(),
                                       r.at("patched").get<std::vector<std::string>>(),
                                       r.at("rejected").get<std::vector<std::string>>(), r.at("retries").get<int>()});
    return t;
}

json iteration_to_json(const IterationSnapshot& s) {
    const auto& fb = s.feedback;
    auto counts = fb.counts();
    json j;
    j["k"] = s.k;
    j["program"] = json_io::command_result_to_json(fb.program_result());
    j["reports"] = json_io::reports_to_json(fb.test_reports());
    j["logs"] = json_io::logs_to_json(fb.logs());
    j["counts"] = json{{"passed", counts.passed},
                       {"failed", counts.failed},
                       {"errors", counts.errors},
                       {"skipped", counts.skipped}};
    j["trace"] = trace_to_json(s.trace);
    j["code_origins"] = s.code.origin();
    j["test_origins"] = s.tests.origin();
    j["gradient"] = s.gradient ? gradient_to_json(*s.gradient) : json(nullptr);
    j["update"] = s.update_report ? update_to_json(*s.update_report) : json(nullptr);
    if (s.remediation) {
        j["remediation"] = json{{"flagged", string_list(s.remediation->flagged)},
                                {"regenerated_nodes", string_list(s.remediation->regenerated_nodes)},
                                {"dropped", string_list(s.remediation->dropped)},
                                {"next_test_origins", s.next_tests.origin()}};
    } else {
        j["remediation"] = nullptr;
    }
    return j;
}

json prompt_digests(const PromptLibrary& prompts) {
    json j = json::object();
    for (const auto& id : prompts.ids()) {
        const auto& t = prompts.get(id);
        std::string framed;
        append_netstring(framed, t.system_text);
        append_netstring(framed, t.body);
        j[id] = sha256_hex(framed);
    }
    return j;
}

/// Mutable state of a run in progress.
struct Session {
    EvolutionRun run;
    json prompts;
    std::vector<std::string> proxy_rejected;
    RecordingProvider* recorder = nullptr;
};

void write_manifest(const Session& s) {
    const auto& run = s.run;
    json m;
    m["format"] = std::string(kManifestFormat);
    m["task"] = json_io::task_to_json(run.task);
    m["config"] = json_io::config_to_json(run.config);
    m["prompts"] = s.prompts;
    m["termination"] = std::string(to_string(run.termination));
    m["failure"] = run.failure;
    m["proxy_generations"] = run.proxy_generations;
    m["proxy_rejected"] = s.proxy_rejected;
    m["provider_state"] = json_io::provider_state_to_json(s.recorder ? s.recorder->state() : ProviderState{});
    json iterations = json::array();
    for (const auto& snap : run.snapshots) iterations.push_back(iteration_to_json(snap));
    m["iterations"] = iterations;

    json files = json::object();
    for (const auto& [rel, digest] : tree_digests(run.run_dir)) {
        if (rel == kManifest) continue;
        auto k = iteration_of(rel);
        if (k && *k >= run.snapshots.size()) continue;
        files[rel] = digest;
    }
    m["files"] = files;

    auto tmp = run.run_dir / "manifest.tmp";
    write_text(tmp, json_io::dump(m));
    fs::rename(tmp, run.run_dir / kManifest);
}

void write_iteration(const fs::path& run_dir, const IterationSnapshot& s) {
    auto dir = run_dir / iter_dir(s.k);
    std::error_code ec;
    fs::remove_all(dir, ec);
    write_text(dir / "network.txt", serialize_network(s.network));
    write_workspace(dir / "code", s.code);
    write_workspace(dir / "tests", s.tests);
    write_text(dir / "feedback.txt", s.feedback.loss_text());
    if (s.gradient) write_text(dir / "gradient.txt", serialize_gradient(*s.gradient));
    if (s.update && s.update_report) write_text(dir / "update.txt", serialize_applied_update(*s.update, *s.update_report));
    if (s.remediation) write_workspace(dir / "remediated_tests", s.next_tests);
}

void persist(Session& s) {
    if (!s.run.snapshots.empty()) write_iteration(s.run.run_dir, s.run.snapshots.back());
    if (s.recorder) record_script(*s.recorder, s.run.run_dir / kScript);
    write_manifest(s);
}

// ---------------------------------------------------------------------------
// Loop

struct Cursor {
    std::size_t k = 0;
    MacNetwork network;
    Workspace seed;
    Workspace tests;
};

struct StageError {
    std::string stage;
    std::string message;
};

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw StageError{stage, std::string(to_string(e.code())) + ": " + e.what()};
    } catch (const std::exception& e) {
        throw StageError{stage, e.what()};
    }
}

CommandResult clean(CommandResult r) {
    r.stdout_text = json_io::valid_utf8(r.stdout_text);
    r.stderr_text = json_io::valid_utf8(r.stderr_text);
    r.duration = std::chrono::milliseconds(0);
    return r;
}

std::vector<TestReport> clean(std::vector<TestReport> reports) {
    for (auto& r : reports)
        for (auto& c : r.cases) c.message = json_io::valid_utf8(c.message);
    return reports;
}

std::vector<CapturedLog> clean(std::vector<CapturedLog> logs, std::size_t budget) {
    for (auto& l : logs) l.content = text::tail_bytes(json_io::valid_utf8(l.content), budget);
    return logs;
}

ExecutionFeedback execute(const EvolutionConfig& config, const Workspace& code, const Workspace& tests) {
    auto handle = materialize(code, tests, config.sandbox, true);
    CommandResult program;
    try {
        program = run_program(handle, config.entry_command);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::command_rejected) throw;
        program.exit_code = 127;
        program.stderr_text = std::string(e.what()) + "\n";
    }
    std::vector<std::string> suites;
    for (const auto& [name, _] : tests.files()) suites.push_back(name);
    auto reports = run_tests(handle, suites);
    auto logs = capture_logs(handle);
    return assemble_loss(clean(program), clean(reports), config.loss_budget, clean(logs, config.loss_budget));
}

/// Keeps the origins of files that came through unchanged from `before`.
Workspace carry_origins(const Workspace& after, const Workspace& before) {
    Workspace out;
    for (const auto& [name, content] : after.files()) {
        auto origin = after.origin().at(name);
        if (origin == kSeedOrigin && before.contains(name)) origin = before.origin().at(name);
        out.put(name, content, origin);
    }
    return out;
}

Remediation remediate(const AgentContext& ctx, Session& s, const Workspace& code, const Workspace& tests,
                      const TextualGradient& gradient, const EvolutionHooks& hooks, Workspace& next_tests) {
    const auto& config = s.run.config;
    Remediation r;
    for (const auto& [name, _] : tests.files()) {
        auto slash = name.rfind('/');
        auto base = slash == std::string::npos ? name : name.substr(slash + 1);
        if (gradient.raw_text.find(base) != std::string::npos) r.flagged.push_back(name);
    }
    if (config.wrong_test_policy == WrongTestPolicy::drop_suite) {
        next_tests = tests;
        for (const auto& f : r.flagged) next_tests.erase(f);
        r.dropped = r.flagged;
        return r;
    }
    if (!s.run.testing_network) throw Error(ErrorCode::run_failed, "testing network unavailable");
    const auto& net = *s.run.testing_network;

    std::set<std::string> nodes;
    bool identifiable = !r.flagged.empty();
    for (const auto& f : r.flagged) {
        const auto& origin = tests.origin().at(f);
        if (net.contains(origin))
            nodes.insert(origin);
        else
            identifiable = false;
    }

    ForwardOptions options;
    options.team = TeamKind::testing;
    options.tie_break = hooks.tie_break;
    options.reference = &code;
    if (identifiable) {
        Workspace seed = tests;
        for (const auto& f : r.flagged) seed.erase(f);
        options.only = &nodes;
        auto fr = forward(ctx, s.run.task, net, seed, options);
        next_tests = carry_origins(fr.workspace, seed);
        r.regenerated_nodes.assign(nodes.begin(), nodes.end());
    } else {
        auto fr = forward(ctx, s.run.task, net, {}, options);
        next_tests = std::move(fr.workspace);
        for (const auto& n : net.nodes()) r.regenerated_nodes.push_back(n.id);
        ++s.run.proxy_generations;
    }
    return r;
}

void run_loop(Session& s, Cursor cur, const AgentContext& ctx, const EvolutionHooks& hooks) {
    const auto& config = s.run.config;
    const auto& task = s.run.task;
    for (; cur.k < config.max_iterations; ++cur.k) {
        ForwardOptions options;
        options.tie_break = hooks.tie_break;
        auto fr = staged("forward", [&] { return forward(ctx, task, cur.network, cur.seed, options); });
        auto feedback = staged("environment", [&] { return execute(config, fr.workspace, cur.tests); });

        IterationSnapshot snap{cur.k, cur.network, fr.workspace, cur.tests, feedback, fr.trace,
                               std::nullopt, std::nullopt, std::nullopt, std::nullopt, cur.tests};
        Termination outcome = Termination::running;
        const bool passed = feedback.all_passed();
        if (passed && !config.confirm_with_gradient) {
            outcome = Termination::converged;
        } else {
            auto g = staged("gradient", [&] {
                return compute_gradient(ctx, GradientContext(task, snap.code, snap.tests, feedback)).gradient;
            });
            snap.gradient = g;
            if (passed && g.kind == GradientKind::no_error) {
                outcome = Termination::converged;
            } else if (cur.k + 1 == config.max_iterations) {
                outcome = Termination::budget_exhausted;
            } else if (g.kind == GradientKind::wrong_test_code) {
                Workspace next;
                snap.remediation =
                    staged("remediation", [&] { return remediate(ctx, s, snap.code, snap.tests, g, hooks, next); });
                snap.next_tests = std::move(next);
            } else if (g.kind == GradientKind::diagnoses) {
                auto report = staged("update", [&] {
                    return compute_update(ctx, task, cur.network, snap.code, feedback, g).report;
                });
                snap.update = staged("update", [&] { return apply_update(cur.network, report); });
                snap.update_report = std::move(report);
            }
        }

        s.run.snapshots.push_back(snap);
        s.run.final_workspace = snap.code;
        s.run.termination = outcome;
        staged("persist", [&] {
            persist(s);
            return 0;
        });
        if (hooks.after_iteration) hooks.after_iteration(s.run.snapshots.back());
        if (outcome != Termination::running) return;

        cur.network = snap.update ? snap.update->next : cur.network;
        cur.seed = snap.code;
        cur.tests = snap.next_tests;
    }
    // Only reachable with max_iterations lowered below the snapshots taken.
    s.run.termination = Termination::budget_exhausted;
    persist(s);
}

void fail_run(Session& s, const StageError& e) {
    s.run.termination = Termination::failed;
    s.run.failure = e.stage + ": " + e.message;
    try {
        if (s.recorder) record_script(*s.recorder, s.run.run_dir / kScript);
        write_manifest(s);
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::run_failed, s.run.failure);
}

bool is_empty_dir(const fs::path& dir) {
    std::error_code ec;
    if (!fs::exists(dir, ec)) return true;
    return fs::is_directory(dir, ec) && fs::directory_iterator(dir) == fs::directory_iterator();
}

EvolutionRun start(const TaskSpec& task, const EvolutionConfig& config, Provider& provider,
                   const PromptLibrary& prompts, const fs::path& run_dir, const EvolutionHooks& hooks) {
    RecordingProvider recorder(provider);
    recorder.restore(ProviderState{});
    Session s;
    s.run.task = task;
    s.run.config = config;
    s.run.run_dir = run_dir;
    s.prompts = prompt_digests(prompts);
    s.recorder = &recorder;
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create " + run_dir.string() + ": " + ec.message());
    persist(s);

    AgentContext ctx{recorder, prompts, config.agents};
    try {
        auto proxy = staged("proxy", [&] { return generate_target_proxy(ctx, task, hooks.tie_break); });
        s.run.testing_network = proxy.network;
        s.run.proxy_generations = 1;
        s.proxy_rejected = proxy.rejected;
        write_text(run_dir / kTestingNetwork, serialize_network(proxy.network));
        auto org = staged("organize", [&] { return self_organize(ctx, task, TeamKind::coding); });
        run_loop(s, Cursor{0, org.network, {}, proxy.tests}, ctx, hooks);
    } catch (const StageError& e) {
        fail_run(s, e);
    }
    return std::move(s.run);
}

// ---------------------------------------------------------------------------
// Loading

struct Loaded {
    EvolutionRun run;
    json manifest;
};

Loaded load(const fs::path& run_dir) {
    std::error_code ec;
    if (!fs::is_regular_file(run_dir / kManifest, ec))
        throw Error(ErrorCode::corrupt_snapshot, "no manifest in " + run_dir.string());
    json m;
    try {
        m = json::parse(read_text(run_dir / kManifest));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_snapshot, std::string("unreadable manifest: ") + e.what());
    }
    try {
        if (m.at("format").get<std::string>() != kManifestFormat)
            throw Error(ErrorCode::corrupt_snapshot, "unsupported manifest format");
        const auto& iterations = m.at("iterations");
        const auto& files = m.at("files");
        auto actual = tree_digests(run_dir);
        for (const auto& [rel, digest] : files.items()) {
            auto it = actual.find(rel);
            if (it == actual.end()) throw Error(ErrorCode::corrupt_snapshot, "missing file: " + rel);
            if (it->second != digest.get<std::string>())
                throw Error(ErrorCode::corrupt_snapshot, "digest mismatch: " + rel);
        }
        for (const auto& [rel, _] : actual) {
            if (rel == kManifest || files.contains(rel)) continue;
            auto k = iteration_of(rel);
            if (k && *k >= iterations.size()) continue; // left by an interrupted iteration
            throw Error(ErrorCode::corrupt_snapshot, "unexpected file: " + rel);
        }

        Loaded out;
        auto& run = out.run;
        run.run_dir = run_dir;
        run.task = json_io::task_from_json(m.at("task"));
        run.config = json_io::config_from_json(m.at("config"));
        run.termination = parse_termination(m.at("termination").get<std::string>());
        run.failure = m.at("failure").get<std::string>();
        run.proxy_generations = m.at("proxy_generations").get<std::size_t>();
        if (files.contains(kTestingNetwork))
            run.testing_network = deserialize_network(read_text(run_dir / kTestingNetwork), AgentRole::tester,
                                                      DraftOptions{1000});

        for (std::size_t k = 0; k < iterations.size(); ++k) {
            const auto& it = iterations[k];
            if (it.at("k").get<std::size_t>() != k) throw Error(ErrorCode::corrupt_snapshot, "iterations out of order");
            auto dir = run_dir / iter_dir(k);
            auto network = deserialize_network(read_text(dir / "network.txt"), AgentRole::coder, DraftOptions{1000});
            auto code = read_workspace(dir / "code", it.at("code_origins").get<std::map<std::string, std::string>>());
            auto tests = read_workspace(dir / "tests", it.at("test_origins").get<std::map<std::string, std::string>>());
            auto feedback = assemble_loss(json_io::command_result_from_json(it.at("program")),
                                          json_io::reports_from_json(it.at("reports")), run.config.loss_budget,
                                          json_io::logs_from_json(it.at("logs")));
            if (feedback.loss_text() != read_text(dir / "feedback.txt"))
                throw Error(ErrorCode::corrupt_snapshot, "feedback of iteration " + std::to_string(k) +
                                                             " does not match its recorded results");
            IterationSnapshot snap{k, network, code, tests, feedback, trace_from_json(it.at("trace")),
                                   std::nullopt, std::nullopt, std::nullopt, std::nullopt, tests};
            if (!it.at("gradient").is_null()) snap.gradient = gradient_from_json(it.at("gradient"));
            if (!it.at("update").is_null()) {
                snap.update_report = update_from_json(it.at("update"));
                snap.update = apply_update(network, *snap.update_report);
            }
            if (const auto& r = it.at("remediation"); !r.is_null()) {
                snap.remediation = Remediation{r.at("flagged").get<std::vector<std::string>>(),
                                               r.at("regenerated_nodes").get<std::vector<std::string>>(),
                                               r.at("dropped").get<std::vector<std::string>>()};
                snap.next_tests = read_workspace(dir / "remediated_tests",
                                                 r.at("next_test_origins").get<std::map<std::string, std::string>>());
            }
            run.final_workspace = snap.code;
            run.snapshots.push_back(std::move(snap));
        }
        out.manifest = std::move(m);
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_snapshot, std::string("malformed manifest: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::corrupt_snapshot) throw;
        throw Error(ErrorCode::corrupt_snapshot, std::string(to_string(e.code())) + ": " + e.what());
    }
}

} // namespace

std::map<std::string, std::string> tree_digests(const fs::path& root) {
    std::map<std::string, std::string> out;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) return out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        auto rel = fs::relative(entry.path(), root).generic_string();
        if (rel == "manifest.tmp") continue;
        out[rel] = sha256_hex(read_text(entry.path()));
    }
    return out;
}

EvolutionRun evolve(const TaskSpec& task, const EvolutionConfig& config, Provider& provider,
                    const PromptLibrary& prompts, const fs::path& run_dir, const EvolutionHooks& hooks) {
    validate(task);
    validate(config);
    if (!is_empty_dir(run_dir)) throw Error(ErrorCode::config_error, "run directory is not empty: " + run_dir.string());
    return start(task, config, provider, prompts, run_dir, hooks);
}

EvolutionRun load_run(const fs::path& run_dir) { return load(run_dir).run; }

EvolutionRun resume(const fs::path& run_dir, Provider& provider, const PromptLibrary& prompts,
                    const ResumeOptions& options) {
    auto loaded = load(run_dir);
    auto& run = loaded.run;
    if (run.termination == Termination::converged || run.termination == Termination::budget_exhausted) return run;
    if (options.work_parent) run.config.sandbox.work_parent = *options.work_parent;

    if (run.snapshots.empty()) {
        for (const auto& entry : fs::directory_iterator(run_dir)) fs::remove_all(entry.path());
        return start(run.task, run.config, provider, prompts, run_dir, options.hooks);
    }

    // Drop anything an interrupted iteration left behind.
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        auto k = iteration_of(entry.path().filename().string());
        if (k && *k >= run.snapshots.size()) fs::remove_all(entry.path());
    }

    std::vector<ScriptEntry> prior;
    if (fs::exists(run_dir / kScript)) prior = load_script(run_dir / kScript);
    RecordingProvider recorder(provider, std::move(prior));
    recorder.restore(json_io::provider_state_from_json(loaded.manifest.at("provider_state")));

    Session s;
    s.run = std::move(run);
    s.run.termination = Termination::running;
    s.run.failure.clear();
    s.prompts = prompt_digests(prompts);
    s.proxy_rejected = loaded.manifest.at("proxy_rejected").get<std::vector<std::string>>();
    s.recorder = &recorder;

    const auto& last = s.run.snapshots.back();
    Cursor cur{last.k + 1, last.update ? last.update->next : last.network, last.code, last.next_tests};
    AgentContext ctx{recorder, prompts, s.run.config.agents};
    try {
        if (cur.k >= s.run.config.max_iterations) {
            s.run.termination = Termination::budget_exhausted;
            persist(s);
        } else {
            run_loop(s, std::move(cur), ctx, options.hooks);
        }
    } catch (const StageError& e) {
        fail_run(s, e);
    }
    return std::move(s.run);
}

EvolutionRun replay(const fs::path& run_dir, const fs::path& out_dir, const PromptLibrary& prompts,
                    const ResumeOptions& options) {
    std::error_code ec;
    if (!fs::is_regular_file(run_dir / kManifest, ec))
        throw Error(ErrorCode::corrupt_snapshot, "no manifest in " + run_dir.string());
    if (!fs::is_regular_file(run_dir / kScript, ec))
        throw Error(ErrorCode::config_error, "run has no recorded script: " + run_dir.string());
    TaskSpec task;
    EvolutionConfig config;
    try {
        auto m = json::parse(read_text(run_dir / kManifest));
        task = json_io::task_from_json(m.at("task"));
        config = json_io::config_from_json(m.at("config"));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::corrupt_snapshot, std::string("malformed manifest: ") + e.what());
    }
    if (options.work_parent) config.sandbox.work_parent = *options.work_parent;

    ScriptedProvider provider(load_script(run_dir / kScript));
    EvolutionRun run;
    try {
        run = evolve(task, config, provider, prompts, out_dir, options.hooks);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::run_failed) throw;
        run = load_run(out_dir);
    }

    auto before = tree_digests(run_dir);
    auto after = tree_digests(out_dir);
    std::vector<std::string> differing;
    for (const auto& [rel, d] : before)
        if (auto it = after.find(rel); it == after.end() || it->second != d) differing.push_back(rel);
    for (const auto& [rel, _] : after)
        if (!before.count(rel)) differing.push_back(rel);
    if (!differing.empty()) {
        std::sort(differing.begin(), differing.end());
        throw Error(ErrorCode::digest_mismatch, "replay differs from the recorded run in: " + text::join(differing, ", "));
    }
    return run;
}

} // namespace evoloop
