// evoloop command-line interface: run | inspect | replay | report.

#include "evoloop/config.hpp"
#include "evoloop/error.hpp"
#include "evoloop/evolution.hpp"
#include "evoloop/metrics.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace evoloop;

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBudget = 2;

int fail(const std::string& what) {
    std::cerr << "evoloop: " << what << "\n";
    return kExitFailure;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string pass_rate(const EvolutionRun& run) {
    if (run.snapshots.empty()) return "0/0";
    auto t = run.snapshots.back().feedback.counts();
    return std::to_string(t.passed) + "/" + std::to_string(t.total());
}

void print_accuracy(const EvolutionRun& run, const std::optional<fs::path>& bindings) {
    if (!bindings) {
        std::cout << "accuracy: no requirements bound\n";
        return;
    }
    auto acc = compute_accuracy(load_bindings(*bindings), final_reports(run));
    std::cout << "accuracy: " << (acc.requirements.empty() ? "no requirements bound" : acc.overall.describe()) << "\n";
}

int exit_code_for(Termination t) {
    if (t == Termination::converged) return kExitConverged;
    if (t == Termination::budget_exhausted) return kExitBudget;
    return kExitFailure;
}

struct RunArgs {
    std::string config;
    std::string out;
    std::string bindings;
    std::string work_dir;
    std::size_t max_iterations = 0;
};

int cmd_run(const RunArgs& a) {
    auto config = load_run_config(a.config);
    if (a.max_iterations > 0) config.evolution.max_iterations = a.max_iterations;
    if (!a.bindings.empty()) config.bindings = fs::path(a.bindings);
    if (!a.work_dir.empty()) config.evolution.sandbox.work_parent = fs::path(a.work_dir);
    std::error_code ec;
    if (fs::exists(a.out, ec) && !(fs::is_directory(a.out, ec) && fs::is_empty(a.out, ec)))
        return fail("output directory is not empty: " + a.out);

    auto provider = make_provider(config);
    auto prompts = make_prompt_library(config);
    EvolutionRun run;
    try {
        run = evolve(config.task, config.evolution, *provider, prompts, a.out);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::run_failed) throw;
        std::cerr << "evoloop: run failed at " << e.what() << "\n";
        std::cerr << "evoloop: completed iterations remain in " << a.out << "\n";
        return kExitFailure;
    }
    std::cout << "termination: " << to_string(run.termination) << "\n";
    std::cout << "iterations: " << run.snapshots.size() << "\n";
    std::cout << "final pass rate: " << pass_rate(run) << "\n";
    print_accuracy(run, config.bindings);
    return exit_code_for(run.termination);
}

int cmd_inspect(const std::string& dir, std::size_t k) {
    auto run = load_run(dir);
    if (k >= run.snapshots.size())
        throw Error(ErrorCode::missing_iteration, "iteration " + std::to_string(k) + " not in run (" +
                                                      std::to_string(run.snapshots.size()) + " completed)");
    const auto& s = run.snapshots[k];
    std::cout << read_file(fs::path(dir) / ("iter_" + std::to_string(k)) / "network.txt");
    auto t = s.feedback.counts();
    std::cout << "\ntests: " << t.passed << " passed, " << t.failed << " failed, " << t.errors << " errors, "
              << t.skipped << " skipped\n";
    if (!s.gradient) {
        std::cout << "gradient: none\n";
    } else {
        std::cout << "gradient: " << to_string(s.gradient->kind) << "\n";
        for (const auto& d : s.gradient->diagnoses) {
            std::cout << "  " << d.filename;
            if (!d.functions.empty()) {
                std::cout << " (";
                for (std::size_t i = 0; i < d.functions.size(); ++i) std::cout << (i ? ", " : "") << d.functions[i];
                std::cout << ")";
            }
            std::cout << "\n";
        }
    }
    if (s.update) {
        std::cout << "update: " << s.update->removed.size() << " removed, " << s.update->added.size() << " added, "
                  << s.update->rewritten.size() << " rewritten\n";
    }
    return 0;
}

int cmd_replay(const std::string& dir, const std::string& out, const std::string& work_dir) {
    ResumeOptions options;
    if (!work_dir.empty()) options.work_parent = fs::path(work_dir);
    auto run = replay(dir, out, PromptLibrary::builtin(), options);
    std::cout << "replay identical: " << to_string(run.termination) << " after " << run.snapshots.size()
              << " iterations\n";
    return 0;
}

int cmd_report(const std::string& dir, const std::string& bindings, const std::string& format) {
    auto run = load_run(dir);
    AccuracyReport acc;
    if (!bindings.empty()) acc = compute_accuracy(load_bindings(bindings), final_reports(run));
    std::cout << render_report(run, acc, format == "json" ? ReportFormat::structured : ReportFormat::text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-evolving multi-agent code generation"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run the evolution loop");
    run->add_option("--config", run_args.config, "Run config (JSON)")->required();
    run->add_option("--out", run_args.out, "Run directory (absent or empty)")->required();
    run->add_option("--bindings", run_args.bindings, "Requirement bindings (JSON)");
    run->add_option("--max-iterations", run_args.max_iterations, "Override the iteration budget");
    run->add_option("--work-dir", run_args.work_dir, "Parent directory for sandbox roots");

    std::string inspect_dir;
    std::size_t inspect_k = 0;
    auto* inspect = app.add_subcommand("inspect", "Show one iteration of a run");
    inspect->add_option("run", inspect_dir, "Run directory")->required();
    inspect->add_option("k", inspect_k, "Iteration")->required();

    std::string replay_dir, replay_out, replay_work;
    auto* rep = app.add_subcommand("replay", "Re-execute a run from its script and compare");
    rep->add_option("run", replay_dir, "Run directory")->required();
    rep->add_option("--out", replay_out, "Directory for the re-executed run")->required();
    rep->add_option("--work-dir", replay_work, "Parent directory for sandbox roots");

    std::string report_dir, report_bindings, report_format = "text";
    auto* report = app.add_subcommand("report", "Summarize a run");
    report->add_option("run", report_dir, "Run directory")->required();
    report->add_option("--bindings", report_bindings, "Requirement bindings (JSON)");
    report->add_option("--format", report_format, "text or json")->check(CLI::IsMember({"text", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitFailure;
    }

    try {
        if (*run) return cmd_run(run_args);
        if (*inspect) return cmd_inspect(inspect_dir, inspect_k);
        if (*rep) return cmd_replay(replay_dir, replay_out, replay_work);
        if (*report) return cmd_report(report_dir, report_bindings, report_format);
    } catch (const Error& e) {
        return fail(std::string(to_string(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    return kExitFailure;
}
