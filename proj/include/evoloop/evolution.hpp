#pragma once

#include "evoloop/backprop.hpp"
#include "evoloop/feedback.hpp"
#include "evoloop/forward.hpp"
#include "evoloop/graph.hpp"
#include "evoloop/prompts.hpp"
#include "evoloop/provider.hpp"
#include "evoloop/sandbox.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace evoloop {

enum class WrongTestPolicy { regenerate_suite, drop_suite };
enum class Termination { running, converged, budget_exhausted, failed };

std::string_view to_string(WrongTestPolicy policy);
std::string_view to_string(Termination termination);
WrongTestPolicy parse_wrong_test_policy(std::string_view s);
Termination parse_termination(std::string_view s);

struct EvolutionConfig {
    std::size_t max_iterations = 4;
    /// When set, passing tests also need a "No error in codes." gradient
    /// before the run counts as converged.
    bool confirm_with_gradient = false;
    WrongTestPolicy wrong_test_policy = WrongTestPolicy::regenerate_suite;
    std::vector<std::string> entry_command{"python3", "main.py"};
    std::size_t loss_budget = kDefaultLossBudget;
    AgentSettings agents;
    SandboxConfig sandbox;

    friend bool operator==(const EvolutionConfig&, const EvolutionConfig&);
};

/// Throws ConfigError.
void validate(const EvolutionConfig& config);

struct Remediation {
    /// Suites named by the gradient (empty when none could be identified).
    std::vector<std::string> flagged;
    /// Testing nodes re-run; every node when the whole team was re-run.
    std::vector<std::string> regenerated_nodes;
    std::vector<std::string> dropped;
};

struct IterationSnapshot {
    std::size_t k = 0;
    MacNetwork network;
    Workspace code;
    Workspace tests;
    ExecutionFeedback feedback;
    ForwardTrace trace;
    std::optional<TextualGradient> gradient;
    std::optional<UpdateReport> update_report;
    std::optional<AppliedUpdate> update;
    std::optional<Remediation> remediation;
    /// Tests the next iteration runs against.
    Workspace next_tests;
};

struct EvolutionRun {
    TaskSpec task;
    EvolutionConfig config;
    std::filesystem::path run_dir;
    std::optional<MacNetwork> testing_network;
    std::vector<IterationSnapshot> snapshots;
    Workspace final_workspace;
    Termination termination = Termination::running;
    std::string failure;
    /// Times the testing team produced a full proxy.
    std::size_t proxy_generations = 0;
};

struct EvolutionHooks {
    /// Called after each iteration is persisted. An exception thrown here
    /// stops the run and propagates without marking it failed.
    std::function<void(const IterationSnapshot&)> after_iteration;
    TieBreak tie_break;
};

/// Testing team: organize, then one forward pass. Only files carrying the
/// test prefix are kept.
struct TargetProxy {
    MacNetwork network;
    Workspace tests;
    std::vector<std::string> rejected;
};
TargetProxy generate_target_proxy(const AgentContext& ctx, const TaskSpec& task, const TieBreak& tie_break = {});

/// Runs the self-evolving loop into `run_dir` (absent or empty). Throws
/// RunFailed after persisting completed iterations.
EvolutionRun evolve(const TaskSpec& task, const EvolutionConfig& config, Provider& provider,
                    const PromptLibrary& prompts, const std::filesystem::path& run_dir,
                    const EvolutionHooks& hooks = {});

/// Reads and verifies a run directory. Throws CorruptSnapshot.
EvolutionRun load_run(const std::filesystem::path& run_dir);

struct ResumeOptions {
    /// Where new sandbox roots go; the stored config is used otherwise.
    std::optional<std::filesystem::path> work_parent;
    EvolutionHooks hooks;
};

/// Continues a run after its last completed iteration. Finished runs are
/// returned unchanged; a run with no completed iteration starts over.
EvolutionRun resume(const std::filesystem::path& run_dir, Provider& provider, const PromptLibrary& prompts,
                    const ResumeOptions& options = {});

/// Re-executes a run from its recorded script into `out_dir` and compares
/// both trees file by file. Throws DigestMismatch listing the differing
/// files, or ConfigError when the run has no script.
EvolutionRun replay(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                    const PromptLibrary& prompts, const ResumeOptions& options = {});

/// Files of a run directory (manifest included) with their SHA-256 digests.
std::map<std::string, std::string> tree_digests(const std::filesystem::path& root);

} // namespace evoloop
