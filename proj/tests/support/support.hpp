#pragma once

#include "evoloop/evolution.hpp"
#include "evoloop/graph.hpp"
#include "evoloop/provider.hpp"
#include "evoloop/sandbox.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace support {

namespace fs = std::filesystem;

/// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

/// Answers through a callback and logs every request.
class FnProvider final : public evoloop::Provider {
public:
    using Fn = std::function<std::string(const evoloop::ChatRequest&, int)>;
    FnProvider(Fn fn, bool order_independent = true, std::size_t parallelism = 1)
        : fn_(std::move(fn)), independent_(order_independent), parallelism_(parallelism) {}

    evoloop::ChatResponse complete(const evoloop::ChatRequest& req) override {
        int n;
        {
            std::lock_guard lock(mutex_);
            n = static_cast<int>(requests_.size());
            requests_.push_back(req);
        }
        return evoloop::ChatResponse{fn_(req, n), {}, {}};
    }
    bool order_independent() const override { return independent_; }
    std::size_t parallelism() const override { return parallelism_; }

    std::vector<evoloop::ChatRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }
    /// Requests whose subtask binding equals `subtask`.
    std::vector<evoloop::ChatRequest> for_subtask(const std::string& subtask) const {
        std::vector<evoloop::ChatRequest> out;
        for (const auto& r : requests())
            if (auto it = r.bindings.find("subtask"); it != r.bindings.end() && it->second == subtask) out.push_back(r);
        return out;
    }

private:
    Fn fn_;
    bool independent_;
    std::size_t parallelism_;
    mutable std::mutex mutex_;
    std::vector<evoloop::ChatRequest> requests_;
};

std::string fake_runner_path();

/// Sandbox settings that run suites through the fake runner.
evoloop::SandboxConfig sandbox_config(const fs::path& work_parent);

/// "<name>\n```<lang>\n<body>\n```\n"
std::string fenced_file(const std::string& name, const std::string& body, const std::string& lang = "python");

std::string network_reply(const std::string& prefix, const std::vector<std::pair<std::string, std::string>>& composition,
                          const std::vector<std::pair<std::string, std::string>>& workflow);

// The calculator fixture: iteration 0 implements add only (1 of 2 tests
// fails), the update adds a programmer for sub, iteration 1 passes.
evoloop::TaskSpec calc_task();
std::vector<evoloop::ScriptEntry> calc_script();
evoloop::EvolutionConfig calc_config(const fs::path& work_parent);
std::string calc_test_suite();
std::string calc_main_add_only();
std::string calc_main_full();

// Random inputs.
using Rng = std::mt19937_64;

std::string random_description(Rng& rng);
/// Acyclic draft with 1..max_nodes nodes; edges only point from earlier to
/// later entries of a hidden permutation.
evoloop::NetworkDraft random_draft(Rng& rng, std::size_t max_nodes, evoloop::LabelKind kind);

struct Digraph {
    std::vector<std::string> ids;
    std::set<std::pair<std::string, std::string>> edges;
};
/// Arbitrary digraph without self-loops; may contain cycles.
Digraph random_digraph(Rng& rng, std::size_t max_nodes);

/// Reference cycle check: recursive three-color DFS.
bool oracle_has_cycle(const Digraph& g);

} // namespace support
