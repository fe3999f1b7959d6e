#pragma once

#include "evoloop/prompts.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace evoloop {

struct ChatRequest {
    std::string template_id;
    /// Placeholder bindings plus appended sections; the request identity.
    Bindings bindings;
    std::string system_text;
    std::string user_text;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 4096;
};

/// Built from a rendered prompt; placeholder keys and section keys share
/// one map, sections prefixed with '+'.
ChatRequest make_request(const RenderedPrompt& prompt);

struct TokenUsage {
    std::int64_t prompt = 0;
    std::int64_t completion = 0;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
    std::chrono::milliseconds latency{0};
};

/// Stable identity of a request: SHA-256 over the template id and the
/// key-sorted bindings. Insertion order never matters.
std::string request_digest(const ChatRequest& req);

/// Call counters that must survive a process restart for replay.
struct ProviderState {
    std::uint64_t calls = 0;
    std::map<std::string, std::uint64_t> occurrences;

    friend bool operator==(const ProviderState&, const ProviderState&) = default;
};

class Provider {
public:
    virtual ~Provider() = default;

    virtual ChatResponse complete(const ChatRequest& req) = 0;

    /// True when concurrent calls produce the same answers as serial ones.
    virtual bool order_independent() const { return true; }
    virtual std::size_t parallelism() const { return 1; }

    virtual ProviderState state() const { return {}; }
    virtual void restore(const ProviderState&) {}
};

// ---------------------------------------------------------------------------
// Scripts

struct ScriptKey {
    enum class Kind { sequence, digest };
    Kind kind = Kind::sequence;
    std::string digest;
    std::uint64_t index = 0; // sequence position, or digest occurrence

    static ScriptKey seq(std::uint64_t i) { return {Kind::sequence, {}, i}; }
    static ScriptKey of(std::string digest, std::uint64_t occurrence = 0) {
        return {Kind::digest, std::move(digest), occurrence};
    }

    friend auto operator<=>(const ScriptKey&, const ScriptKey&) = default;
};

struct ScriptEntry {
    ScriptKey key;
    std::string response;

    friend bool operator==(const ScriptEntry&, const ScriptEntry&) = default;
};

/// Format (see docs/script-format.md):
///   evoloop-script 1\n
///   then per entry: "seq <n> <len>\n" or "digest <hex> <occ> <len>\n",
///   followed by exactly <len> response bytes and "\n".
std::string serialize_script(const std::vector<ScriptEntry>& entries);
std::vector<ScriptEntry> parse_script(std::string_view data);
std::vector<ScriptEntry> load_script(const std::filesystem::path& path);
void save_script(const std::filesystem::path& path, const std::vector<ScriptEntry>& entries);

/// Deterministic stand-in for a model. Lookup order for the n-th call
/// carrying digest d: (d, n); else the latest (d, m < n); else the entry at
/// the global call index. Anything else is a ScriptMiss.
class ScriptedProvider final : public Provider {
public:
    explicit ScriptedProvider(std::vector<ScriptEntry> entries);

    ChatResponse complete(const ChatRequest& req) override;

    bool order_independent() const override { return !has_sequence_entries_; }
    std::size_t parallelism() const override { return 4; }

    ProviderState state() const override;
    void restore(const ProviderState& state) override;

private:
    std::map<ScriptKey, std::string> entries_;
    bool has_sequence_entries_ = false;
    mutable std::mutex mutex_;
    ProviderState state_;
};

/// Decorator that records every (digest, occurrence, response) it forwards.
class RecordingProvider final : public Provider {
public:
    explicit RecordingProvider(Provider& inner, std::vector<ScriptEntry> prior = {});

    ChatResponse complete(const ChatRequest& req) override;

    bool order_independent() const override { return inner_.order_independent(); }
    std::size_t parallelism() const override { return inner_.parallelism(); }
    ProviderState state() const override;
    void restore(const ProviderState& state) override;

    std::vector<ScriptEntry> entries() const;

private:
    Provider& inner_;
    mutable std::mutex mutex_;
    std::vector<ScriptEntry> entries_;
    ProviderState state_;
};

/// Writes the recorded exchanges of a run as a replayable script.
void record_script(const RecordingProvider& recorder, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Live HTTP

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds max_backoff{8000};
    /// Upper bound on any Retry-After wait.
    std::chrono::milliseconds max_rate_limit_wait{30000};
};

struct LiveConfig {
    std::string api_base;          // e.g. https://api.openai.com/v1
    std::string api_key;
    std::string model = "gpt-4o-mini";
    RetryPolicy retry;
    std::chrono::seconds timeout{120};
    std::size_t parallelism = 4;

    /// Reads EVOLOOP_API_BASE and EVOLOOP_API_KEY.
    static LiveConfig from_environment();
};

/// Chat-completion client. Transport failures, 5xx, and 429 are retried with
/// capped exponential backoff; 401/403 fail immediately.
class LiveProvider final : public Provider {
public:
    explicit LiveProvider(LiveConfig config);
    ~LiveProvider() override;

    ChatResponse complete(const ChatRequest& req) override;
    std::size_t parallelism() const override { return config_.parallelism; }

    /// Attempts made by the most recent complete() on this thread.
    static int last_attempts();

private:
    struct Impl;
    LiveConfig config_;
    std::unique_ptr<Impl> impl_;
};

} // namespace evoloop
