#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "evoloop/error.hpp"
#include "evoloop/provider.hpp"

#include <algorithm>
#include <cstdlib>
#include <semaphore>
#include <thread>

namespace evoloop {

namespace {

thread_local int t_last_attempts = 0;

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string path;   // prefix, no trailing slash
};

Endpoint split_endpoint(const std::string& base) {
    auto scheme_end = base.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::config_error, "API base must include a scheme: " + base);
    auto path_start = base.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = base.substr(0, path_start);
    ep.path = path_start == std::string::npos ? "" : base.substr(path_start);
    while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
    return ep;
}

std::chrono::milliseconds backoff_for(const RetryPolicy& policy, int attempt) {
    auto delay = policy.initial_backoff;
    for (int i = 1; i < attempt && delay < policy.max_backoff; ++i) delay *= 2;
    return std::min(delay, policy.max_backoff);
}

} // namespace

LiveConfig LiveConfig::from_environment() {
    LiveConfig cfg;
    if (const char* base = std::getenv("EVOLOOP_API_BASE")) cfg.api_base = base;
    if (const char* key = std::getenv("EVOLOOP_API_KEY")) cfg.api_key = key;
    return cfg;
}

struct LiveProvider::Impl {
    explicit Impl(std::size_t slots) : gate(static_cast<std::ptrdiff_t>(std::max<std::size_t>(slots, 1))) {}
    std::counting_semaphore<256> gate;
};

LiveProvider::LiveProvider(LiveConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(std::min<std::size_t>(config_.parallelism, 256))) {
    if (config_.retry.max_attempts < 1) config_.retry.max_attempts = 1;
}

LiveProvider::~LiveProvider() = default;

int LiveProvider::last_attempts() { return t_last_attempts; }

ChatResponse LiveProvider::complete(const ChatRequest& req) {
    if (req.user_text.empty()) throw Error(ErrorCode::config_error, "chat request has empty user text");
    auto ep = split_endpoint(config_.api_base);

    nlohmann::json body;
    body["model"] = req.model_name.empty() ? config_.model : req.model_name;
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_output_tokens;
    body["messages"] = nlohmann::json::array();
    if (!req.system_text.empty()) body["messages"].push_back({{"role", "system"}, {"content", req.system_text}});
    body["messages"].push_back({{"role", "user"}, {"content", req.user_text}});
    const auto payload = body.dump();

    impl_->gate.acquire();
    struct Release {
        std::counting_semaphore<256>& s;
        ~Release() { s.release(); }
    } release{impl_->gate};

    t_last_attempts = 0;
    std::string last_error;
    ErrorCode last_code = ErrorCode::transport_error;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        t_last_attempts = attempt;
        httplib::Client client(ep.origin);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        httplib::Headers headers;
        if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

        auto started = std::chrono::steady_clock::now();
        auto res = client.Post(ep.path + "/chat/completions", headers, payload, "application/json");
        auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

        std::chrono::milliseconds wait = backoff_for(config_.retry, attempt);
        if (!res) {
            last_code = ErrorCode::transport_error;
            last_error = "transport failure: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw Error(ErrorCode::auth_error, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
        } else if (res->status == 429) {
            last_code = ErrorCode::rate_limited;
            last_error = "rate limited (HTTP 429)";
            if (res->has_header("Retry-After")) {
                try {
                    wait = std::chrono::milliseconds(
                        static_cast<std::int64_t>(std::stod(res->get_header_value("Retry-After")) * 1000));
                } catch (const std::exception&) {
                }
            }
            wait = std::clamp(wait, std::chrono::milliseconds{0}, config_.retry.max_rate_limit_wait);
        } else if (res->status >= 500) {
            last_code = ErrorCode::transport_error;
            last_error = "server error (HTTP " + std::to_string(res->status) + ")";
        } else if (res->status != 200) {
            throw Error(ErrorCode::transport_error, "unexpected HTTP " + std::to_string(res->status) + ": " + res->body);
        } else {
            auto json = nlohmann::json::parse(res->body, nullptr, false);
            if (json.is_discarded() || !json.contains("choices") || json["choices"].empty())
                throw Error(ErrorCode::transport_error, "response is not a chat completion");
            const auto& message = json["choices"][0]["message"];
            if (!message.contains("content") || !message["content"].is_string())
                throw Error(ErrorCode::transport_error, "chat completion has no text content");
            ChatResponse out;
            out.text = message["content"].get<std::string>();
            out.latency = latency;
            if (json.contains("usage")) {
                out.usage.prompt = json["usage"].value("prompt_tokens", std::int64_t{0});
                out.usage.completion = json["usage"].value("completion_tokens", std::int64_t{0});
            }
            return out;
        }
        if (attempt < config_.retry.max_attempts) std::this_thread::sleep_for(wait);
    }
    throw Error(last_code, last_error + " after " + std::to_string(config_.retry.max_attempts) + " attempts");
}

} // namespace evoloop
