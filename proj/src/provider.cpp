#include "evoloop/provider.hpp"

#include "evoloop/digest.hpp"
#include "evoloop/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace evoloop {

ChatRequest make_request(const RenderedPrompt& prompt) {
    ChatRequest req;
    req.template_id = prompt.template_id;
    req.bindings = prompt.placeholder_bindings;
    for (const auto& [k, v] : prompt.extra_sections) req.bindings["+" + k] = v;
    req.system_text = prompt.system_text;
    req.user_text = prompt.user_text;
    return req;
}

std::string request_digest(const ChatRequest& req) {
    std::string canonical;
    append_netstring(canonical, req.template_id);
    // std::map iterates in key order, which is the canonical order.
    for (const auto& [k, v] : req.bindings) {
        append_netstring(canonical, k);
        append_netstring(canonical, v);
    }
    return sha256_hex(canonical);
}

// ---------------------------------------------------------------------------
// Script file

namespace {

constexpr std::string_view kScriptMagic = "evoloop-script 1";

[[noreturn]] void bad_script(const std::string& why) {
    throw Error(ErrorCode::script_format, "malformed script: " + why);
}

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) bad_script("bad number '" + std::string(s) + "'");
    return v;
}

bool is_hex_digest(std::string_view s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

} // namespace

std::string serialize_script(const std::vector<ScriptEntry>& entries) {
    std::string out(kScriptMagic);
    out += '\n';
    for (const auto& e : entries) {
        if (e.key.kind == ScriptKey::Kind::sequence)
            out += "seq " + std::to_string(e.key.index);
        else
            out += "digest " + e.key.digest + " " + std::to_string(e.key.index);
        out += " " + std::to_string(e.response.size()) + "\n";
        out += e.response;
        out += '\n';
    }
    return out;
}

std::vector<ScriptEntry> parse_script(std::string_view data) {
    auto nl = data.find('\n');
    if (nl == std::string_view::npos || data.substr(0, nl) != kScriptMagic) bad_script("missing header");
    std::size_t pos = nl + 1;
    std::vector<ScriptEntry> entries;
    std::set<ScriptKey> seen;
    while (pos < data.size()) {
        auto eol = data.find('\n', pos);
        if (eol == std::string_view::npos) bad_script("truncated record header");
        std::vector<std::string_view> fields;
        std::string_view header = data.substr(pos, eol - pos);
        for (std::size_t start = 0; start <= header.size();) {
            auto sp = header.find(' ', start);
            fields.push_back(header.substr(start, sp == std::string_view::npos ? header.npos : sp - start));
            if (sp == std::string_view::npos) break;
            start = sp + 1;
        }
        ScriptEntry e;
        std::uint64_t len = 0;
        if (fields.size() == 3 && fields[0] == "seq") {
            e.key = ScriptKey::seq(parse_u64(fields[1]));
            len = parse_u64(fields[2]);
        } else if (fields.size() == 4 && fields[0] == "digest") {
            if (!is_hex_digest(fields[1])) bad_script("bad digest '" + std::string(fields[1]) + "'");
            e.key = ScriptKey::of(std::string(fields[1]), parse_u64(fields[2]));
            len = parse_u64(fields[3]);
        } else {
            bad_script("bad record header '" + std::string(header) + "'");
        }
        pos = eol + 1;
        if (data.size() - pos < len + 1 || data[pos + len] != '\n') bad_script("truncated response body");
        e.response = std::string(data.substr(pos, len));
        pos += len + 1;
        if (!seen.insert(e.key).second) bad_script("duplicate key");
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot read script " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_script(ss.str());
}

void save_script(const std::filesystem::path& path, const std::vector<ScriptEntry>& entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write script " + path.string());
    out << serialize_script(entries);
    if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedProvider::ScriptedProvider(std::vector<ScriptEntry> entries) {
    for (auto& e : entries) {
        if (e.key.kind == ScriptKey::Kind::sequence) has_sequence_entries_ = true;
        if (!entries_.emplace(e.key, std::move(e.response)).second)
            throw Error(ErrorCode::script_format, "duplicate script key");
    }
}

ChatResponse ScriptedProvider::complete(const ChatRequest& req) {
    auto digest = request_digest(req);
    std::lock_guard lock(mutex_);
    auto occurrence = state_.occurrences[digest];
    const std::string* found = nullptr;

    if (auto it = entries_.find(ScriptKey::of(digest, occurrence)); it != entries_.end()) {
        found = &it->second;
    } else {
        // Latest earlier occurrence of the same request: identical inputs.
        auto it2 = entries_.lower_bound(ScriptKey::of(digest, occurrence));
        if (it2 != entries_.begin()) {
            --it2;
            if (it2->first.kind == ScriptKey::Kind::digest && it2->first.digest == digest) found = &it2->second;
        }
    }
    if (!found)
        if (auto it = entries_.find(ScriptKey::seq(state_.calls)); it != entries_.end()) found = &it->second;
    if (!found)
        throw Error(ErrorCode::script_miss, "no script entry for request digest " + digest + " (template " +
                                                req.template_id + ", occurrence " + std::to_string(occurrence) +
                                                ", call #" + std::to_string(state_.calls) + ")");
    ++state_.calls;
    ++state_.occurrences[digest];
    return ChatResponse{*found, {0, 0}, std::chrono::milliseconds{0}};
}

ProviderState ScriptedProvider::state() const {
    std::lock_guard lock(mutex_);
    return state_;
}

void ScriptedProvider::restore(const ProviderState& state) {
    std::lock_guard lock(mutex_);
    state_ = state;
}

// ---------------------------------------------------------------------------
// Recording

RecordingProvider::RecordingProvider(Provider& inner, std::vector<ScriptEntry> prior)
    : inner_(inner), entries_(std::move(prior)) {}

ChatResponse RecordingProvider::complete(const ChatRequest& req) {
    auto digest = request_digest(req);
    auto response = inner_.complete(req);
    std::lock_guard lock(mutex_);
    auto occurrence = state_.occurrences[digest]++;
    ++state_.calls;
    auto key = ScriptKey::of(digest, occurrence);
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const ScriptEntry& e) { return e.key == key; });
    if (it != entries_.end())
        it->response = response.text;
    else
        entries_.push_back(ScriptEntry{key, response.text});
    return response;
}

ProviderState RecordingProvider::state() const {
    std::lock_guard lock(mutex_);
    return state_;
}

void RecordingProvider::restore(const ProviderState& state) {
    inner_.restore(state);
    std::lock_guard lock(mutex_);
    state_ = state;
}

std::vector<ScriptEntry> RecordingProvider::entries() const {
    std::lock_guard lock(mutex_);
    auto out = entries_;
    std::sort(out.begin(), out.end(), [](const ScriptEntry& a, const ScriptEntry& b) { return a.key < b.key; });
    return out;
}

void record_script(const RecordingProvider& recorder, const std::filesystem::path& path) {
    save_script(path, recorder.entries());
}

} // namespace evoloop
