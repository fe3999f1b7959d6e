#include "evoloop/workspace.hpp"

#include "evoloop/error.hpp"
#include "evoloop/parsers.hpp"
#include "evoloop/text.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <set>

namespace evoloop {

void Workspace::put(const std::string& filename, std::string content, std::string origin) {
    if (!is_safe_filename(filename)) throw Error(ErrorCode::unsafe_filename, "unsafe filename: " + filename);
    files_[filename] = std::move(content);
    origin_[filename] = std::move(origin);
}

void Workspace::erase(const std::string& filename) {
    files_.erase(filename);
    origin_.erase(filename);
}

std::optional<std::string_view> Workspace::get(const std::string& filename) const {
    auto it = files_.find(filename);
    if (it == files_.end()) return std::nullopt;
    return std::string_view(it->second);
}

Workspace Workspace::as_seed() const {
    Workspace out = *this;
    for (auto& [name, who] : out.origin_) who = kSeedOrigin;
    return out;
}

std::string extension_for(std::string_view language) {
    auto l = text::to_lower(text::trim(language));
    if (l == "python" || l == "python3" || l.empty()) return "py";
    if (l == "javascript" || l == "js") return "js";
    if (l == "typescript" || l == "ts") return "ts";
    if (l == "c++" || l == "cpp") return "cpp";
    if (l == "c") return "c";
    if (l == "java") return "java";
    if (l == "go") return "go";
    if (l == "rust") return "rs";
    if (l == "html" || l == "website") return "html";
    return l;
}

namespace {

std::string extension_of(const std::string& name) {
    auto dot = name.rfind('.');
    return dot == std::string::npos ? std::string() : name.substr(dot + 1);
}

} // namespace

std::string workspace_listing(const Workspace& ws, std::size_t budget) {
    const auto& files = ws.files();
    std::size_t overhead = 0;
    std::size_t total = 0;
    std::vector<std::size_t> sizes;
    for (const auto& [name, content] : files) {
        overhead += 2 * name.size() + 16;
        total += content.size();
        sizes.push_back(content.size());
    }
    std::size_t content_budget = budget > overhead ? budget - overhead : 0;

    std::size_t cap = SIZE_MAX;
    if (total > content_budget) {
        std::sort(sizes.begin(), sizes.end());
        std::size_t used = 0;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            std::size_t remaining = sizes.size() - i;
            std::size_t even = (content_budget - used) / remaining;
            if (sizes[i] > even) {
                cap = even;
                break;
            }
            used += sizes[i];
        }
    }

    std::string out;
    for (const auto& [name, content] : files) {
        out += name + "\n```" + extension_of(name) + "\n";
        if (content.size() > cap) {
            out += text::head_bytes(content, cap);
            out += "\n... [truncated " + std::to_string(content.size() - cap) + " bytes]";
        } else {
            out += content;
        }
        out += "\n```\n\n";
    }
    return out;
}

namespace {

// Modules a Python file may import without the workspace providing them.
const std::set<std::string, std::less<>>& known_python_modules() {
    static const std::set<std::string, std::less<>> names = {
        "__future__", "abc", "argparse", "array", "ast", "asyncio", "base64", "bisect", "builtins",
        "calendar", "cmath", "collections", "colorsys", "concurrent", "contextlib", "copy", "csv",
        "ctypes", "dataclasses", "datetime", "decimal", "difflib", "enum", "errno", "fractions",
        "functools", "gc", "glob", "hashlib", "heapq", "hmac", "html", "http", "importlib",
        "inspect", "io", "itertools", "json", "logging", "math", "multiprocessing", "operator",
        "os", "pathlib", "pickle", "platform", "pprint", "queue", "random", "re", "secrets",
        "select", "shlex", "shutil", "signal", "socket", "sqlite3", "statistics", "string",
        "struct", "subprocess", "sys", "tempfile", "textwrap", "threading", "time", "timeit",
        "tkinter", "traceback", "turtle", "types", "typing", "unittest", "urllib", "uuid",
        "warnings", "weakref", "xml", "zipfile", "zlib",
        // common third-party
        "flask", "numpy", "pandas", "pygame", "pytest", "requests", "PIL",
    };
    return names;
}

} // namespace

std::vector<std::string> unimplemented_files(const Workspace& ws) {
    static const std::regex py_import(R"(^\s*import\s+([A-Za-z_][\w\.]*(?:\s*,\s*[A-Za-z_][\w\.]*)*))");
    static const std::regex py_from(R"(^\s*from\s+(\.?)([A-Za-z_]\w*)[\w\.]*\s+import\b)");
    static const std::regex c_include(R"rx(^\s*#\s*include\s+"([^"]+)")rx");
    static const std::regex js_ref(R"rx((?:require\(\s*|from\s+)['"](\.\.?/[^'"]+)['"])rx");

    std::set<std::string> missing;
    auto consider_py = [&](const std::string& module) {
        if (known_python_modules().count(module)) return;
        auto file = module + ".py";
        if (ws.contains(file) || ws.contains(module + "/__init__.py")) return;
        missing.insert(file);
    };

    for (const auto& [name, content] : ws.files()) {
        auto ext = extension_of(name);
        for (auto line_view : text::split_lines(content)) {
            std::string line(line_view);
            std::smatch m;
            if (ext == "py") {
                if (std::regex_search(line, m, py_from)) {
                    consider_py(m[2].str());
                } else if (std::regex_search(line, m, py_import)) {
                    for (const auto& part : text::split(m[1].str(), ',')) {
                        auto mod = std::string(text::trim(part));
                        consider_py(mod.substr(0, mod.find('.')));
                    }
                }
            } else if (ext == "c" || ext == "cc" || ext == "cpp" || ext == "h" || ext == "hpp") {
                if (std::regex_search(line, m, c_include) && is_safe_filename(m[1].str()) && !ws.contains(m[1].str()))
                    missing.insert(m[1].str());
            } else if (ext == "js" || ext == "ts" || ext == "mjs") {
                if (std::regex_search(line, m, js_ref)) {
                    auto ref = m[1].str();
                    while (ref.rfind("./", 0) == 0) ref = ref.substr(2);
                    if (ref.rfind("../", 0) == 0) continue;
                    if (extension_of(ref.substr(ref.rfind('/') == std::string::npos ? 0 : ref.rfind('/') + 1)).empty())
                        ref += "." + ext;
                    if (is_safe_filename(ref) && !ws.contains(ref)) missing.insert(ref);
                }
            }
        }
    }
    return {missing.begin(), missing.end()};
}

} // namespace evoloop
