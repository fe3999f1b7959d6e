#include "evoloop/parsers.hpp"

#include "evoloop/error.hpp"
#include "evoloop/text.hpp"
#include "markdown.hpp"

#include <algorithm>
#include <cctype>

namespace evoloop {

// ---------------------------------------------------------------------------
// File patches

bool is_safe_filename(std::string_view name) {
    if (name.empty() || name.size() > 255) return false;
    if (name.front() == '/' || name.front() == '~') return false;
    for (char c : name) {
        auto u = static_cast<unsigned char>(c);
        if (u < 0x20 || u == 0x7F || c == '\\' || c == ':' || c == '*' || c == '?' || c == '"' ||
            c == '<' || c == '>' || c == '|' || c == ' ')
            return false;
    }
    auto segments = text::split(name, '/');
    for (const auto& seg : segments)
        if (seg.empty() || seg == "." || seg == "..") return false;
    const auto& base = segments.back();
    auto dot = base.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == base.size()) return false;
    for (std::size_t i = dot + 1; i < base.size(); ++i)
        if (!std::isalnum(static_cast<unsigned char>(base[i]))) return false;
    return true;
}

namespace {

/// The filename named on a line preceding a fence, if the line is just one.
std::optional<std::string> filename_token(std::string_view line) {
    auto s = text::trim(line);
    while (!s.empty() && s.front() == '#') s.remove_prefix(1);
    s = md::strip_backticks(md::strip_bold(s));
    for (std::string_view prefix : {"filename:", "file name:", "file:"})
        if (text::istarts_with(s, prefix)) s = md::strip_backticks(md::strip_bold(s.substr(prefix.size())));
    if (!s.empty() && s.back() == ':') s = md::strip_backticks(md::strip_bold(s.substr(0, s.size() - 1)));
    if (s.empty() || s.find_first_of(" \t") != std::string_view::npos) return std::nullopt;
    auto base = s.substr(s.rfind('/') == std::string_view::npos ? 0 : s.rfind('/') + 1);
    auto dot = base.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == base.size()) return std::nullopt;
    return std::string(s);
}

} // namespace

std::vector<FilePatch> parse_file_patches(std::string_view reply) {
    auto lines = text::split_lines(reply);
    std::vector<FilePatch> patches;
    std::string_view previous;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!md::is_fence(lines[i])) {
            if (!text::trim(lines[i]).empty()) previous = lines[i];
            continue;
        }
        std::size_t close = i + 1;
        while (close < lines.size() && !md::is_closing_fence(lines[close])) ++close;
        if (close == lines.size()) break; // unterminated block: truncated reply

        auto name = filename_token(previous);
        previous = {};
        if (name && is_safe_filename(*name)) {
            std::string content;
            for (std::size_t j = i + 1; j < close; ++j) {
                if (j > i + 1) content += '\n';
                content += lines[j];
            }
            auto it = std::find_if(patches.begin(), patches.end(),
                                   [&](const FilePatch& p) { return p.filename == *name; });
            if (it != patches.end())
                it->content = std::move(content);
            else
                patches.push_back(FilePatch{*name, std::move(content)});
        }
        i = close;
    }
    if (patches.empty())
        throw Error(ErrorCode::no_patches_found,
                    "no FILENAME line followed by a fenced code block was found");
    return patches;
}

// ---------------------------------------------------------------------------
// Gradient

std::string_view to_string(GradientKind kind) {
    switch (kind) {
    case GradientKind::no_error: return "no_error";
    case GradientKind::wrong_test_code: return "wrong_test_code";
    case GradientKind::diagnoses: return "diagnoses";
    }
    return "unknown";
}

namespace {

constexpr std::string_view kNoError = "No error in codes";
constexpr std::string_view kWrongTest = "Wrong test code";

std::string_view basename(std::string_view path) {
    auto slash = path.rfind('/');
    return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

} // namespace

TextualGradient parse_gradient(std::string_view reply, const GradientOptions& options) {
    auto trimmed = text::trim(reply);
    TextualGradient g;
    g.raw_text = std::string(trimmed);
    if (trimmed.find(kNoError) != std::string_view::npos) {
        g.kind = GradientKind::no_error;
        return g;
    }
    if (trimmed.find(kWrongTest) != std::string_view::npos) {
        g.kind = GradientKind::wrong_test_code;
        return g;
    }

    auto lines = text::split_lines(trimmed);
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (md::field_value(lines[i], "file name")) starts.push_back(i);

    std::size_t test_blocks = 0;
    for (std::size_t b = 0; b < starts.size(); ++b) {
        std::size_t end = b + 1 < starts.size() ? starts[b + 1] : lines.size();
        Diagnosis d;
        d.filename = std::string(md::strip_backticks(*md::field_value(lines[starts[b]], "file name")));
        bool in_analysis = false;
        for (std::size_t i = starts[b] + 1; i < end; ++i) {
            if (auto fn = md::field_value(lines[i], "function name")) {
                in_analysis = false;
                for (const auto& part : text::split(*fn, ',')) {
                    auto name = md::strip_backticks(part);
                    if (!name.empty()) d.functions.emplace_back(name);
                }
            } else if (auto an = md::field_value(lines[i], "detailed analysis of the problem")) {
                in_analysis = true;
                d.analysis = std::string(*an);
            } else if (in_analysis) {
                d.analysis += '\n';
                d.analysis += lines[i];
            }
        }
        d.analysis = std::string(text::trim(d.analysis));
        if (d.filename.empty()) continue;
        if (!options.test_prefix.empty() && basename(d.filename).substr(0, options.test_prefix.size()) ==
                                                options.test_prefix) {
            ++test_blocks;
            continue;
        }
        g.diagnoses.push_back(std::move(d));
    }
    if (g.diagnoses.empty()) {
        if (test_blocks)
            throw Error(ErrorCode::unparsable_gradient,
                        "diagnoses must name source files, not test files");
        throw Error(ErrorCode::unparsable_gradient,
                    "reply is neither \"No error in codes.\", \"Wrong test code.\", nor "
                    "'file name: / function name: / detailed analysis of the problem:' blocks");
    }
    g.kind = GradientKind::diagnoses;
    return g;
}

std::string serialize_gradient(const TextualGradient& g) {
    switch (g.kind) {
    case GradientKind::no_error: return "No error in codes.\n";
    case GradientKind::wrong_test_code: return g.raw_text + "\n";
    case GradientKind::diagnoses: break;
    }
    return describe_issues(g);
}

std::string describe_issues(const TextualGradient& g) {
    if (g.kind != GradientKind::diagnoses) return g.raw_text;
    std::string out;
    for (std::size_t i = 0; i < g.diagnoses.size(); ++i) {
        const auto& d = g.diagnoses[i];
        if (i) out += '\n';
        out += "file name:" + d.filename + "\n";
        out += "function name: " + text::join(d.functions, ", ") + "\n";
        out += "detailed analysis of the problem: " + d.analysis + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Update report

namespace {

bool parse_bool(std::string_view value, std::size_t line_no) {
    auto v = md::strip_backticks(value);
    if (!v.empty() && v.back() == '.') v.remove_suffix(1);
    auto lower = text::to_lower(text::trim(v));
    if (lower == "true") return true;
    if (lower == "false") return false;
    throw Error(ErrorCode::malformed_line, "line " + std::to_string(line_no + 1) +
                                               ": expected True or False, got \"" +
                                               std::string(value) + "\"");
}

} // namespace

UpdateReport parse_update_report(std::string_view reply, const DraftOptions& options) {
    auto lines = text::split_lines(reply);
    auto at = md::find_heading(lines, "requirements progress");
    if (!at) throw Error(ErrorCode::missing_section, "missing REQUIREMENTS PROGRESS section");

    UpdateReport report;
    bool in_detail = false;
    for (auto [no, line] : md::section_body(lines, *at)) {
        if (auto v = md::field_value(line, "requirement")) {
            report.progress.push_back(RequirementProgress{std::string(*v), false, false, {}});
            in_detail = false;
            continue;
        }
        if (report.progress.empty()) continue;
        auto& entry = report.progress.back();
        if (auto v = md::field_value(line, "achieved")) {
            entry.achieved = parse_bool(*v, no);
            in_detail = false;
        } else if (auto v = md::field_value(line, "double-checked")) {
            entry.double_checked = parse_bool(*v, no);
            in_detail = false;
        } else if (auto v = md::field_value(line, "double checked")) {
            entry.double_checked = parse_bool(*v, no);
            in_detail = false;
        } else if (auto v = md::field_value(line, "detailed progress")) {
            entry.detail = std::string(*v);
            in_detail = true;
        } else if (in_detail) {
            entry.detail += '\n';
            entry.detail += line;
        }
    }
    for (auto& entry : report.progress) entry.detail = std::string(text::trim(entry.detail));

    report.draft = parse_network_draft(reply, LabelKind::programmer, options);
    return report;
}

std::string serialize_update_report(const UpdateReport& report) {
    std::string out = "### REQUIREMENTS PROGRESS\n\n";
    for (const auto& p : report.progress) {
        std::string req = p.requirement;
        for (auto& c : req)
            if (c == '\n' || c == '\r') c = ' ';
        out += "requirement: " + req + "\n";
        out += std::string("achieved: ") + (p.achieved ? "True" : "False") + "\n";
        out += std::string("double-checked: ") + (p.double_checked ? "True" : "False") + "\n";
        out += "detailed progress: " + p.detail + "\n\n";
    }
    out += serialize_draft(report.draft);
    return out;
}

} // namespace evoloop
