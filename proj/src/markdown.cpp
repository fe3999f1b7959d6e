#include "markdown.hpp"

#include "evoloop/text.hpp"

namespace evoloop::md {

bool is_fence(std::string_view line) { return text::trim(line).substr(0, 3) == "```"; }

bool is_closing_fence(std::string_view line) {
    auto s = text::trim(line);
    return s.size() >= 3 && s.find_first_not_of('`') == std::string_view::npos;
}

std::string_view strip_bold(std::string_view s) {
    s = text::trim(s);
    while (s.size() >= 2 && s.substr(0, 2) == "**") s = text::trim(s.substr(2));
    while (s.size() >= 2 && s.substr(s.size() - 2) == "**") s = text::trim(s.substr(0, s.size() - 2));
    return s;
}

std::string_view strip_bullet(std::string_view s) {
    s = text::trim(s);
    if (s.size() >= 2 && (s[0] == '-' || s[0] == '*') && s[1] == ' ') s = text::trim(s.substr(2));
    return s;
}

std::string_view strip_backticks(std::string_view s) {
    s = text::trim(s);
    while (!s.empty() && s.front() == '`') s.remove_prefix(1);
    while (!s.empty() && s.back() == '`') s.remove_suffix(1);
    return text::trim(s);
}

std::string heading_of(std::string_view line) {
    auto s = text::trim(line);
    bool hashed = false;
    while (!s.empty() && s.front() == '#') {
        s.remove_prefix(1);
        hashed = true;
    }
    s = strip_bold(s);
    if (!s.empty() && s.back() == ':') s = strip_bold(s.substr(0, s.size() - 1));
    auto name = text::to_lower(s);
    if (hashed) return name.empty() ? std::string("#") : name;
    if (name == "composition" || name == "workflow" || name == "requirements progress") return name;
    return {};
}

std::optional<std::size_t> find_heading(const Lines& lines, std::string_view name) {
    bool in_fence = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_fence(lines[i])) {
            in_fence = !in_fence;
            continue;
        }
        if (!in_fence && heading_of(lines[i]) == name) return i;
    }
    // Replies wrapped wholesale in one fence still carry usable headings.
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (heading_of(lines[i]) == name) return i;
    return std::nullopt;
}

NumberedLines section_body(const Lines& lines, std::size_t heading) {
    NumberedLines body;
    std::size_t i = heading + 1;
    while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
    if (i < lines.size() && is_fence(lines[i])) {
        for (++i; i < lines.size() && !is_fence(lines[i]); ++i) body.emplace_back(i, lines[i]);
        return body;
    }
    for (; i < lines.size(); ++i) {
        if (!heading_of(lines[i]).empty()) break;
        if (is_fence(lines[i])) continue;
        body.emplace_back(i, lines[i]);
    }
    return body;
}

std::optional<std::string_view> field_value(std::string_view line, std::string_view key) {
    auto s = strip_bold(strip_bullet(line));
    if (!text::istarts_with(s, key)) return std::nullopt;
    s.remove_prefix(key.size());
    s = strip_bold(s);
    if (s.empty() || s.front() != ':') return std::nullopt;
    return strip_bold(s.substr(1));
}

} // namespace evoloop::md
