#pragma once

// Line-level helpers shared by the reply grammars. Internal to the library.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace evoloop::md {

using Lines = std::vector<std::string_view>;
using NumberedLines = std::vector<std::pair<std::size_t, std::string_view>>;

bool is_fence(std::string_view line);
/// A closing fence: backticks only.
bool is_closing_fence(std::string_view line);

std::string_view strip_bold(std::string_view s);
std::string_view strip_bullet(std::string_view s);
std::string_view strip_backticks(std::string_view s);

/// Lowercased heading name, or empty when the line is not a heading.
std::string heading_of(std::string_view line);
std::optional<std::size_t> find_heading(const Lines& lines, std::string_view name);
NumberedLines section_body(const Lines& lines, std::size_t heading);

/// "key: value" with a case-insensitive key; returns the trimmed value.
std::optional<std::string_view> field_value(std::string_view line, std::string_view key);

} // namespace evoloop::md
