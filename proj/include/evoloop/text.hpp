#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace evoloop::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

/// Splits on '\n'; a trailing '\r' on each line is dropped.
std::vector<std::string_view> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Keeps the last `budget` bytes (moved forward to a UTF-8 boundary).
std::string tail_bytes(std::string_view s, std::size_t budget);
/// Keeps the first `budget` bytes (moved back to a UTF-8 boundary).
std::string head_bytes(std::string_view s, std::size_t budget);

void replace_all(std::string& s, std::string_view from, std::string_view to);

} // namespace evoloop::text
