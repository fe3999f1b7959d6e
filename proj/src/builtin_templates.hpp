#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace evoloop::detail {

/// (id, body) for every file in templates/; generated at configure time.
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_template_texts();

} // namespace evoloop::detail
