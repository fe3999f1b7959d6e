#pragma once

#include <map>
#include <string>
#include <string_view>

namespace evoloop {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view data);

/// Unambiguous length-prefixed encoding: "<len>:<bytes>,".
void append_netstring(std::string& out, std::string_view value);

} // namespace evoloop
