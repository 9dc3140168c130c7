#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace instfmt {

std::string_view trim(std::string_view s);

/// Split on a single character; keeps empty pieces.
std::vector<std::string_view> split(std::string_view s, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// ASCII lowercase; other bytes untouched.
std::string to_lower(std::string_view s);

}  // namespace instfmt
