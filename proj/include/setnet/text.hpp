#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace setnet {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
/// Strict parse of a whole token; nullopt on anything else.
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_integer(std::string_view token);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char delimiter);

}  // namespace setnet
