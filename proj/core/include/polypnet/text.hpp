#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace polypnet {

/// Shortest decimal string that round-trips to the same double (std::to_chars).
/// Used everywhere a double goes into a deterministic text artifact.
std::string format_double(double v);

/// Fixed-point rendering with the given number of decimals (half-away rounding).
std::string format_fixed(double v, int decimals);

/// Strict double parse of the whole field; throws FormatError otherwise.
double parse_double(std::string_view s);

std::vector<std::string> split(std::string_view line, char sep);
std::string join(const std::vector<std::string>& parts, char sep);
std::string trim(std::string_view s);

}  // namespace polypnet
