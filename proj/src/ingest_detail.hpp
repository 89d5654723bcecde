#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace lcca::detail {

std::string_view trim(std::string_view s);
std::optional<double> parse_number(std::string_view s);
/// Trimmed token; integral numbers lose leading zeros and a trailing ".0"
/// so "01", "1" and "1.0" compare equal.
std::string canonical_token(std::string_view s);

}  // namespace lcca::detail
