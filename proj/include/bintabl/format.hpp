#pragma once

#include <string>
#include <string_view>

namespace bintabl {

/// Shortest decimal that parses back to exactly `value` (locale independent).
std::string format_double(double value);

/// Parses the whole of `text` as a double, locale independent. Returns
/// false if any character is left over or the text is not a number.
bool parse_double(std::string_view text, double& value);

}  // namespace bintabl
