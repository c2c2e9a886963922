#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace wran {

// Shortest decimal text that round-trips to the same double.
std::string format_real(double v);
// Throws ParseError(line) on malformed input.
double parse_real(std::string_view text, std::size_t line);
std::size_t parse_index(std::string_view text, std::size_t line);

}  // namespace wran
