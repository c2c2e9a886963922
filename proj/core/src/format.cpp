#include "wran/format.hpp"

#include <charconv>
#include <system_error>

#include "wran/error.hpp"

namespace wran {

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format real");
  return std::string(buf, end);
}

double parse_real(std::string_view text, std::size_t line) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ParseError("malformed real '" + std::string(text) + "'", line);
  }
  return v;
}

std::size_t parse_index(std::string_view text, std::size_t line) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ParseError("malformed integer '" + std::string(text) + "'", line);
  }
  return v;
}

}  // namespace wran
