#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wran {

// Line-oriented `key=value` text. Blank lines and lines starting with '#' are
// ignored; `[section]` lines prefix subsequent keys with "section.".
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value);
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list of indices; empty string gives an empty list.
  std::vector<std::size_t> get_list(const std::string& key, std::vector<std::size_t> fallback) const;

  void write(std::ostream& out) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::size_t line_of(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
};

std::string join_list(const std::vector<std::size_t>& values);

}  // namespace wran
