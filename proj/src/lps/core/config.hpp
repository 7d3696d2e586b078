#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lps {

// Flat dotted-key configuration document ("a.b.c = value" lines, '#' comments).
// Keys are kept sorted so canonical() and hash() are stable.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value);
  // Literal strings would otherwise convert to bool.
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, int64_t value);
  void set(const std::string& key, double value);
  void set(const std::string& key, bool value);

  // Getters with defaults. Missing key + no default overload -> Error.
  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  int64_t integer(const std::string& key) const;
  int64_t integer(const std::string& key, int64_t fallback) const;
  double real(const std::string& key) const;
  double real(const std::string& key, double fallback) const;
  bool boolean(const std::string& key) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<int64_t> int_list(const std::string& key) const;
  std::vector<int64_t> int_list(const std::string& key, const std::vector<int64_t>& fallback) const;
  std::vector<double> real_list(const std::string& key) const;
  std::vector<std::string> str_list(const std::string& key) const;
  std::vector<std::string> str_list(const std::string& key, const std::vector<std::string>& fallback) const;

  // Overlay other's entries on top of this one.
  void merge_from(const Config& other);

  // All keys under "prefix." with the prefix stripped.
  Config section(const std::string& prefix) const;

  std::string canonical() const;
  uint64_t hash() const;
  std::string hash_hex() const;
  void save(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& items() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lps
