#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mtmerlin {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Flat `key = value` document with `#` comments.
///
/// Every getter marks its key as consumed; `reject_unknown` then reports any
/// key nobody asked for, with its line number. Errors are ErrorCode::Config.
class Config {
 public:
  static Config parse(std::string_view text, std::string source = "<config>");
  static Config load(const std::string& path);

  /// Applies a `key=value` override; overrides take part in the hash.
  void apply_override(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

  void reject_unknown() const;

  /// Sorted `key=value` lines; the hash is FNV-1a 64 of this text.
  std::string canonical() const;
  std::string hash() const { return hex64(fnv1a64(canonical())); }

 private:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for overrides
  };

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;
  const Entry* lookup(const std::string& key) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> consumed_;
};

}  // namespace mtmerlin
