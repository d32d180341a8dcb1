#include "mtmerlin/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(',', start);
    out.push_back(trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const std::string buf(s);
  if (buf.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(buf.c_str(), &end);
  return errno == 0 && end == buf.c_str() + buf.size();
}

template <typename I>
bool parse_integer(std::string_view s, I& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Config Config::parse(std::string_view text, std::string source) {
  Config cfg;
  cfg.source_ = std::move(source);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = cfg.source_ + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw Error(ErrorCode::Config, where + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw Error(ErrorCode::Config, where + "invalid key '" + std::string(key) + "'");
    auto [it, inserted] = cfg.entries_.emplace(std::string(key), Entry{std::string(value), line_no});
    if (!inserted) {
      throw Error(ErrorCode::Config, where + "duplicate key '" + std::string(key) + "' (first on line " +
                                         std::to_string(it->second.line) + ")");
    }
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::Config, "override '" + std::string(assignment) + "' must be key=value");
  }
  const std::string_view key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw Error(ErrorCode::Config, "override has invalid key '" + std::string(key) + "'");
  set(std::string(key), std::string(trim(assignment.substr(eq + 1))));
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = Entry{value, 0}; }

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

void Config::fail(const std::string& key, const std::string& message) const {
  const auto it = entries_.find(key);
  std::string where = source_;
  if (it != entries_.end()) where += it->second.line > 0 ? ":" + std::to_string(it->second.line) : " (override)";
  throw Error(ErrorCode::Config, where + ": key '" + key + "': " + message);
}

const Config::Entry* Config::lookup(const std::string& key) const {
  consumed_.insert(key);
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = lookup(key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  double v = 0.0;
  if (!parse_double(e->value, v)) fail(key, "expected a number, got '" + e->value + "'");
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  int v = 0;
  if (!parse_integer(std::string_view(e->value), v)) fail(key, "expected an integer, got '" + e->value + "'");
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  if (!parse_integer(std::string_view(e->value), v)) {
    fail(key, "expected a non-negative integer, got '" + e->value + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  const std::string& v = e->value;
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  fail(key, "expected on/off, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (std::string_view item : split_list(e->value)) {
    double v = 0.0;
    if (!parse_double(item, v)) fail(key, "expected a comma-separated list of numbers, got '" + e->value + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::vector<int> out;
  for (std::string_view item : split_list(e->value)) {
    int v = 0;
    if (!parse_integer(item, v)) fail(key, "expected a comma-separated list of integers, got '" + e->value + "'");
    out.push_back(v);
  }
  return out;
}

void Config::reject_unknown() const {
  for (const auto& [key, entry] : entries_) {
    if (consumed_.count(key) == 0) fail(key, "unknown key");
  }
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [key, entry] : entries_) out += key + "=" + entry.value + "\n";
  return out;
}

}  // namespace mtmerlin
