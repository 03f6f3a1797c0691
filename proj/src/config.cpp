#include "uparse/config.hpp"

#include <charconv>
#include <sstream>

#include "uparse/errors.hpp"
#include "uparse/io.hpp"

namespace uparse {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  return from_text(read_file(path));
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream ss(text);
  std::string line;
  long lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key=value, got '" + trimmed + "'");
    }
    std::string key = trim(trimmed.substr(0, eq));
    std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.kv_[key] = value;
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& s = it->second;
  double value = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), value);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw UsageError("config key " + key + ": bad number '" + s + "'");
  }
  return value;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& s = it->second;
  int value = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), value);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw UsageError("config key " + key + ": bad integer '" + s + "'");
  }
  return value;
}

std::uint64_t RunConfig::get_u64(const std::string& key,
                                 std::uint64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& s = it->second;
  std::uint64_t value = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), value);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw UsageError("config key " + key + ": bad integer '" + s + "'");
  }
  return value;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw UsageError("config key " + key + ": bad boolean '" + s + "'");
}

std::string RunConfig::canonical() const {
  std::ostringstream ss;
  for (const auto& [k, v] : kv_) ss << k << '=' << v << '\n';
  return ss.str();
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

}  // namespace uparse
