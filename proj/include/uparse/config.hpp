#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace uparse {

// Flat key=value experiment configuration. '#' starts a comment; values keep
// interior whitespace. Keys are the same strings as the CLI flags.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

  // Sorted key=value dump and its FNV-1a hash; recorded in stage sidecars.
  std::string canonical() const;
  std::string hash() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace uparse
