#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace dc {

/// Flat `key = value` configuration. Lines starting with '#' and blank lines
/// are ignored; sections are expressed with dotted keys (`train.lr = 0.01`).
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws a Config error naming the first key that no getter has read.
  void reject_unused() const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Canonical text: sorted `key = value` lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string origin_;
};

}  // namespace dc
