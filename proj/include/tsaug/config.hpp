#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tsaug {

// Flat `key = value` text. Keys may carry one dotted section prefix
// (`augment.beta`). `#` starts a comment line; blank lines are ignored.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in, const std::string& source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  // Sorted `key = value` lines; equal configs give equal text.
  std::string canonical() const;
  // 16 hex digits of FNV-1a over canonical().
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tsaug
