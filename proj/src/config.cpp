#include "tsaug/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tsaug/rng.hpp"

namespace tsaug {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  std::size_t dots = 0;
  for (char c : key) {
    if (c == '.')
      ++dots;
    else if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      return false;
  }
  return dots <= 1;
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
  ConfigFile cfg;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected `key = value`");
    const std::string key = trim(t.substr(0, eq));
    if (!valid_key(key)) throw std::invalid_argument(where + ": bad key '" + key + "'");
    if (cfg.has(key)) throw std::invalid_argument(where + ": duplicate key '" + key + "'");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  return parse(in, path.string());
}

void ConfigFile::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw std::invalid_argument("bad config key '" + key + "'");
  values_[key] = value;
}

const std::string& ConfigFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("missing config key '" + key + "'");
  return it->second;
}

std::string ConfigFile::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = get(key);
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument("config key '" + key + "': not a number: " + v);
  return d;
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = get(key);
  std::size_t used = 0;
  std::uint64_t u = 0;
  try {
    if (!v.empty() && v.front() != '-') u = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw std::invalid_argument("config key '" + key + "': not a non-negative integer: " + v);
  return u;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: " + v);
}

std::vector<std::string> ConfigFile::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  for (std::string item; std::getline(ss, item, ',');)
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::string ConfigFile::canonical() const {
  std::string s;
  for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
  return s;
}

std::string ConfigFile::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

}  // namespace tsaug
