#pragma once

// Flat line-oriented key=value configuration. Lines starting with '#' are
// comments; `include <path>` splices another file, resolved relative to the
// including file. Later assignments override earlier ones.

#include "mmwfm/core.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

namespace mmwfm {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig cfg;
    cfg.merge_text(text, {}, 0);
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    KeyValueConfig cfg;
    cfg.merge_file(path, 0);
    return cfg;
  }

  void merge_file(const std::filesystem::path& path, int depth = 0) {
    if (depth > 16) throw ConfigError("config: include depth exceeded at " + path.string());
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.parent_path(), depth);
  }

  /// Applies one `key=value` override.
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config: expected key=value, got '" + std::string(assignment) + "'");
    const std::string key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError("config: empty key in '" + std::string(assignment) + "'");
    values_[key] = trim(assignment.substr(eq + 1));
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("config: '" + key + "' is not an integer: " + s);
    return v;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: '" + key + "' is not a number: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& s = it->second;
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError("config: '" + key + "' is not a boolean: " + s);
  }

  /// Sorted `key=value` lines.
  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void merge_text(std::string_view text, const std::filesystem::path& base, int depth) {
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      const std::string line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
      ++line_no;
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      if (line.empty() || line[0] == '#') continue;
      if (line.rfind("include", 0) == 0 && line.find('=') == std::string::npos) {
        const std::string target = trim(std::string_view(line).substr(7));
        if (target.empty()) throw ConfigError("config: include without a path on line " + std::to_string(line_no));
        std::filesystem::path p(target);
        merge_file(p.is_absolute() ? p : base / p, depth + 1);
        continue;
      }
      set_assignment(line);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace mmwfm
