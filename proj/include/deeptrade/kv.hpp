#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "deeptrade/csv.hpp"

namespace deeptrade {

/// Plain-text `key = value` files with `#` comments. Used for run configs,
/// preprocessing sidecars and checkpoint echoes. Keys are kept sorted so the
/// serialized form is deterministic.
class KvFile {
 public:
  KvFile() = default;

  static KvFile parse_text(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("kv parse error at line " +
                                 std::to_string(lineno) + ": missing '='");
      std::string key = trim(t.substr(0, eq));
      std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error("kv parse error at line " +
                                 std::to_string(lineno) + ": empty key");
      kv.values_[key] = value;
    }
    return kv;
  }

  static KvFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      throw std::runtime_error("missing config key: " + key);
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key) const {
    double v;
    if (!parse_double(get(key), v))
      throw std::runtime_error("config key is not a number: " + key);
    return v;
  }

  std::int64_t get_i64(const std::string& key) const {
    std::int64_t v;
    if (!parse_i64(get(key), v))
      throw std::runtime_error("config key is not an integer: " + key);
    return v;
  }

  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config key is not a boolean: " + key);
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }
  void set(const std::string& key, double value) {
    values_[key] = format_double(value);
  }
  void set(const std::string& key, std::int64_t value) {
    values_[key] = std::to_string(value);
  }
  void set(const std::string& key, std::uint64_t value) {
    values_[key] = std::to_string(value);
  }
  void set(const std::string& key, bool value) {
    values_[key] = value ? "true" : "false";
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << serialize();
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace deeptrade
