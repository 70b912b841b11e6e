#pragma once

// Minimal structured key-value file: `key = value` lines, `#` comments,
// numeric scalars, bare strings, and numeric lists in brackets.
// Used for experiment configs and params-directory manifests.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eufm {

namespace detail {

inline std::string kv_trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace detail

/// Parsed key-value file. Keys are unique; later duplicates are errors.
class KvFile {
 public:
  KvFile() = default;

  static KvFile parse_text(const std::string& text, const std::string& origin = "<string>") {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::kv_trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
      std::string key = detail::kv_trim(line.substr(0, eq));
      std::string value = detail::kv_trim(line.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key))
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": duplicate key `" + key + "`");
      kv.values_[key] = value;
    }
    return kv;
  }

  static KvFile parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("missing config key `" + key + "`");
    return it->second;
  }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_str(key) : fallback;
  }

  double get_f64(const std::string& key) const { return parse_f64(key, get_str(key)); }
  double get_f64(const std::string& key, double fallback) const {
    return has(key) ? get_f64(key) : fallback;
  }

  std::int64_t get_i64(const std::string& key) const { return parse_i64(key, get_str(key)); }
  std::int64_t get_i64(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_i64(key) : fallback;
  }

  std::vector<double> get_f64_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split_list(key, get_str(key))) out.push_back(parse_f64(key, item));
    return out;
  }

  std::vector<std::int64_t> get_i64_list(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const std::string& item : split_list(key, get_str(key))) out.push_back(parse_i64(key, item));
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::vector<std::string> split_list(const std::string& key, std::string value) {
    value = detail::kv_trim(value);
    if (value.size() < 2 || value.front() != '[' || value.back() != ']')
      throw std::runtime_error("config key `" + key + "`: expected a bracketed list");
    value = value.substr(1, value.size() - 2);
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::kv_trim(item);
      if (!item.empty()) items.push_back(item);
    }
    return items;
  }

  static double parse_f64(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != detail::kv_trim(s).size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config key `" + key + "`: not a number: `" + s + "`");
    }
  }

  static std::int64_t parse_i64(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      std::int64_t v = std::stoll(s, &pos);
      if (pos != detail::kv_trim(s).size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config key `" + key + "`: not an integer: `" + s + "`");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace eufm
