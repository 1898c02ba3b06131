#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biaslens/error.hpp"
#include "biaslens/textio.hpp"

namespace biaslens {

namespace fs = std::filesystem;

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;  // empty: no default
  bool is_path = false;
};

// Every recognized key. `stats.<collection>` keys are accepted in addition.
inline constexpr ConfigKey kConfigKeys[] = {
    {"corpus", "", true},
    {"output_dir", "", true},
    {"lexicon.z", "", true},
    {"lexicon.z_prime", "", true},
    {"lexicon.pairs", "", true},
    {"occupations", "", true},
    {"representations", "sg,esg,ppmi", false},
    {"measures", "weam2nd,weam1st", false},
    {"min_count", "5", false},
    {"window", "5", false},
    {"sample", "1e-3", false},
    {"seed", "1", false},
    {"threads", "1", false},
    {"sgns.dim", "100", false},
    {"sgns.negatives", "5", false},
    {"sgns.epochs", "5", false},
    {"sgns.lr", "0.025", false},
    {"sgns.noise_exponent", "0.75", false},
    {"glove.dim", "100", false},
    {"glove.x_max", "100", false},
    {"glove.weight_exp", "0.75", false},
    {"glove.epochs", "15", false},
    {"glove.lr", "0.05", false},
    {"ppmi.alpha", "0.75", false},
    {"ppmi.shift", "1", false},
    {"report.pool", "vocab", false},
    {"report.bins", "20", false},
    {"cda.enabled", "false", false},
};

inline const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : kConfigKeys)
    if (k.name == name) return &k;
  return nullptr;
}

inline bool is_stats_key(std::string_view name) { return name.starts_with("stats.") && name.size() > 6; }

/// BIASLENS_ plus the key uppercased with '.' turned into '_'.
inline std::string env_name(std::string_view key) {
  std::string out = "BIASLENS_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

/// Flat `key = value` configuration. '#' starts a comment line; relative paths
/// resolve against the directory of the config file.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, fs::path base_dir = {}) {
    Config c;
    c.base_dir_ = std::move(base_dir);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) throw ConfigError(at_line("expected 'key = value'", line_no));
      const std::string key(trim(t.substr(0, eq)));
      const std::string value(trim(t.substr(eq + 1)));
      if (key.empty()) throw ConfigError(at_line("empty key", line_no));
      if (!find_config_key(key) && !is_stats_key(key)) throw ConfigError(at_line("unknown key '" + key + "'", line_no));
      if (c.values_.contains(key)) throw ConfigError(at_line("duplicate key '" + key + "'", line_no));
      c.values_[key] = value;
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, fs::path(path).parent_path());
  }

  /// Environment overrides for every recognized key and every stats key
  /// already present.
  void apply_env(const EnvLookup& lookup = process_env) {
    for (const auto& k : kConfigKeys)
      if (auto v = lookup(env_name(k.name))) values_[std::string(k.name)] = *v;
    for (auto& [key, value] : values_)
      if (is_stats_key(key))
        if (auto v = lookup(env_name(key))) value = *v;
  }

  void set(const std::string& key, const std::string& value) {
    if (!find_config_key(key) && !is_stats_key(key)) throw ConfigError("unknown key '" + key + "'");
    values_[key] = value;
  }

  const fs::path& base_dir() const { return base_dir_; }

  bool has(const std::string& key) const {
    auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  std::string get(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    if (auto* k = find_config_key(key)) return std::string(k->default_value);
    return {};
  }

  std::string require(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing required key '" + key + "'");
    return get(key);
  }

  std::string path(const std::string& key) const {
    const fs::path p(require(key));
    return (p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p).lexically_normal().string();
  }

  std::uint64_t get_uint(const std::string& key) const {
    const auto s = get(key);
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty())
      throw ConfigError("key '" + key + "' must be a non-negative integer, got '" + s + "'");
    return v;
  }

  double get_double(const std::string& key) const {
    const auto s = get(key);
    double v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty() || !std::isfinite(v))
      throw ConfigError("key '" + key + "' must be a number, got '" + s + "'");
    return v;
  }

  bool get_bool(const std::string& key) const {
    const auto s = get(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + key + "' must be true or false, got '" + s + "'");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    const auto value = get(key);
    for (auto item : split(value, ','))
      if (auto t = trim(item); !t.empty()) out.emplace_back(t);
    return out;
  }

  /// (collection name, resolved path) for every `stats.<name>` key.
  std::vector<std::pair<std::string, std::string>> stats_files() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [key, value] : values_)
      if (is_stats_key(key) && !value.empty()) out.emplace_back(key.substr(6), path(key));
    return out;
  }

  /// Sorted `key=value` lines of the explicitly set keys plus defaults,
  /// restricted to keys starting with one of `prefixes` (all when empty).
  std::string canonical(std::span<const std::string_view> prefixes = {}) const {
    std::map<std::string, std::string> all;
    for (const auto& k : kConfigKeys) all[std::string(k.name)] = std::string(k.default_value);
    for (const auto& [key, value] : values_) all[key] = value;
    std::string out;
    for (const auto& [key, value] : all) {
      if (!prefixes.empty() && std::none_of(prefixes.begin(), prefixes.end(), [&](std::string_view p) {
            return key == p || (key.starts_with(p) && key.size() > p.size() && key[p.size()] == '.');
          }))
        continue;
      out += key + '=' + value + '\n';
    }
    return out;
  }

  std::string hash(std::span<const std::string_view> prefixes = {}) const { return hex64(fnv1a(canonical(prefixes))); }

 private:
  std::map<std::string, std::string> values_;
  fs::path base_dir_;
};

}  // namespace biaslens
