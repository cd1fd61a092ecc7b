// Flat key = value configuration file. Unknown keys are rejected; '#' starts
// a comment. Secrets (the API token) come from the environment only.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace login {

class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);
  static ConfigFile defaults() { return ConfigFile(); }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          std::vector<std::uint64_t> fallback) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

  void set(const std::string& key, const std::string& value);

  // every accepted key with its documented default
  static const std::map<std::string, std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

// API token for remote backends; read from LOGIN_API_TOKEN.
std::string api_token_from_env();

}  // namespace login
