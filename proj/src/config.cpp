#include "login/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "login/errors.hpp"

namespace login {

namespace {

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& ConfigFile::known_keys() {
  static const std::map<std::string, std::string> keys = {
      {"dataset", ""},                      // dataset bundle directory
      {"run_dir", "runs/latest"},           // artifact directory
      {"cache_dir", ""},                    // defaults to <run_dir>/cache
      {"model", "gcn"},                     // mlp | gcn | sage | mixhop
      {"hidden", "64"},
      {"dropout", "0.5"},
      {"epochs", "200"},
      {"patience", "30"},
      {"lr", "0.01"},
      {"optimizer", "adam"},                // adam | sgd
      {"mixhop_powers", "0,1,2"},
      {"mc_samples", "5"},                  // T
      {"gamma", "auto"},                    // uncertain ratio, or "auto"
      {"d_th", "0.15"},
      {"max_iterations", "1"},
      {"seeds", "1,2,3,4,5"},
      {"consult_backend", "mock-oracle"},   // mock-oracle | mock-noisy | replay-cache | remote-chat
      {"noisy_flip_prob", "0.5"},
      {"consult_endpoint", "http://127.0.0.1:8000"},
      {"consult_model", "vicuna-7b-v1.5"},
      {"consult_temperature", "0"},
      {"max_inflight", "4"},
      {"retries", "3"},
      {"retry_base_ms", "250"},
      {"encoder_backend", "hash"},          // hash | remote-embedding
      {"encoder_dim", "256"},
      {"embed_endpoint", "http://127.0.0.1:8001"},
      {"embed_model", "text-embedding"},
  };
  return keys;
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, "config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (!known_keys().count(key))
      fail(ErrorKind::Config, "unknown config key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

std::string ConfigFile::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    fail(ErrorKind::Config, "config key '" + key + "' is not a number: " + it->second);
  }
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (...) {
    fail(ErrorKind::Config, "config key '" + key + "' is not an integer: " + it->second);
  }
}

namespace {
template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& raw, Parse parse) {
  std::vector<T> out;
  std::istringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = strip(item);
    if (item.empty()) continue;
    try {
      out.push_back(parse(item));
    } catch (...) {
      fail(ErrorKind::Config, "config key '" + key + "' has a bad list item: " + item);
    }
  }
  if (out.empty()) fail(ErrorKind::Config, "config key '" + key + "' is an empty list");
  return out;
}
}  // namespace

std::vector<std::uint64_t> ConfigFile::get_u64_list(const std::string& key,
                                                    std::vector<std::uint64_t> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_list<std::uint64_t>(key, it->second,
                                   [](const std::string& s) { return std::stoull(s); });
}

std::vector<int> ConfigFile::get_int_list(const std::string& key,
                                          std::vector<int> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_list<int>(key, it->second, [](const std::string& s) { return std::stoi(s); });
}

void ConfigFile::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key))
    fail(ErrorKind::Config, "unknown config key '" + key + "'");
  values_[key] = value;
}

std::string api_token_from_env() {
  const char* tok = std::getenv("LOGIN_API_TOKEN");
  return tok ? tok : "";
}

}  // namespace login
