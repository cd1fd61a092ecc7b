#include "login/encoder.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "login/errors.hpp"
#include "login/rng.hpp"

namespace login {

namespace {

class HashEncoder final : public EncoderBackend {
 public:
  explicit HashEncoder(int dim) : dim_(dim) {
    if (dim < 1) fail(ErrorKind::Config, "encoder dim must be >= 1");
  }
  std::string kind() const override { return "deterministic-hash"; }
  int dim() const override { return dim_; }

  Matrix encode(const std::vector<std::string>& texts) override {
    Matrix out(static_cast<int>(texts.size()), dim_);
    for (int i = 0; i < out.rows; ++i) encode_one(texts[i], out.row(i));
    return out;
  }

 private:
  void encode_one(const std::string& text, double* row) const {
    std::fill(row, row + dim_, 0.0);
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
      std::size_t end = pos;
      while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
      if (end > pos) {
        Rng rng(fnv1a64(std::string_view(text).substr(pos, end - pos)));
        for (int d = 0; d < dim_; ++d) row[d] += rng.normal();
      }
      pos = end;
    }
    double norm = 0.0;
    for (int d = 0; d < dim_; ++d) norm += row[d] * row[d];
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (int d = 0; d < dim_; ++d) row[d] /= norm;
    } else {
      row[fnv1a64(text) % static_cast<std::uint64_t>(dim_)] = 1.0;
    }
  }

  int dim_;
};

class RemoteEncoder final : public EncoderBackend {
 public:
  RemoteEncoder(std::string endpoint, std::string model, std::string token, int dim,
                std::string cache_path, int max_retries, int base_delay_ms)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), token_(std::move(token)),
        dim_(dim), cache_path_(std::move(cache_path)), max_retries_(max_retries),
        base_delay_ms_(base_delay_ms) {
    if (!cache_path_.empty()) load_cache();
  }

  std::string kind() const override { return "remote-embedding"; }
  int dim() const override { return dim_; }

  Matrix encode(const std::vector<std::string>& texts) override {
    Matrix out(static_cast<int>(texts.size()), dim_);
    for (int i = 0; i < out.rows; ++i) {
      std::vector<double> vec = encode_one(texts[i]);
      if (static_cast<int>(vec.size()) != dim_)
        fail(ErrorKind::Backend, "embedding endpoint returned dimension " +
                                     std::to_string(vec.size()) + ", expected " +
                                     std::to_string(dim_));
      std::copy(vec.begin(), vec.end(), out.row(i));
    }
    if (!out.all_finite()) fail(ErrorKind::Backend, "embedding endpoint returned non-finite values");
    return out;
  }

 private:
  void load_cache() {
    std::ifstream in(cache_path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) fail(ErrorKind::Dataset, "corrupt embedding cache " + cache_path_);
      cache_[j.at("text_hash").get<std::string>()] = j.at("vec").get<std::vector<double>>();
    }
    out_.open(cache_path_, std::ios::app);
  }

  std::vector<double> encode_one(const std::string& text) {
    char key[17];
    std::snprintf(key, sizeof key, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    {
      std::lock_guard lk(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    std::vector<double> vec = fetch(text);
    {
      std::lock_guard lk(mu_);
      cache_[key] = vec;
      if (out_.is_open()) {
        nlohmann::ordered_json j;
        j["text_hash"] = key;
        j["vec"] = vec;
        out_ << j.dump() << "\n";
        out_.flush();
      }
    }
    return vec;
  }

  std::vector<double> fetch(const std::string& text) {
    int attempt = 0;
    for (;;) {
      try {
        return fetch_once(text);
      } catch (const TransportError& e) {
        if (attempt >= max_retries_)
          throw LoginError(ErrorKind::Backend,
                           std::string("embedding request failed: ") + e.what());
        std::this_thread::sleep_for(
            std::chrono::milliseconds(base_delay_ms_ * (1LL << attempt)));
        ++attempt;
      }
    }
  }

  std::vector<double> fetch_once(const std::string& text) {
    httplib::Client client(endpoint_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    nlohmann::ordered_json payload;
    payload["model"] = model_;
    payload["input"] = nlohmann::ordered_json::array({text});
    auto res = client.Post("/v1/embeddings", headers, payload.dump(), "application/json");
    if (!res) throw TransportError("embedding endpoint unreachable: " + endpoint_);
    if (res->status != 200)
      throw TransportError("embedding endpoint returned status " + std::to_string(res->status));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || j["data"].empty() ||
        !j["data"][0].contains("embedding"))
      throw TransportError("malformed embedding payload");
    return j["data"][0]["embedding"].get<std::vector<double>>();
  }

  std::string endpoint_, model_, token_;
  int dim_;
  std::string cache_path_;
  int max_retries_, base_delay_ms_;
  std::mutex mu_;
  std::map<std::string, std::vector<double>> cache_;
  std::ofstream out_;
};

}  // namespace

std::unique_ptr<EncoderBackend> make_hash_encoder(int dim) {
  return std::make_unique<HashEncoder>(dim);
}

std::unique_ptr<EncoderBackend> make_remote_encoder(std::string endpoint, std::string model,
                                                    std::string api_token, int dim,
                                                    std::string cache_path, int max_retries,
                                                    int base_delay_ms) {
  return std::make_unique<RemoteEncoder>(std::move(endpoint), std::move(model),
                                         std::move(api_token), dim, std::move(cache_path),
                                         max_retries, base_delay_ms);
}

}  // namespace login
