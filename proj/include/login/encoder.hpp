// Text-to-embedding backends behind one interface: a deterministic
// feature-hashing encoder (tests, offline runs) and an OpenAI-compatible
// remote embedding client with its own cache.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "login/matrix.hpp"

namespace login {

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  virtual std::string kind() const = 0;
  virtual int dim() const = 0;
  // one output row per input text, all rows finite
  virtual Matrix encode(const std::vector<std::string>& texts) = 0;
};

// Bag of hashed tokens: each whitespace token contributes a unit Gaussian
// direction seeded by its hash; the sum is normalized. Equal texts map to
// equal unit-norm vectors, and shared tokens pull embeddings together.
std::unique_ptr<EncoderBackend> make_hash_encoder(int dim);

// POST <endpoint>/v1/embeddings; responses cached as line-delimited JSON
// keyed by text hash (same shape as the consult cache).
std::unique_ptr<EncoderBackend> make_remote_encoder(std::string endpoint, std::string model,
                                                    std::string api_token, int dim,
                                                    std::string cache_path, int max_retries = 3,
                                                    int base_delay_ms = 250);

}  // namespace login
