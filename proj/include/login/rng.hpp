// Seeded RNG with platform-independent output.
//
// std::mt19937_64 is fully specified by the standard, but the distribution
// adaptors are not; the mappings below are written out so that a given seed
// produces the same stream on every platform. Streams are derived from a
// base seed plus a path of tags so parallel samplers never share state.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace login {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derive an independent stream from (seed, path...). Tag strings are
  // hashed so call sites read as Rng::derive(seed, {"mask", epoch, t}).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = seed;
    for (std::uint64_t p : path) {
      s = splitmix64(s) ^ p;
      s = splitmix64(s);
    }
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  // 53-bit mantissa mapping into [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // [0, n); modulo bias is irrelevant at the sizes used here.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t tag(std::string_view s) { return fnv1a64(s); }

// Stream-seed derivation for pipeline stages: (seed, stage name, round).
inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view name,
                                 std::uint64_t k = 0) {
  std::uint64_t s = seed;
  s = splitmix64(s) ^ fnv1a64(name);
  s = splitmix64(s) ^ k;
  return splitmix64(s);
}

}  // namespace login
