// Minimal dense NN kernel: dropout masks, parameter containers, the
// MC-dropout training loss, and optimizer steps. Gradients for whole models
// are hand-derived in models.cpp; this layer holds the shared pieces.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "login/matrix.hpp"
#include "login/rng.hpp"

namespace login {

// Column mask over hidden units: a unit is on or off for the whole pass.
// Entries are 0/1; the forward scaling divides kept columns by keep_prob
// (inverted dropout) so expected activations match the mask-free network.
struct DropoutMask {
  double keep_prob = 1.0;  // 1 - theta
  std::vector<std::uint8_t> mask;
  std::uint64_t rng_seed = 0;

  static DropoutMask sample(int width, double theta, Rng rng, std::uint64_t seed_tag = 0);
  static DropoutMask ones(int width);

  int width() const { return static_cast<int>(mask.size()); }
  // per-column multiplier: mask_j / keep_prob
  std::vector<double> scaling() const;
};

// x with masked columns zeroed and kept columns rescaled. `active` is true
// during training and during MC sampling (MC dropout keeps dropout on);
// inactive calls return x unchanged.
Matrix forward_dropout(const Matrix& x, const DropoutMask& mask, bool active);

// Ordered list of named weight/bias tensors.
struct ModelParameters {
  std::vector<std::string> names;
  std::vector<Matrix> tensors;

  void add(const std::string& name, Matrix m) {
    names.push_back(name);
    tensors.push_back(std::move(m));
  }
  std::size_t count() const { return tensors.size(); }
  double sq_norm() const;
  bool all_finite() const;
  ModelParameters zeros_like() const;
};

// Loss of Monte-Carlo dropout training over T prediction samples:
//   -(1/T) sum_t sum_{n in train} log p_t(y_n | n) / |train|
//   + (1-theta)/(2T) * ||params||^2
// Probabilities are clamped at 1e-12 before the log.
double mc_loss(const std::vector<Matrix>& samples, const std::vector<int>& train_rows,
               const std::vector<int>& labels, const ModelParameters& params, double theta);

constexpr double kProbClamp = 1e-12;

enum class OptimizerRule { Sgd, Adam };

struct OptimizerConfig {
  OptimizerRule rule = OptimizerRule::Adam;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Owns the moment state; step() returns the updated parameters.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  ModelParameters step(const ModelParameters& params, const ModelParameters& grads);
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace login
