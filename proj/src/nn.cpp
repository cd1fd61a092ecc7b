#include "login/nn.hpp"

#include <cmath>

#include "login/kernels.hpp"

namespace login {

DropoutMask DropoutMask::sample(int width, double theta, Rng rng, std::uint64_t seed_tag) {
  if (theta < 0.0 || theta >= 1.0)
    fail(ErrorKind::Numeric, "dropout rate must lie in [0,1)");
  DropoutMask m;
  m.keep_prob = 1.0 - theta;
  m.rng_seed = seed_tag;
  m.mask.resize(width);
  for (int j = 0; j < width; ++j) m.mask[j] = rng.bernoulli(m.keep_prob) ? 1 : 0;
  return m;
}

DropoutMask DropoutMask::ones(int width) {
  DropoutMask m;
  m.keep_prob = 1.0;
  m.mask.assign(width, 1);
  return m;
}

std::vector<double> DropoutMask::scaling() const {
  std::vector<double> s(mask.size());
  for (std::size_t j = 0; j < mask.size(); ++j)
    s[j] = mask[j] ? 1.0 / keep_prob : 0.0;
  return s;
}

Matrix forward_dropout(const Matrix& x, const DropoutMask& mask, bool active) {
  if (!active) return x;
  if (mask.width() != x.cols)
    fail(ErrorKind::Numeric, "shape mismatch in forward_dropout");
  Matrix out = x;
  kernels::scale_columns(out, mask.scaling());
  return out;
}

double ModelParameters::sq_norm() const {
  double total = 0.0;
  for (const Matrix& t : tensors) total += kernels::sum_sq(t);
  return total;
}

bool ModelParameters::all_finite() const {
  for (const Matrix& t : tensors)
    if (!t.all_finite()) return false;
  return true;
}

ModelParameters ModelParameters::zeros_like() const {
  ModelParameters z;
  z.names = names;
  z.tensors.reserve(tensors.size());
  for (const Matrix& t : tensors) z.tensors.emplace_back(t.rows, t.cols, 0.0);
  return z;
}

double mc_loss(const std::vector<Matrix>& samples, const std::vector<int>& train_rows,
               const std::vector<int>& labels, const ModelParameters& params, double theta) {
  if (samples.empty()) fail(ErrorKind::Numeric, "mc_loss: no samples");
  if (train_rows.empty()) fail(ErrorKind::Numeric, "mc_loss: empty train set");
  int t_count = static_cast<int>(samples.size());
  double nll = 0.0;
  for (const Matrix& probs : samples) {
    for (int n : train_rows) {
      double p = probs.at(n, labels[n]);
      if (p < kProbClamp) p = kProbClamp;
      nll -= std::log(p);
    }
  }
  nll /= static_cast<double>(t_count) * static_cast<double>(train_rows.size());
  double reg = (1.0 - theta) / (2.0 * t_count) * params.sq_norm();
  return nll + reg;
}

ModelParameters Optimizer::step(const ModelParameters& params, const ModelParameters& grads) {
  if (params.count() != grads.count())
    fail(ErrorKind::Numeric, "optimizer_step: parameter/gradient count mismatch");
  if (!grads.all_finite())
    fail(ErrorKind::Numeric, "optimizer_step: non-finite gradient");
  if (m_.empty() && cfg_.rule == OptimizerRule::Adam) {
    for (const Matrix& t : params.tensors) {
      m_.emplace_back(t.rows, t.cols, 0.0);
      v_.emplace_back(t.rows, t.cols, 0.0);
    }
  }
  ModelParameters out = params;
  ++t_;
  for (std::size_t p = 0; p < params.count(); ++p) {
    const Matrix& g = grads.tensors[p];
    Matrix& w = out.tensors[p];
    if (!w.same_shape(g)) fail(ErrorKind::Numeric, "optimizer_step: shape mismatch");
    if (cfg_.rule == OptimizerRule::Sgd) {
      for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] -= cfg_.lr * g.data[i];
      continue;
    }
    Matrix& m = m_[p];
    Matrix& v = v_[p];
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
      v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      w.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  return out;
}

}  // namespace login
