#include "login/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace login {

using kernels::Csr;

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::Mlp: return "mlp";
    case Arch::Gcn: return "gcn";
    case Arch::GraphSage: return "sage";
    case Arch::MixHop: return "mixhop";
  }
  return "?";
}

Arch arch_from_name(const std::string& name) {
  if (name == "mlp") return Arch::Mlp;
  if (name == "gcn") return Arch::Gcn;
  if (name == "sage" || name == "graphsage") return Arch::GraphSage;
  if (name == "mixhop") return Arch::MixHop;
  fail(ErrorKind::Config, "unknown architecture '" + name + "'");
}

namespace {

int mixhop_block_width(int hidden, int power_count) {
  int w = static_cast<int>(std::lround(static_cast<double>(hidden) / power_count));
  return std::max(1, w);
}

Matrix glorot(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  double limit = std::sqrt(6.0 / (rows + cols));
  for (double& v : m.data) v = (rng.uniform01() * 2.0 - 1.0) * limit;
  return m;
}

Matrix col_sums(const Matrix& m) {
  Matrix out(1, m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) out.data[j] += r[j];
  }
  return out;
}

std::vector<double> bias_of(const Matrix& b) {
  return std::vector<double>(b.data.begin(), b.data.end());
}

}  // namespace

int GnnModel::hidden_width() const {
  if (arch != Arch::MixHop) return hidden;
  return mixhop_block_width(hidden, static_cast<int>(powers.size())) *
         static_cast<int>(powers.size());
}

GnnModel init_model(Arch arch, int in_dim, int hidden, int classes, double dropout,
                    const std::vector<int>& powers, Rng rng) {
  if (hidden < 1) fail(ErrorKind::Config, "hidden width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail(ErrorKind::Config, "dropout must lie in [0,1)");
  GnnModel m;
  m.arch = arch;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.classes = classes;
  m.dropout = dropout;
  m.powers = powers;
  std::sort(m.powers.begin(), m.powers.end());

  switch (arch) {
    case Arch::Mlp:
    case Arch::Gcn:
      m.params.add("W1", glorot(in_dim, hidden, rng));
      m.params.add("b1", Matrix(1, hidden, 0.0));
      m.params.add("W2", glorot(hidden, classes, rng));
      m.params.add("b2", Matrix(1, classes, 0.0));
      break;
    case Arch::GraphSage:
      m.params.add("W1_self", glorot(in_dim, hidden, rng));
      m.params.add("W1_nb", glorot(in_dim, hidden, rng));
      m.params.add("b1", Matrix(1, hidden, 0.0));
      m.params.add("W2_self", glorot(hidden, classes, rng));
      m.params.add("W2_nb", glorot(hidden, classes, rng));
      m.params.add("b2", Matrix(1, classes, 0.0));
      break;
    case Arch::MixHop: {
      if (m.powers.empty()) fail(ErrorKind::Config, "mixhop needs at least one power");
      int bw = mixhop_block_width(hidden, static_cast<int>(m.powers.size()));
      for (int p : m.powers)
        m.params.add("W1_p" + std::to_string(p), glorot(in_dim, bw, rng));
      int cw = bw * static_cast<int>(m.powers.size());
      m.params.add("b1", Matrix(1, cw, 0.0));
      m.params.add("W2", glorot(cw, classes, rng));
      m.params.add("b2", Matrix(1, classes, 0.0));
      break;
    }
  }
  return m;
}

GraphOperators build_operators(const TextAttributedGraph& g) {
  int n = g.node_count();
  GraphOperators ops;

  // GCN: A_hat entries 1/sqrt(d~_i d~_j) for j in N(i) u {i}, d~ = deg + 1
  Csr& a = ops.gcn;
  a.rows = a.cols = n;
  a.offsets.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) a.offsets[i + 1] = a.offsets[i] + g.degree(i) + 1;
  a.index.resize(a.offsets[n]);
  a.values.resize(a.offsets[n]);
  for (int i = 0; i < n; ++i) {
    double di = std::sqrt(static_cast<double>(g.degree(i) + 1));
    int pos = a.offsets[i];
    bool self_done = false;
    for (int j : g.neighbors(i)) {
      if (!self_done && i < j) {  // keep column indices sorted
        a.index[pos] = i;
        a.values[pos] = 1.0 / (di * di);
        ++pos;
        self_done = true;
      }
      double dj = std::sqrt(static_cast<double>(g.degree(j) + 1));
      a.index[pos] = j;
      a.values[pos] = 1.0 / (di * dj);
      ++pos;
    }
    if (!self_done) {
      a.index[pos] = i;
      a.values[pos] = 1.0 / (di * di);
      ++pos;
    }
  }

  // SAGE mean: 1/deg rows; degree-0 rows stay empty (zero neighbor term)
  Csr& p = ops.sage;
  p.rows = p.cols = n;
  p.offsets.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) p.offsets[i + 1] = p.offsets[i] + g.degree(i);
  p.index.resize(p.offsets[n]);
  p.values.resize(p.offsets[n]);
  for (int i = 0; i < n; ++i) {
    int pos = p.offsets[i];
    double inv = g.degree(i) > 0 ? 1.0 / g.degree(i) : 0.0;
    for (int j : g.neighbors(i)) {
      p.index[pos] = j;
      p.values[pos] = inv;
      ++pos;
    }
  }
  ops.sage_t = kernels::csr_transpose(p);
  return ops;
}

ModelInputs build_inputs(const GnnModel& model, const GraphOperators& ops, const Matrix& x) {
  ModelInputs in;
  in.x = &x;
  switch (model.arch) {
    case Arch::Mlp:
      break;
    case Arch::Gcn:
      kernels::spmm(ops.gcn, x, in.gcn_x);
      break;
    case Arch::GraphSage:
      kernels::spmm(ops.sage, x, in.sage_x);
      break;
    case Arch::MixHop: {
      int max_p = model.powers.back();
      std::vector<const Matrix*> by_power(max_p + 1, nullptr);
      std::vector<Matrix> chain;
      chain.reserve(max_p + 1);
      const Matrix* prev = &x;
      for (int p = 1; p <= max_p; ++p) {
        Matrix next;
        kernels::spmm(ops.gcn, *prev, next);
        chain.push_back(std::move(next));
        prev = &chain.back();
      }
      for (int p : model.powers) {
        if (p == 0)
          in.power_x.push_back(x);
        else
          in.power_x.push_back(chain[p - 1]);
      }
      break;
    }
  }
  return in;
}

namespace {

struct Trace {
  Matrix z1;      // pre-activation, hidden layer
  Matrix hd;      // post ReLU + dropout scaling
  Matrix layer2_aux;  // GCN: A_hat Hd; SAGE: P Hd
  Matrix probs;
};

Trace forward_trace(const GnnModel& m, const GraphOperators& ops, const ModelInputs& in,
                    const DropoutMask& mask, bool active) {
  const ModelParameters& w = m.params;
  Trace tr;
  switch (m.arch) {
    case Arch::Mlp:
      kernels::gemm(*in.x, w.tensors[0], tr.z1);
      kernels::add_bias(tr.z1, bias_of(w.tensors[1]));
      break;
    case Arch::Gcn:
      kernels::gemm(in.gcn_x, w.tensors[0], tr.z1);
      kernels::add_bias(tr.z1, bias_of(w.tensors[1]));
      break;
    case Arch::GraphSage: {
      kernels::gemm(*in.x, w.tensors[0], tr.z1);
      Matrix nb;
      kernels::gemm(in.sage_x, w.tensors[1], nb);
      kernels::axpy(1.0, nb, tr.z1);
      kernels::add_bias(tr.z1, bias_of(w.tensors[2]));
      break;
    }
    case Arch::MixHop: {
      int k = static_cast<int>(m.powers.size());
      int bw = m.hidden_width() / k;
      tr.z1 = Matrix(in.x->rows, m.hidden_width());
      Matrix block;
      for (int b = 0; b < k; ++b) {
        kernels::gemm(in.power_x[b], m.params.tensors[b], block);
        for (int i = 0; i < block.rows; ++i) {
          const double* src = block.row(i);
          double* dst = tr.z1.row(i) + b * bw;
          std::copy(src, src + bw, dst);
        }
      }
      kernels::add_bias(tr.z1, bias_of(w.tensors[k]));
      break;
    }
  }

  Matrix h = tr.z1;
  kernels::relu(h);
  tr.hd = forward_dropout(h, mask, active && m.dropout > 0.0);

  Matrix z2;
  switch (m.arch) {
    case Arch::Mlp:
      kernels::gemm(tr.hd, w.tensors[2], z2);
      kernels::add_bias(z2, bias_of(w.tensors[3]));
      break;
    case Arch::Gcn:
      kernels::spmm(ops.gcn, tr.hd, tr.layer2_aux);
      kernels::gemm(tr.layer2_aux, w.tensors[2], z2);
      kernels::add_bias(z2, bias_of(w.tensors[3]));
      break;
    case Arch::GraphSage: {
      kernels::gemm(tr.hd, w.tensors[3], z2);
      kernels::spmm(ops.sage, tr.hd, tr.layer2_aux);
      Matrix nb;
      kernels::gemm(tr.layer2_aux, w.tensors[4], nb);
      kernels::axpy(1.0, nb, z2);
      kernels::add_bias(z2, bias_of(w.tensors[5]));
      break;
    }
    case Arch::MixHop: {
      int k = static_cast<int>(m.powers.size());
      kernels::gemm(tr.hd, w.tensors[k + 1], z2);
      kernels::add_bias(z2, bias_of(w.tensors[k + 2]));
      break;
    }
  }
  kernels::softmax_rows(z2);
  tr.probs = std::move(z2);
  return tr;
}

}  // namespace

Matrix forward(const GnnModel& model, const GraphOperators& ops, const ModelInputs& in,
               const DropoutMask& mask, bool active_dropout) {
  if (in.x->cols != model.in_dim) fail(ErrorKind::Numeric, "feature dim does not match model");
  if (active_dropout && model.dropout > 0.0 && mask.width() != model.hidden_width())
    fail(ErrorKind::Numeric, "dropout mask width does not match hidden width");
  return forward_trace(model, ops, in, mask, active_dropout).probs;
}

LossAndGrads loss_and_grads(const GnnModel& model, const GraphOperators& ops,
                            const ModelInputs& in, const std::vector<DropoutMask>& masks,
                            const std::vector<int>& train_rows, const std::vector<int>& labels) {
  if (masks.empty()) fail(ErrorKind::Numeric, "loss_and_grads: no dropout masks");
  if (train_rows.empty()) fail(ErrorKind::Numeric, "loss_and_grads: empty train set");
  const ModelParameters& w = model.params;
  int t_count = static_cast<int>(masks.size());
  double inv = 1.0 / (static_cast<double>(t_count) * static_cast<double>(train_rows.size()));

  LossAndGrads out;
  out.grads = w.zeros_like();
  double nll = 0.0;

  Matrix gW_tmp;
  for (int t = 0; t < t_count; ++t) {
    Trace tr = forward_trace(model, ops, in, masks[t], model.dropout > 0.0);

    for (int n : train_rows) {
      double p = tr.probs.at(n, labels[n]);
      nll -= std::log(std::max(p, kProbClamp));
    }

    // dZ2 = (P - Y) * inv on train rows
    Matrix dz2(tr.probs.rows, tr.probs.cols, 0.0);
    for (int n : train_rows) {
      const double* pr = tr.probs.row(n);
      double* dr = dz2.row(n);
      for (int c = 0; c < tr.probs.cols; ++c) dr[c] = pr[c] * inv;
      dr[labels[n]] -= inv;
    }

    Matrix dhd;
    switch (model.arch) {
      case Arch::Mlp: {
        kernels::gemm_at_b(tr.hd, dz2, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[2]);
        kernels::axpy(1.0, col_sums(dz2), out.grads.tensors[3]);
        kernels::gemm_a_bt(dz2, w.tensors[2], dhd);
        break;
      }
      case Arch::Gcn: {
        kernels::gemm_at_b(tr.layer2_aux, dz2, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[2]);
        kernels::axpy(1.0, col_sums(dz2), out.grads.tensors[3]);
        Matrix dha;
        kernels::gemm_a_bt(dz2, w.tensors[2], dha);
        kernels::spmm(ops.gcn, dha, dhd);  // A_hat is symmetric
        break;
      }
      case Arch::GraphSage: {
        kernels::gemm_at_b(tr.hd, dz2, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[3]);
        kernels::gemm_at_b(tr.layer2_aux, dz2, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[4]);
        kernels::axpy(1.0, col_sums(dz2), out.grads.tensors[5]);
        kernels::gemm_a_bt(dz2, w.tensors[3], dhd);
        Matrix dnb, dnb_in;
        kernels::gemm_a_bt(dz2, w.tensors[4], dnb);
        kernels::spmm(ops.sage_t, dnb, dnb_in);
        kernels::axpy(1.0, dnb_in, dhd);
        break;
      }
      case Arch::MixHop: {
        int k = static_cast<int>(model.powers.size());
        kernels::gemm_at_b(tr.hd, dz2, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[k + 1]);
        kernels::axpy(1.0, col_sums(dz2), out.grads.tensors[k + 2]);
        kernels::gemm_a_bt(dz2, w.tensors[k + 1], dhd);
        break;
      }
    }

    // back through dropout scaling and ReLU
    if (model.dropout > 0.0) kernels::scale_columns(dhd, masks[t].scaling());
    kernels::relu_backward(tr.z1, dhd);
    Matrix& dz1 = dhd;

    switch (model.arch) {
      case Arch::Mlp: {
        kernels::gemm_at_b(*in.x, dz1, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[0]);
        kernels::axpy(1.0, col_sums(dz1), out.grads.tensors[1]);
        break;
      }
      case Arch::Gcn: {
        kernels::gemm_at_b(in.gcn_x, dz1, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[0]);
        kernels::axpy(1.0, col_sums(dz1), out.grads.tensors[1]);
        break;
      }
      case Arch::GraphSage: {
        kernels::gemm_at_b(*in.x, dz1, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[0]);
        kernels::gemm_at_b(in.sage_x, dz1, gW_tmp);
        kernels::axpy(1.0, gW_tmp, out.grads.tensors[1]);
        kernels::axpy(1.0, col_sums(dz1), out.grads.tensors[2]);
        break;
      }
      case Arch::MixHop: {
        int k = static_cast<int>(model.powers.size());
        int bw = model.hidden_width() / k;
        Matrix dblock(dz1.rows, bw);
        for (int b = 0; b < k; ++b) {
          for (int i = 0; i < dz1.rows; ++i) {
            const double* src = dz1.row(i) + b * bw;
            std::copy(src, src + bw, dblock.row(i));
          }
          kernels::gemm_at_b(in.power_x[b], dblock, gW_tmp);
          kernels::axpy(1.0, gW_tmp, out.grads.tensors[b]);
        }
        kernels::axpy(1.0, col_sums(dz1), out.grads.tensors[k]);
        break;
      }
    }

    out.sample_probs.push_back(std::move(tr.probs));
  }

  nll *= inv;
  double reg_coef = (1.0 - model.dropout) / t_count;
  for (std::size_t p = 0; p < w.count(); ++p)
    kernels::axpy(reg_coef, w.tensors[p], out.grads.tensors[p]);
  out.loss = nll + reg_coef / 2.0 * w.sq_norm();
  return out;
}

std::vector<int> predict_labels(const Matrix& probs) {
  std::vector<int> out(probs.rows);
  for (int i = 0; i < probs.rows; ++i) {
    const double* r = probs.row(i);
    int best = 0;
    for (int j = 1; j < probs.cols; ++j)
      if (r[j] > r[best]) best = j;
    out[i] = best;
  }
  return out;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                const std::vector<int>& mask_rows) {
  if (mask_rows.empty()) fail(ErrorKind::Numeric, "accuracy: empty node mask");
  int hit = 0;
  for (int n : mask_rows)
    if (pred[n] == truth[n]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(mask_rows.size());
}

double grad_check(const GnnModel& model, const GraphOperators& ops, const Matrix& x,
                  const std::vector<DropoutMask>& masks, const std::vector<int>& train_rows,
                  const std::vector<int>& labels, int max_coords, double h) {
  ModelInputs in = build_inputs(model, ops, x);
  LossAndGrads ag = loss_and_grads(model, ops, in, masks, train_rows, labels);
  if (!ag.grads.all_finite()) fail(ErrorKind::Numeric, "grad_check: non-finite gradient");

  GnnModel probe = model;
  auto loss_at = [&](void) {
    ModelInputs pin = build_inputs(probe, ops, x);
    std::vector<Matrix> samples;
    samples.reserve(masks.size());
    for (const DropoutMask& m : masks)
      samples.push_back(forward(probe, ops, pin, m, probe.dropout > 0.0));
    return mc_loss(samples, train_rows, labels, probe.params, probe.dropout);
  };

  double worst = 0.0;
  for (std::size_t p = 0; p < model.params.count(); ++p) {
    const Matrix& w = model.params.tensors[p];
    std::size_t total = w.data.size();
    std::size_t stride = std::max<std::size_t>(1, total / static_cast<std::size_t>(max_coords));
    for (std::size_t i = 0; i < total; i += stride) {
      double saved = probe.params.tensors[p].data[i];
      probe.params.tensors[p].data[i] = saved + h;
      double up = loss_at();
      probe.params.tensors[p].data[i] = saved - h;
      double down = loss_at();
      probe.params.tensors[p].data[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double an = ag.grads.tensors[p].data[i];
      double rel = std::abs(an - fd) / std::max(1e-6, std::abs(an) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

void save_model(const std::string& path, const GnnModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "login-gnn-checkpoint";
  j["version"] = 1;
  j["arch"] = arch_name(model.arch);
  j["in_dim"] = model.in_dim;
  j["hidden"] = model.hidden;
  j["classes"] = model.classes;
  j["dropout"] = model.dropout;
  j["powers"] = model.powers;
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < model.params.count(); ++p) {
    const Matrix& t = model.params.tensors[p];
    params.push_back({{"name", model.params.names[p]},
                      {"rows", t.rows},
                      {"cols", t.cols},
                      {"data", t.data}});
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Dataset, "cannot write checkpoint " + path);
  out << j.dump() << "\n";
}

GnnModel load_model(const std::string& path) {
  std::ifstream infile(path);
  if (!infile) fail(ErrorKind::Dataset, "cannot read checkpoint " + path);
  nlohmann::json j = nlohmann::json::parse(infile, nullptr, false);
  if (j.is_discarded() || j.value("format", "") != "login-gnn-checkpoint")
    fail(ErrorKind::Dataset, "not a model checkpoint: " + path);
  GnnModel m;
  m.arch = arch_from_name(j.at("arch").get<std::string>());
  m.in_dim = j.at("in_dim").get<int>();
  m.hidden = j.at("hidden").get<int>();
  m.classes = j.at("classes").get<int>();
  m.dropout = j.at("dropout").get<double>();
  m.powers = j.at("powers").get<std::vector<int>>();
  for (const auto& pj : j.at("params")) {
    Matrix t(pj.at("rows").get<int>(), pj.at("cols").get<int>());
    auto data = pj.at("data").get<std::vector<double>>();
    if (data.size() != t.data.size())
      fail(ErrorKind::Dataset, "checkpoint tensor size mismatch in " + path);
    t.data = std::move(data);
    m.params.add(pj.at("name").get<std::string>(), std::move(t));
  }
  return m;
}

}  // namespace login
