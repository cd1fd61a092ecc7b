// The four baseline architectures trained inside the pipeline, expressed as
// aggregate/update layers with hand-derived gradients.
//
// All models are two layers deep with a ReLU hidden layer and column dropout
// on the hidden activations:
//   MLP      z1 = X W1,                z2 = Hd W2
//   GCN      z1 = (A_hat X) W1,        z2 = (A_hat Hd) W2
//            A_hat = D~^{-1/2} (A + I) D~^{-1/2}
//   SAGE     z1 = X W1s + (P X) W1n,   z2 = Hd W2s + (P Hd) W2n
//            P = row-normalized adjacency, degree-0 rows stay zero
//   MixHop   z1 = concat_p (A_hat^p X) W1p,  z2 = Hd W2   (dense head)
// followed by a softmax head. Biases are added everywhere.
#pragma once

#include <string>
#include <vector>

#include "login/graph.hpp"
#include "login/kernels.hpp"
#include "login/nn.hpp"

namespace login {

enum class Arch { Mlp, Gcn, GraphSage, MixHop };

const char* arch_name(Arch a);
Arch arch_from_name(const std::string& name);

struct GnnModel {
  Arch arch = Arch::Gcn;
  int in_dim = 0;
  int hidden = 64;
  int classes = 0;
  double dropout = 0.5;
  std::vector<int> powers = {0, 1, 2};  // MixHop only
  ModelParameters params;

  // width of the hidden activation row (MixHop: sum of per-power widths)
  int hidden_width() const;
};

// Glorot-uniform weights, zero biases.
GnnModel init_model(Arch arch, int in_dim, int hidden, int classes, double dropout,
                    const std::vector<int>& powers, Rng rng);

// Normalized adjacency operators, built once per graph.
struct GraphOperators {
  kernels::Csr gcn;     // symmetric renormalized, with self-loops
  kernels::Csr sage;    // row-normalized mean aggregator, no self-loops
  kernels::Csr sage_t;  // its transpose, for backprop
};

GraphOperators build_operators(const TextAttributedGraph& g);

// Constant per-(graph, features) transforms shared by every forward pass.
struct ModelInputs {
  const Matrix* x = nullptr;
  Matrix gcn_x;                  // A_hat X
  Matrix sage_x;                 // P X
  std::vector<Matrix> power_x;   // A_hat^p X per MixHop power, aligned to powers
};

ModelInputs build_inputs(const GnnModel& model, const GraphOperators& ops, const Matrix& x);

// Row-stochastic N x C class probabilities. `active_dropout` applies the
// mask (training / MC sampling); otherwise the mask is ignored.
Matrix forward(const GnnModel& model, const GraphOperators& ops, const ModelInputs& in,
               const DropoutMask& mask, bool active_dropout);

struct LossAndGrads {
  double loss = 0.0;
  ModelParameters grads;
  std::vector<Matrix> sample_probs;
};

// Eq.-style MC loss over T fixed masks plus its analytic gradient.
LossAndGrads loss_and_grads(const GnnModel& model, const GraphOperators& ops,
                            const ModelInputs& in, const std::vector<DropoutMask>& masks,
                            const std::vector<int>& train_rows, const std::vector<int>& labels);

// argmax per row; ties break toward the lowest class index
std::vector<int> predict_labels(const Matrix& probs);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                const std::vector<int>& mask_rows);

// Central finite differences of the MC loss against the analytic gradient,
// sampling up to max_coords coordinates per tensor. Returns the max relative
// error. Masks must be fixed for the comparison to make sense.
double grad_check(const GnnModel& model, const GraphOperators& ops, const Matrix& x,
                  const std::vector<DropoutMask>& masks, const std::vector<int>& train_rows,
                  const std::vector<int>& labels, int max_coords = 200, double h = 1e-5);

// Text checkpoint container: architecture tag, widths, dropout, powers, and
// flat parameter arrays with shapes.
void save_model(const std::string& path, const GnnModel& model);
GnnModel load_model(const std::string& path);

}  // namespace login
