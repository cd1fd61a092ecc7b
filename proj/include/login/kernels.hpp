// Dense and sparse compute kernels.
//
// Every kernel comes in two forms: a plain serial reference under
// login::kernels::serial, and an OpenMP row-parallel version behind the
// dispatching wrappers in login::kernels. Both partition work identically
// (one output row per iteration, serial inner accumulation; scalar
// reductions combine per-row partials in index order), so the two paths
// produce bit-identical results regardless of thread count. Tests assert
// exact equality and the bench tool compares throughput.
#pragma once

#include <cstdint>
#include <vector>

#include "login/matrix.hpp"

namespace login::kernels {

enum class Exec { Serial, Parallel };

// Process-wide default; LOGIN_SERIAL=1 in the environment forces Serial.
Exec default_exec();
void set_default_exec(Exec e);

// Compressed sparse row; values are the operator weights.
struct Csr {
  int rows = 0;
  int cols = 0;
  std::vector<int> offsets;  // rows + 1
  std::vector<int> index;
  std::vector<double> values;
};

Csr csr_transpose(const Csr& a);

namespace serial {
void gemm(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_at_b(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& out);
void spmm(const Csr& a, const Matrix& x, Matrix& out);
void add_bias(Matrix& m, const std::vector<double>& bias);
void relu(Matrix& m);
void relu_backward(const Matrix& pre, Matrix& grad);
void scale_columns(Matrix& m, const std::vector<double>& scale);
void softmax_rows(Matrix& m);
void variance_scores(const std::vector<Matrix>& samples, std::vector<double>& out);
void mean_of(const std::vector<Matrix>& samples, Matrix& out);
double sum_sq(const Matrix& m);
void axpy(double alpha, const Matrix& x, Matrix& y);  // y += alpha * x
}  // namespace serial

// out = a * b
void gemm(const Matrix& a, const Matrix& b, Matrix& out, Exec e = default_exec());
// out = a^T * b
void gemm_at_b(const Matrix& a, const Matrix& b, Matrix& out, Exec e = default_exec());
// out = a * b^T
void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& out, Exec e = default_exec());
// out = A * x for sparse A
void spmm(const Csr& a, const Matrix& x, Matrix& out, Exec e = default_exec());
void add_bias(Matrix& m, const std::vector<double>& bias, Exec e = default_exec());
void relu(Matrix& m, Exec e = default_exec());
// grad *= 1[pre > 0]
void relu_backward(const Matrix& pre, Matrix& grad, Exec e = default_exec());
// column-wise scaling (dropout forward and backward share it)
void scale_columns(Matrix& m, const std::vector<double>& scale, Exec e = default_exec());
// numerically stable row softmax
void softmax_rows(Matrix& m, Exec e = default_exec());
// per-node predictive variance: population variance per class, summed over classes
void variance_scores(const std::vector<Matrix>& samples, std::vector<double>& out,
                     Exec e = default_exec());
void mean_of(const std::vector<Matrix>& samples, Matrix& out, Exec e = default_exec());
double sum_sq(const Matrix& m, Exec e = default_exec());
void axpy(double alpha, const Matrix& x, Matrix& y, Exec e = default_exec());

double dot(const double* a, const double* b, int n);
double norm2(const double* a, int n);
// cosine of two feature rows; zero vectors map to 0
double cosine(const double* a, const double* b, int n);

}  // namespace login::kernels
