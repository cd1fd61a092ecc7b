#include "login/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace login::kernels {

namespace {
Exec g_default = [] {
  const char* env = std::getenv("LOGIN_SERIAL");
  return (env && env[0] == '1') ? Exec::Serial : Exec::Parallel;
}();

void check_gemm(const Matrix& a, const Matrix& b, Matrix& out, bool a_transposed) {
  int ar = a_transposed ? a.cols : a.rows;
  int ac = a_transposed ? a.rows : a.cols;
  if (ac != b.rows) fail(ErrorKind::Numeric, "shape mismatch in gemm");
  if (out.rows != ar || out.cols != b.cols) out = Matrix(ar, b.cols);
}
}  // namespace

Exec default_exec() { return g_default; }
void set_default_exec(Exec e) { g_default = e; }

Csr csr_transpose(const Csr& a) {
  Csr t;
  t.rows = a.cols;
  t.cols = a.rows;
  t.offsets.assign(t.rows + 1, 0);
  for (int k = 0; k < static_cast<int>(a.index.size()); ++k) t.offsets[a.index[k] + 1]++;
  for (int i = 0; i < t.rows; ++i) t.offsets[i + 1] += t.offsets[i];
  t.index.resize(a.index.size());
  t.values.resize(a.values.size());
  std::vector<int> cursor(t.offsets.begin(), t.offsets.end() - 1);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
      int j = a.index[k];
      int pos = cursor[j]++;
      t.index[pos] = i;
      t.values[pos] = a.values[k];
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// serial references
// ---------------------------------------------------------------------------

namespace serial {

void gemm(const Matrix& a, const Matrix& b, Matrix& out) {
  check_gemm(a, b, out, false);
  for (int i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    std::fill(o, o + out.cols, 0.0);
    const double* ai = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) o[j] += aik * bk[j];
    }
  }
}

void gemm_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows != b.rows) fail(ErrorKind::Numeric, "shape mismatch in gemm_at_b");
  if (out.rows != a.cols || out.cols != b.cols) out = Matrix(a.cols, b.cols);
  for (int k = 0; k < a.cols; ++k) {
    double* o = out.row(k);
    std::fill(o, o + out.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* bi = b.row(i);
      for (int j = 0; j < b.cols; ++j) o[j] += aik * bi[j];
    }
  }
}

void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.cols) fail(ErrorKind::Numeric, "shape mismatch in gemm_a_bt");
  if (out.rows != a.rows || out.cols != b.rows) out = Matrix(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    const double* ai = a.row(i);
    for (int j = 0; j < b.rows; ++j) o[j] = dot(ai, b.row(j), a.cols);
  }
}

void spmm(const Csr& a, const Matrix& x, Matrix& out) {
  if (a.cols != x.rows) fail(ErrorKind::Numeric, "shape mismatch in spmm");
  if (out.rows != a.rows || out.cols != x.cols) out = Matrix(a.rows, x.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    std::fill(o, o + out.cols, 0.0);
    for (int k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
      double v = a.values[k];
      const double* xr = x.row(a.index[k]);
      for (int j = 0; j < x.cols; ++j) o[j] += v * xr[j];
    }
  }
}

void add_bias(Matrix& m, const std::vector<double>& bias) {
  if (static_cast<int>(bias.size()) != m.cols)
    fail(ErrorKind::Numeric, "shape mismatch in add_bias");
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] += bias[j];
  }
}

void relu(Matrix& m) {
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] = r[j] > 0.0 ? r[j] : 0.0;
  }
}

void relu_backward(const Matrix& pre, Matrix& grad) {
  if (!pre.same_shape(grad)) fail(ErrorKind::Numeric, "shape mismatch in relu_backward");
  for (int i = 0; i < grad.rows; ++i) {
    const double* p = pre.row(i);
    double* g = grad.row(i);
    for (int j = 0; j < grad.cols; ++j)
      if (p[j] <= 0.0) g[j] = 0.0;
  }
}

void scale_columns(Matrix& m, const std::vector<double>& scale) {
  if (static_cast<int>(scale.size()) != m.cols)
    fail(ErrorKind::Numeric, "shape mismatch in scale_columns");
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] *= scale[j];
  }
}

void softmax_rows(Matrix& m) {
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    double mx = r[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int j = 0; j < m.cols; ++j) r[j] /= sum;
  }
}

void variance_scores(const std::vector<Matrix>& samples, std::vector<double>& out) {
  int t_count = static_cast<int>(samples.size());
  if (t_count == 0) fail(ErrorKind::Numeric, "variance_scores: no samples");
  int n = samples[0].rows, c = samples[0].cols;
  for (const Matrix& s : samples)
    if (s.rows != n || s.cols != c) fail(ErrorKind::Numeric, "shape mismatch in variance_scores");
  out.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double score = 0.0;
    for (int j = 0; j < c; ++j) {
      double mean = 0.0;
      for (int t = 0; t < t_count; ++t) mean += samples[t].at(i, j);
      mean /= t_count;
      double var = 0.0;
      for (int t = 0; t < t_count; ++t) {
        double d = samples[t].at(i, j) - mean;
        var += d * d;
      }
      score += var / t_count;
    }
    out[i] = score;
  }
}

void mean_of(const std::vector<Matrix>& samples, Matrix& out) {
  int t_count = static_cast<int>(samples.size());
  if (t_count == 0) fail(ErrorKind::Numeric, "mean_of: no samples");
  int n = samples[0].rows, c = samples[0].cols;
  out = Matrix(n, c);
  for (int i = 0; i < n; ++i) {
    double* o = out.row(i);
    for (int j = 0; j < c; ++j) {
      double acc = 0.0;
      for (int t = 0; t < t_count; ++t) acc += samples[t].at(i, j);
      o[j] = acc / t_count;
    }
  }
}

double sum_sq(const Matrix& m) {
  // row partials combined in index order; the parallel path matches exactly
  double total = 0.0;
  for (int i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    double part = 0.0;
    for (int j = 0; j < m.cols; ++j) part += r[j] * r[j];
    total += part;
  }
  return total;
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  if (!x.same_shape(y)) fail(ErrorKind::Numeric, "shape mismatch in axpy");
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP versions; one output row per iteration keeps them bit-identical to
// the serial references.
// ---------------------------------------------------------------------------

void gemm(const Matrix& a, const Matrix& b, Matrix& out, Exec e) {
  if (e == Exec::Serial) return serial::gemm(a, b, out);
  check_gemm(a, b, out, false);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    std::fill(o, o + out.cols, 0.0);
    const double* ai = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) o[j] += aik * bk[j];
    }
  }
}

void gemm_at_b(const Matrix& a, const Matrix& b, Matrix& out, Exec e) {
  if (e == Exec::Serial) return serial::gemm_at_b(a, b, out);
  if (a.rows != b.rows) fail(ErrorKind::Numeric, "shape mismatch in gemm_at_b");
  if (out.rows != a.cols || out.cols != b.cols) out = Matrix(a.cols, b.cols);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < a.cols; ++k) {
    double* o = out.row(k);
    std::fill(o, o + out.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
      double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* bi = b.row(i);
      for (int j = 0; j < b.cols; ++j) o[j] += aik * bi[j];
    }
  }
}

void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& out, Exec e) {
  if (e == Exec::Serial) return serial::gemm_a_bt(a, b, out);
  if (a.cols != b.cols) fail(ErrorKind::Numeric, "shape mismatch in gemm_a_bt");
  if (out.rows != a.rows || out.cols != b.rows) out = Matrix(a.rows, b.rows);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    const double* ai = a.row(i);
    for (int j = 0; j < b.rows; ++j) o[j] = dot(ai, b.row(j), a.cols);
  }
}

void spmm(const Csr& a, const Matrix& x, Matrix& out, Exec e) {
  if (e == Exec::Serial) return serial::spmm(a, x, out);
  if (a.cols != x.rows) fail(ErrorKind::Numeric, "shape mismatch in spmm");
  if (out.rows != a.rows || out.cols != x.cols) out = Matrix(a.rows, x.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    std::fill(o, o + out.cols, 0.0);
    for (int k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
      double v = a.values[k];
      const double* xr = x.row(a.index[k]);
      for (int j = 0; j < x.cols; ++j) o[j] += v * xr[j];
    }
  }
}

void add_bias(Matrix& m, const std::vector<double>& bias, Exec e) {
  if (e == Exec::Serial) return serial::add_bias(m, bias);
  if (static_cast<int>(bias.size()) != m.cols)
    fail(ErrorKind::Numeric, "shape mismatch in add_bias");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] += bias[j];
  }
}

void relu(Matrix& m, Exec e) {
  if (e == Exec::Serial) return serial::relu(m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] = r[j] > 0.0 ? r[j] : 0.0;
  }
}

void relu_backward(const Matrix& pre, Matrix& grad, Exec e) {
  if (e == Exec::Serial) return serial::relu_backward(pre, grad);
  if (!pre.same_shape(grad)) fail(ErrorKind::Numeric, "shape mismatch in relu_backward");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < grad.rows; ++i) {
    const double* p = pre.row(i);
    double* g = grad.row(i);
    for (int j = 0; j < grad.cols; ++j)
      if (p[j] <= 0.0) g[j] = 0.0;
  }
}

void scale_columns(Matrix& m, const std::vector<double>& scale, Exec e) {
  if (e == Exec::Serial) return serial::scale_columns(m, scale);
  if (static_cast<int>(scale.size()) != m.cols)
    fail(ErrorKind::Numeric, "shape mismatch in scale_columns");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] *= scale[j];
  }
}

void softmax_rows(Matrix& m, Exec e) {
  if (e == Exec::Serial) return serial::softmax_rows(m);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    double mx = r[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int j = 0; j < m.cols; ++j) r[j] /= sum;
  }
}

void variance_scores(const std::vector<Matrix>& samples, std::vector<double>& out, Exec e) {
  if (e == Exec::Serial) return serial::variance_scores(samples, out);
  int t_count = static_cast<int>(samples.size());
  if (t_count == 0) fail(ErrorKind::Numeric, "variance_scores: no samples");
  int n = samples[0].rows, c = samples[0].cols;
  for (const Matrix& s : samples)
    if (s.rows != n || s.cols != c) fail(ErrorKind::Numeric, "shape mismatch in variance_scores");
  out.assign(n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double score = 0.0;
    for (int j = 0; j < c; ++j) {
      double mean = 0.0;
      for (int t = 0; t < t_count; ++t) mean += samples[t].at(i, j);
      mean /= t_count;
      double var = 0.0;
      for (int t = 0; t < t_count; ++t) {
        double d = samples[t].at(i, j) - mean;
        var += d * d;
      }
      score += var / t_count;
    }
    out[i] = score;
  }
}

void mean_of(const std::vector<Matrix>& samples, Matrix& out, Exec e) {
  if (e == Exec::Serial) return serial::mean_of(samples, out);
  int t_count = static_cast<int>(samples.size());
  if (t_count == 0) fail(ErrorKind::Numeric, "mean_of: no samples");
  int n = samples[0].rows, c = samples[0].cols;
  out = Matrix(n, c);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* o = out.row(i);
    for (int j = 0; j < c; ++j) {
      double acc = 0.0;
      for (int t = 0; t < t_count; ++t) acc += samples[t].at(i, j);
      o[j] = acc / t_count;
    }
  }
}

double sum_sq(const Matrix& m, Exec e) {
  if (e == Exec::Serial) return serial::sum_sq(m);
  std::vector<double> partial(m.rows, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    double part = 0.0;
    for (int j = 0; j < m.cols; ++j) part += r[j] * r[j];
    partial[i] = part;
  }
  double total = 0.0;
  for (int i = 0; i < m.rows; ++i) total += partial[i];
  return total;
}

void axpy(double alpha, const Matrix& x, Matrix& y, Exec e) {
  if (e == Exec::Serial) return serial::axpy(alpha, x, y);
  if (!x.same_shape(y)) fail(ErrorKind::Numeric, "shape mismatch in axpy");
  std::int64_t n = static_cast<std::int64_t>(y.data.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y.data[i] += alpha * x.data[i];
}

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm2(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

double cosine(const double* a, const double* b, int n) {
  double na = norm2(a, n);
  double nb = norm2(b, n);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b, n) / (na * nb);
}

}  // namespace login::kernels
