#include <doctest.h>

#include <cmath>

#include "login/kernels.hpp"
#include "login/rng.hpp"

using namespace login;
using kernels::Csr;
using kernels::Exec;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

Csr random_csr(int rows, int cols, double p, Rng& rng) {
  Csr a;
  a.rows = rows;
  a.cols = cols;
  a.offsets.assign(rows + 1, 0);
  std::vector<std::pair<int, int>> entries;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (rng.bernoulli(p)) entries.emplace_back(i, j);
  for (auto [i, j] : entries) a.offsets[i + 1]++;
  for (int i = 0; i < rows; ++i) a.offsets[i + 1] += a.offsets[i];
  std::vector<int> cursor(a.offsets.begin(), a.offsets.end() - 1);
  a.index.resize(entries.size());
  a.values.resize(entries.size());
  for (auto [i, j] : entries) {
    a.index[cursor[i]] = j;
    a.values[cursor[i]] = 0.5 + 0.001 * j;
    ++cursor[i];
  }
  return a;
}

Matrix dense_of(const Csr& a) {
  Matrix m(a.rows, a.cols, 0.0);
  for (int i = 0; i < a.rows; ++i)
    for (int k = a.offsets[i]; k < a.offsets[i + 1]; ++k)
      m.at(i, a.index[k]) += a.values[k];
  return m;
}

}  // namespace

TEST_CASE("parallel kernels match serial references bit for bit") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a = random_matrix(33 + trial, 17, rng);
    Matrix b = random_matrix(17, 21, rng);
    Matrix c = random_matrix(33 + trial, 21, rng);

    Matrix s, p;
    kernels::gemm(a, b, s, Exec::Serial);
    kernels::gemm(a, b, p, Exec::Parallel);
    CHECK(s.data == p.data);

    kernels::gemm_at_b(a, c, s, Exec::Serial);
    kernels::gemm_at_b(a, c, p, Exec::Parallel);
    CHECK(s.data == p.data);

    kernels::gemm_a_bt(c, b, s, Exec::Serial);  // (33+t x 21) * (21 x 17)^T^T
    kernels::gemm_a_bt(c, b, p, Exec::Parallel);
    CHECK(s.data == p.data);

    Csr sp = random_csr(29, 33 + trial, 0.2, rng);
    kernels::spmm(sp, a, s, Exec::Serial);
    kernels::spmm(sp, a, p, Exec::Parallel);
    CHECK(s.data == p.data);

    Matrix sm = a, pm = a;
    kernels::softmax_rows(sm, Exec::Serial);
    kernels::softmax_rows(pm, Exec::Parallel);
    CHECK(sm.data == pm.data);

    CHECK(kernels::sum_sq(a, Exec::Serial) == kernels::sum_sq(a, Exec::Parallel));

    std::vector<Matrix> samples;
    for (int t = 0; t < 4; ++t) samples.push_back(random_matrix(19, 5, rng));
    std::vector<double> vs, vp;
    kernels::variance_scores(samples, vs, Exec::Serial);
    kernels::variance_scores(samples, vp, Exec::Parallel);
    CHECK(vs == vp);
  }
}

TEST_CASE("gemm agrees with a naive triple loop") {
  Rng rng(13);
  Matrix a = random_matrix(8, 6, rng);
  Matrix b = random_matrix(6, 5, rng);
  Matrix out;
  kernels::gemm(a, b, out);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 6; ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(out.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("transposed products agree with explicit transposes") {
  Rng rng(17);
  Matrix a = random_matrix(9, 4, rng);
  Matrix b = random_matrix(9, 7, rng);
  Matrix atb;
  kernels::gemm_at_b(a, b, atb);
  REQUIRE(atb.rows == 4);
  REQUIRE(atb.cols == 7);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 7; ++j) {
      double acc = 0.0;
      for (int i = 0; i < 9; ++i) acc += a.at(i, k) * b.at(i, j);
      CHECK(atb.at(k, j) == doctest::Approx(acc).epsilon(1e-12));
    }

  Matrix c = random_matrix(5, 7, rng);
  Matrix abt;
  kernels::gemm_a_bt(b, c, abt);
  REQUIRE(abt.rows == 9);
  REQUIRE(abt.cols == 5);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 7; ++k) acc += b.at(i, k) * c.at(j, k);
      CHECK(abt.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("spmm matches the densified operator") {
  Rng rng(19);
  Csr a = random_csr(12, 10, 0.3, rng);
  Matrix x = random_matrix(10, 6, rng);
  Matrix sparse_out, dense_out;
  kernels::spmm(a, x, sparse_out);
  kernels::gemm(dense_of(a), x, dense_out);
  for (std::size_t i = 0; i < sparse_out.data.size(); ++i)
    CHECK(sparse_out.data[i] == doctest::Approx(dense_out.data[i]).epsilon(1e-12));
}

TEST_CASE("csr_transpose inverts row/column roles") {
  Rng rng(23);
  Csr a = random_csr(8, 11, 0.25, rng);
  Csr t = kernels::csr_transpose(a);
  Matrix da = dense_of(a), dt = dense_of(t);
  REQUIRE(dt.rows == 11);
  REQUIRE(dt.cols == 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 11; ++j) CHECK(da.at(i, j) == dt.at(j, i));
}

TEST_CASE("softmax rows are stochastic and shift invariant") {
  Rng rng(11);
  Matrix m = random_matrix(40, 9, rng);
  Matrix shifted = m;
  for (double& v : shifted.data) v += 3.5;
  kernels::softmax_rows(m);
  kernels::softmax_rows(shifted);
  for (int i = 0; i < m.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) sum += m.at(i, j);
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (int j = 0; j < m.cols; ++j)
      CHECK(std::abs(m.at(i, j) - shifted.at(i, j)) < 1e-9);
  }
}

TEST_CASE("shape mismatches are rejected") {
  Matrix a(3, 4), b(5, 2), out;
  CHECK_THROWS_AS(kernels::gemm(a, b, out), LoginError);
  CHECK_THROWS_AS(kernels::add_bias(a, {1.0, 2.0}), LoginError);
  Matrix pre(2, 2), grad(3, 2);
  CHECK_THROWS_AS(kernels::relu_backward(pre, grad), LoginError);
}

TEST_CASE("cosine handles zero vectors and scale") {
  std::vector<double> z{0.0, 0.0}, u{1.0, 0.0}, v{0.0, 1.0}, w{1.0, 1.0};
  CHECK(kernels::cosine(z.data(), u.data(), 2) == 0.0);
  CHECK(kernels::cosine(u.data(), u.data(), 2) == doctest::Approx(1.0));
  CHECK(kernels::cosine(u.data(), v.data(), 2) == doctest::Approx(0.0));
  CHECK(kernels::cosine(w.data(), u.data(), 2) == doctest::Approx(0.7071067811865475));
}
