#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "login/models.hpp"
#include "login/rng.hpp"

using namespace login;

namespace {

TextAttributedGraph make_graph(int n, const std::vector<int>& labels, const EdgeList& edges,
                               int classes) {
  std::vector<std::string> texts(n), names;
  for (int i = 0; i < n; ++i) texts[i] = "node " + std::to_string(i);
  for (int k = 0; k < classes; ++k) names.push_back("class" + std::to_string(k));
  std::vector<Split> split(n, Split::Train);
  return TextAttributedGraph::build(texts, labels, names, split, {}, edges);
}

struct RandomCase {
  TextAttributedGraph graph;
  Matrix x;
  std::vector<int> train_rows;
  std::vector<int> labels;
};

RandomCase random_case(int n, int dim, int classes, Rng& rng, double edge_p = 0.2) {
  std::vector<int> labels(n);
  for (int& l : labels) l = rng.uniform_int(classes);
  EdgeList edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(edge_p)) edges.emplace_back(u, v);
  RandomCase c{make_graph(n, labels, edges, classes), Matrix(n, dim), {}, labels};
  for (double& v : c.x.data) v = rng.normal();
  for (int i = 0; i < n; ++i)
    if (rng.bernoulli(0.7)) c.train_rows.push_back(i);
  if (c.train_rows.empty()) c.train_rows.push_back(0);
  return c;
}

Matrix eval_probs(const GnnModel& m, const TextAttributedGraph& g, const Matrix& x) {
  GraphOperators ops = build_operators(g);
  ModelInputs in = build_inputs(m, ops, x);
  return forward(m, ops, in, DropoutMask::ones(m.hidden_width()), false);
}

}  // namespace

TEST_CASE("GCN normalization on a 2-node path is the all-half matrix") {
  auto g = make_graph(2, {0, 1}, {{0, 1}}, 2);
  GraphOperators ops = build_operators(g);
  Matrix identity(2, 2, 0.0);
  identity.at(0, 0) = identity.at(1, 1) = 1.0;
  Matrix a_hat;
  kernels::spmm(ops.gcn, identity, a_hat);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(a_hat.at(i, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("MLP ignores adjacency entirely") {
  Rng rng(5);
  RandomCase c = random_case(12, 6, 3, rng);
  auto edgeless = make_graph(12, c.labels, {}, 3);
  GnnModel m = init_model(Arch::Mlp, 6, 8, 3, 0.0, {}, Rng(77));
  CHECK(eval_probs(m, c.graph, c.x).data == eval_probs(m, edgeless, c.x).data);
}

TEST_CASE("MixHop with powers {0} reduces to the MLP forward") {
  Rng rng(6);
  RandomCase c = random_case(10, 5, 2, rng);
  GnnModel mix = init_model(Arch::MixHop, 5, 8, 2, 0.0, {0}, Rng(123));
  GnnModel mlp = init_model(Arch::Mlp, 5, 8, 2, 0.0, {}, Rng(999));
  REQUIRE(mix.hidden_width() == mlp.hidden_width());
  for (std::size_t p = 0; p < mlp.params.count(); ++p)
    mlp.params.tensors[p] = mix.params.tensors[p];
  CHECK(eval_probs(mix, c.graph, c.x).data == eval_probs(mlp, c.graph, c.x).data);
}

TEST_CASE("GraphSAGE on an edgeless graph uses only the self path") {
  Rng rng(7);
  int n = 8, dim = 4, classes = 3;
  RandomCase c = random_case(n, dim, classes, rng);
  auto edgeless = make_graph(n, c.labels, {}, classes);
  GnnModel m = init_model(Arch::GraphSage, dim, 6, classes, 0.0, {}, Rng(55));
  Matrix probs = eval_probs(m, edgeless, c.x);

  // reference: relu(x W1s + b1) W2s + b2, softmax
  const Matrix& w1 = m.params.tensors[0];
  const Matrix& b1 = m.params.tensors[2];
  const Matrix& w2 = m.params.tensors[3];
  const Matrix& b2 = m.params.tensors[5];
  for (int i = 0; i < n; ++i) {
    std::vector<double> h(6, 0.0);
    for (int j = 0; j < 6; ++j) {
      for (int k = 0; k < dim; ++k) h[j] += c.x.at(i, k) * w1.at(k, j);
      h[j] = std::max(0.0, h[j] + b1.at(0, j));
    }
    std::vector<double> z(classes, 0.0);
    double mx = -1e300;
    for (int cc = 0; cc < classes; ++cc) {
      for (int j = 0; j < 6; ++j) z[cc] += h[j] * w2.at(j, cc);
      z[cc] += b2.at(0, cc);
      mx = std::max(mx, z[cc]);
    }
    double sum = 0.0;
    for (int cc = 0; cc < classes; ++cc) sum += std::exp(z[cc] - mx);
    for (int cc = 0; cc < classes; ++cc)
      CHECK(probs.at(i, cc) == doctest::Approx(std::exp(z[cc] - mx) / sum).epsilon(1e-10));
  }
}

TEST_CASE("forward output is row-stochastic for every architecture") {
  Rng rng(8);
  RandomCase c = random_case(15, 7, 4, rng);
  for (Arch arch : {Arch::Mlp, Arch::Gcn, Arch::GraphSage, Arch::MixHop}) {
    GnnModel m = init_model(arch, 7, 9, 4, 0.0, {0, 1, 2}, Rng(42));
    Matrix probs = eval_probs(m, c.graph, c.x);
    REQUIRE(probs.rows == 15);
    REQUIRE(probs.cols == 4);
    for (int i = 0; i < probs.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < probs.cols; ++j) {
        sum += probs.at(i, j);
        CHECK(probs.at(i, j) >= 0.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("graph architectures are permutation equivariant") {
  Rng rng(9);
  int n = 20, dim = 5, classes = 3;
  RandomCase c = random_case(n, dim, classes, rng);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

  std::vector<int> plabels(n);
  Matrix px(n, dim);
  EdgeList pedges;
  for (int i = 0; i < n; ++i) {
    plabels[perm[i]] = c.labels[i];
    for (int d = 0; d < dim; ++d) px.at(perm[i], d) = c.x.at(i, d);
  }
  for (auto [u, v] : c.graph.undirected_edges()) pedges.emplace_back(perm[u], perm[v]);
  auto pg = make_graph(n, plabels, pedges, classes);

  for (Arch arch : {Arch::Gcn, Arch::GraphSage, Arch::MixHop}) {
    GnnModel m = init_model(arch, dim, 6, classes, 0.0, {0, 1, 2}, Rng(4242));
    Matrix base = eval_probs(m, c.graph, c.x);
    Matrix permuted = eval_probs(m, pg, px);
    for (int i = 0; i < n; ++i)
      for (int cc = 0; cc < classes; ++cc)
        CHECK(permuted.at(perm[i], cc) == doctest::Approx(base.at(i, cc)).epsilon(1e-9));
  }
}

TEST_CASE("forward with theta 0 is bit-deterministic across calls") {
  Rng rng(10);
  RandomCase c = random_case(12, 6, 3, rng);
  GnnModel m = init_model(Arch::Gcn, 6, 8, 3, 0.0, {}, Rng(31));
  CHECK(eval_probs(m, c.graph, c.x).data == eval_probs(m, c.graph, c.x).data);
}

TEST_CASE("predict_labels") {
  Matrix one_hot(2, 3, 0.0);
  one_hot.at(0, 2) = 1.0;
  one_hot.at(1, 0) = 1.0;
  CHECK(predict_labels(one_hot) == std::vector<int>{2, 0});

  Matrix tie(1, 2, 0.5);
  CHECK(predict_labels(tie) == std::vector<int>{0});  // documented tie rule

  Rng rng(12);
  Matrix random(30, 6);
  for (double& v : random.data) v = rng.uniform01();
  std::vector<int> got = predict_labels(random);
  for (int i = 0; i < 30; ++i) {
    int best = 0;
    for (int j = 0; j < 6; ++j)
      if (random.at(i, j) > random.at(i, best)) best = j;
    CHECK(got[i] == best);
  }
}

TEST_CASE("accuracy") {
  std::vector<int> truth{0, 1, 2, 1};
  CHECK(accuracy({0, 1, 2, 1}, truth, {0, 1, 2, 3}) == 1.0);
  CHECK(accuracy({1, 0, 1, 0}, truth, {0, 1, 2, 3}) == 0.0);
  CHECK(accuracy({0, 1, 2, 0}, truth, {0, 1, 2, 3}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(accuracy({0}, {0}, {}), LoginError);
}

TEST_CASE("analytic gradients match finite differences on a small GCN") {
  Rng rng(14);
  RandomCase c = random_case(10, 4, 3, rng);
  GnnModel m = init_model(Arch::Gcn, 4, 5, 3, 0.35, {}, Rng(77));
  GraphOperators ops = build_operators(c.graph);
  std::vector<DropoutMask> masks;
  for (int t = 0; t < 2; ++t)
    masks.push_back(DropoutMask::sample(m.hidden_width(), m.dropout, Rng::derive(5, {(unsigned)t})));
  double err = grad_check(m, ops, c.x, masks, c.train_rows, c.labels, 60);
  CHECK(err < 1e-4);
}

TEST_CASE("checkpoints round-trip") {
  Rng rng(15);
  RandomCase c = random_case(9, 5, 3, rng);
  GnnModel m = init_model(Arch::MixHop, 5, 9, 3, 0.25, {0, 1, 2}, Rng(21));
  std::string path = "build/test_checkpoint.json";
  save_model(path, m);
  GnnModel back = load_model(path);
  CHECK(back.arch == m.arch);
  CHECK(back.hidden == m.hidden);
  CHECK(back.dropout == m.dropout);
  CHECK(back.powers == m.powers);
  REQUIRE(back.params.count() == m.params.count());
  for (std::size_t p = 0; p < m.params.count(); ++p)
    CHECK(back.params.tensors[p].data == m.params.tensors[p].data);
  CHECK(eval_probs(back, c.graph, c.x).data == eval_probs(m, c.graph, c.x).data);
  std::remove(path.c_str());
}
