#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "login/graph.hpp"
#include "login/rng.hpp"

using namespace login;

namespace {

TextAttributedGraph make_graph(int n, const std::vector<int>& labels, const EdgeList& edges,
                               int classes = 0) {
  int c = classes;
  for (int l : labels) c = std::max(c, l + 1);
  std::vector<std::string> texts(n), names;
  for (int i = 0; i < n; ++i) texts[i] = "node " + std::to_string(i);
  for (int k = 0; k < c; ++k) names.push_back("class" + std::to_string(k));
  std::vector<Split> split(n, Split::Train);
  return TextAttributedGraph::build(texts, labels, names, split, {}, edges);
}

TextAttributedGraph random_graph(int max_n, Rng& rng, int classes = 3) {
  int n = 2 + rng.uniform_int(max_n - 1);
  std::vector<int> labels(n);
  for (int& l : labels) l = rng.uniform_int(classes);
  EdgeList edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(0.15)) edges.emplace_back(u, v);
  if (edges.empty()) edges.emplace_back(0, 1);
  return make_graph(n, labels, edges, classes);
}

}  // namespace

TEST_CASE("build canonicalizes: symmetric, deduplicated, no self loops") {
  auto g = make_graph(3, {0, 0, 1}, {{0, 1}, {1, 0}, {0, 1}, {2, 2}, {1, 2}});
  CHECK(g.edge_count() == 2);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK(!g.has_edge(2, 2));
  for (int u = 0; u < 3; ++u)
    for (int v : g.neighbors(u)) CHECK(g.has_edge(v, u));
}

TEST_CASE("graph homophily on hand-checked graphs") {
  auto all_same = make_graph(3, {0, 0, 0}, {{0, 1}, {1, 2}});
  CHECK(graph_homophily(all_same) == 1.0);

  auto triangle = make_graph(3, {0, 0, 1}, {{0, 1}, {1, 2}, {0, 2}});
  CHECK(graph_homophily(triangle) == doctest::Approx(1.0 / 3.0));

  auto edgeless = make_graph(2, {0, 1}, {});
  CHECK_THROWS_AS(graph_homophily(edgeless), LoginError);
}

TEST_CASE("node homophily on hand-checked graphs") {
  // center 0 with 4 neighbors, 3 sharing its label
  auto g = make_graph(5, {0, 0, 0, 0, 1}, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  CHECK(node_homophily(g, 0) == doctest::Approx(0.75));
  CHECK(node_homophily(g, 1) == 1.0);
  CHECK(node_homophily(g, 4) == 0.0);

  auto isolated = make_graph(3, {0, 0, 1}, {{0, 1}});
  CHECK_THROWS_AS(node_homophily(isolated, 2), LoginError);
}

TEST_CASE("heterophilic fraction") {
  auto intra = make_graph(4, {0, 0, 0, 0}, {{0, 1}, {1, 2}, {2, 3}});
  CHECK(heterophilic_fraction(intra) == 0.0);

  // star: center label a, leaves label b -> every node heterophilic
  auto star = make_graph(5, {0, 1, 1, 1, 1}, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  CHECK(heterophilic_fraction(star) == 1.0);

  // isolated nodes are excluded from both sides of the ratio
  auto with_isolated = make_graph(3, {0, 1, 0}, {{0, 1}});
  CHECK(heterophilic_fraction(with_isolated) == 1.0);

  auto all_isolated = make_graph(2, {0, 1}, {});
  CHECK_THROWS_AS(heterophilic_fraction(all_isolated), LoginError);
}

TEST_CASE("heterophilic fraction is invariant under class relabeling") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_graph(30, rng);
    double base = heterophilic_fraction(g);
    // swap class ids 0 <-> 1
    std::vector<int> relabeled = g.labels();
    for (int& l : relabeled) l = l == 0 ? 1 : (l == 1 ? 0 : l);
    auto permuted = make_graph(g.node_count(), relabeled, g.undirected_edges(), 3);
    CHECK(heterophilic_fraction(permuted) == base);
  }
}

TEST_CASE("graph homophily equals the degree-weighted mean of node homophily") {
  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_graph(50, rng);
    double weighted = 0.0;
    long long total_degree = 0;
    for (int v = 0; v < g.node_count(); ++v) {
      if (g.degree(v) == 0) continue;
      weighted += g.degree(v) * node_homophily(g, v);
      total_degree += g.degree(v);
    }
    CHECK(graph_homophily(g) == doctest::Approx(weighted / total_degree).epsilon(1e-12));
  }
}

TEST_CASE("two-hop neighborhood on paths") {
  auto path = make_graph(3, {0, 0, 0}, {{0, 1}, {1, 2}});
  auto mid = two_hop_neighborhood(path, 1);
  CHECK(mid.one_hop == std::vector<int>{0, 2});
  CHECK(mid.two_hop.empty());
  auto end = two_hop_neighborhood(path, 0);
  CHECK(end.one_hop == std::vector<int>{1});
  CHECK(end.two_hop == std::vector<int>{2});
}

TEST_CASE("two-hop neighborhood agrees with a BFS oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = random_graph(50, rng);
    int v = rng.uniform_int(g.node_count());
    auto got = two_hop_neighborhood(g, v);

    // oracle: BFS to depth 2
    std::vector<int> dist(g.node_count(), -1);
    dist[v] = 0;
    std::vector<int> frontier{v};
    for (int depth = 0; depth < 2; ++depth) {
      std::vector<int> next;
      for (int u : frontier)
        for (int w : g.neighbors(u))
          if (dist[w] == -1) {
            dist[w] = depth + 1;
            next.push_back(w);
          }
      frontier = next;
    }
    std::set<int> one, two;
    for (int u = 0; u < g.node_count(); ++u) {
      if (dist[u] == 1) one.insert(u);
      if (dist[u] == 2) two.insert(u);
    }
    CHECK(std::set<int>(got.one_hop.begin(), got.one_hop.end()) == one);
    CHECK(std::set<int>(got.two_hop.begin(), got.two_hop.end()) == two);
    CHECK(std::is_sorted(got.one_hop.begin(), got.one_hop.end()));
    CHECK(std::is_sorted(got.two_hop.begin(), got.two_hop.end()));

    auto order = two_hop_discovery_order(g, v);
    CHECK(std::set<int>(order.begin(), order.end()) == two);
  }
}

TEST_CASE("prune_edges") {
  auto triangle = make_graph(3, {0, 0, 1}, {{0, 1}, {1, 2}, {0, 2}});

  auto same = prune_edges(triangle, {});
  CHECK(same.edge_count() == 3);
  CHECK(same.undirected_edges() == triangle.undirected_edges());

  auto pruned = prune_edges(triangle, {{0, 1}});
  CHECK(pruned.edge_count() == 2);
  CHECK(!pruned.has_edge(0, 1));
  CHECK(!pruned.has_edge(1, 0));
  CHECK(pruned.has_edge(1, 2));
  CHECK(pruned.label(2) == triangle.label(2));
  CHECK(pruned.split(0) == triangle.split(0));

  // isolating a node keeps the graph valid
  auto isolated = prune_edges(triangle, {{0, 1}, {0, 2}});
  CHECK(isolated.degree(0) == 0);
  CHECK(isolated.edge_count() == 1);

  CHECK_THROWS_AS(prune_edges(pruned, {{0, 1}}), LoginError);
}

TEST_CASE("symmetry is preserved under random pruning") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_graph(40, rng);
    auto edges = g.undirected_edges();
    EdgeList removals;
    for (auto e : edges)
      if (rng.bernoulli(0.3)) removals.push_back(e);
    auto pruned = prune_edges(g, removals);
    for (int u = 0; u < pruned.node_count(); ++u)
      for (int v : pruned.neighbors(u)) {
        CHECK(pruned.has_edge(v, u));
        CHECK(u != v);
      }
    CHECK(pruned.edge_count() == static_cast<std::int64_t>(edges.size() - removals.size()));
  }
}

TEST_CASE("graph invariants are validated at build time") {
  std::vector<std::string> texts{"a", ""};
  std::vector<int> labels{0, 0};
  std::vector<std::string> names{"c"};
  std::vector<Split> split{Split::Train, Split::Test};
  CHECK_THROWS_AS(TextAttributedGraph::build(texts, labels, names, split, {}, {{0, 1}}),
                  LoginError);  // empty text
  texts[1] = "b";
  labels[1] = 3;
  CHECK_THROWS_AS(TextAttributedGraph::build(texts, labels, names, split, {}, {{0, 1}}),
                  LoginError);  // label out of range
  labels[1] = 0;
  CHECK_THROWS_AS(TextAttributedGraph::build(texts, labels, names, split, {}, {{0, 5}}),
                  LoginError);  // endpoint out of range
}
