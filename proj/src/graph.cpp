#include "login/graph.hpp"

#include <algorithm>
#include <set>

namespace login {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  fail(ErrorKind::Dataset, "unknown split tag '" + name + "'");
}

TextAttributedGraph TextAttributedGraph::build(std::vector<std::string> texts,
                                               std::vector<int> labels,
                                               std::vector<std::string> class_names,
                                               std::vector<Split> split,
                                               std::vector<std::int64_t> node_ids,
                                               const EdgeList& edges) {
  TextAttributedGraph g;
  g.texts_ = std::move(texts);
  g.labels_ = std::move(labels);
  g.class_names_ = std::move(class_names);
  g.split_ = std::move(split);
  g.node_ids_ = std::move(node_ids);

  int n = g.node_count();
  if (g.node_ids_.empty()) {
    g.node_ids_.resize(n);
    for (int i = 0; i < n; ++i) g.node_ids_[i] = i;
  }

  g.adj_.assign(n, {});
  std::set<std::pair<int, int>> canon;
  for (auto [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      fail(ErrorKind::Graph, "edge endpoint out of range");
    if (u == v) continue;  // self-loops stripped from the canonical structure
    canon.insert({std::min(u, v), std::max(u, v)});
  }
  for (auto [u, v] : canon) {
    g.adj_[u].push_back(v);
    g.adj_[v].push_back(u);
  }
  for (auto& nb : g.adj_) std::sort(nb.begin(), nb.end());
  g.edge_count_ = static_cast<std::int64_t>(canon.size());

  g.validate();
  return g;
}

void TextAttributedGraph::validate() const {
  int n = node_count();
  int c = class_count();
  if (static_cast<int>(labels_.size()) != n || static_cast<int>(split_.size()) != n ||
      static_cast<int>(node_ids_.size()) != n)
    fail(ErrorKind::Graph, "graph field lengths disagree with node count");
  for (int v = 0; v < n; ++v) {
    if (texts_[v].empty()) fail(ErrorKind::Graph, "node " + std::to_string(node_ids_[v]) + " has empty text");
    if (labels_[v] < 0 || labels_[v] >= c)
      fail(ErrorKind::Graph, "node " + std::to_string(node_ids_[v]) + " label out of range");
  }
}

bool TextAttributedGraph::has_edge(int u, int v) const {
  const auto& nb = adj_[u];
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<int> TextAttributedGraph::nodes_in_split(Split s) const {
  std::vector<int> out;
  for (int v = 0; v < node_count(); ++v)
    if (split_[v] == s) out.push_back(v);
  return out;
}

EdgeList TextAttributedGraph::undirected_edges() const {
  EdgeList out;
  out.reserve(static_cast<std::size_t>(edge_count_));
  for (int u = 0; u < node_count(); ++u)
    for (int v : adj_[u])
      if (u < v) out.emplace_back(u, v);
  return out;
}

double graph_homophily(const TextAttributedGraph& g) {
  if (g.edge_count() == 0)
    fail(ErrorKind::Graph, "graph homophily undefined: graph has no edges");
  std::int64_t intra = 0;
  for (int u = 0; u < g.node_count(); ++u)
    for (int v : g.neighbors(u))
      if (u < v && g.label(u) == g.label(v)) ++intra;
  return static_cast<double>(intra) / static_cast<double>(g.edge_count());
}

double node_homophily(const TextAttributedGraph& g, int v) {
  int deg = g.degree(v);
  if (deg == 0)
    fail(ErrorKind::Graph,
         "node homophily undefined for isolated node " + std::to_string(g.node_id(v)));
  int same = 0;
  for (int u : g.neighbors(v))
    if (g.label(u) == g.label(v)) ++same;
  return static_cast<double>(same) / static_cast<double>(deg);
}

double heterophilic_fraction(const TextAttributedGraph& g) {
  int considered = 0, heter = 0;
  for (int v = 0; v < g.node_count(); ++v) {
    if (g.degree(v) == 0) continue;
    ++considered;
    if (node_homophily(g, v) < 0.5) ++heter;
  }
  if (considered == 0)
    fail(ErrorKind::Graph, "heterophilic fraction undefined: all nodes isolated");
  return static_cast<double>(heter) / static_cast<double>(considered);
}

namespace {
// ascending original node id; rows are an artifact of file order
void sort_by_id(const TextAttributedGraph& g, std::vector<int>& rows) {
  std::sort(rows.begin(), rows.end(),
            [&g](int a, int b) { return g.node_id(a) < g.node_id(b); });
}
}  // namespace

TwoHopNeighborhood two_hop_neighborhood(const TextAttributedGraph& g, int v) {
  TwoHopNeighborhood out;
  out.one_hop = g.neighbors(v);
  const auto& one = g.neighbors(v);
  std::set<int> two;
  for (int u : one)
    for (int w : g.neighbors(u)) {
      if (w == v) continue;
      if (std::binary_search(one.begin(), one.end(), w)) continue;
      two.insert(w);
    }
  out.two_hop.assign(two.begin(), two.end());
  sort_by_id(g, out.one_hop);
  sort_by_id(g, out.two_hop);
  return out;
}

std::vector<int> two_hop_discovery_order(const TextAttributedGraph& g, int v) {
  std::vector<int> one = g.neighbors(v);
  sort_by_id(g, one);
  std::vector<int> order;
  std::set<int> seen(one.begin(), one.end());
  seen.insert(v);
  for (int u : one) {
    std::vector<int> nb = g.neighbors(u);
    sort_by_id(g, nb);
    for (int w : nb)
      if (seen.insert(w).second) order.push_back(w);
  }
  return order;
}

TextAttributedGraph prune_edges(const TextAttributedGraph& g, const EdgeList& removals) {
  std::set<std::pair<int, int>> gone;
  for (auto [u, v] : removals) {
    if (!g.has_edge(u, v))
      fail(ErrorKind::Graph, "prune_edges: (" + std::to_string(u) + "," + std::to_string(v) +
                                 ") is not an edge");
    gone.insert({std::min(u, v), std::max(u, v)});
  }
  EdgeList kept;
  for (auto [u, v] : g.undirected_edges())
    if (!gone.count({u, v})) kept.emplace_back(u, v);

  std::vector<Split> split(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) split[i] = g.split(i);
  return TextAttributedGraph::build(g.texts(), g.labels(), g.class_names(), std::move(split),
                                    g.node_ids(), kept);
}

}  // namespace login
