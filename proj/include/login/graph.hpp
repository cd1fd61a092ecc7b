// Text-attributed graph data model: nodes with raw text, undirected canonical
// adjacency, labels, split bookkeeping, and the homophily metrics used to
// characterize datasets.
//
// A graph is immutable after construction; prune_edges returns a new value.
// The canonical adjacency holds each undirected edge once per endpoint as a
// sorted neighbor list with no self-loops (model-specific normalization adds
// its own self-loops).
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "login/errors.hpp"

namespace login {

enum class Split : std::uint8_t { Train, Val, Test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

using EdgeList = std::vector<std::pair<int, int>>;

class TextAttributedGraph {
 public:
  // Symmetrizes, deduplicates and strips self-loops from `edges` (given as
  // row-index pairs), then validates every invariant.
  static TextAttributedGraph build(std::vector<std::string> texts,
                                   std::vector<int> labels,
                                   std::vector<std::string> class_names,
                                   std::vector<Split> split,
                                   std::vector<std::int64_t> node_ids,
                                   const EdgeList& edges);

  int node_count() const { return static_cast<int>(texts_.size()); }
  int class_count() const { return static_cast<int>(class_names_.size()); }
  std::int64_t edge_count() const { return edge_count_; }  // undirected

  const std::string& text(int v) const { return texts_[v]; }
  int label(int v) const { return labels_[v]; }
  Split split(int v) const { return split_[v]; }
  std::int64_t node_id(int v) const { return node_ids_[v]; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::string& class_name(int c) const { return class_names_[c]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::int64_t>& node_ids() const { return node_ids_; }
  const std::vector<std::string>& texts() const { return texts_; }

  const std::vector<int>& neighbors(int v) const { return adj_[v]; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }
  bool has_edge(int u, int v) const;

  std::vector<int> nodes_in_split(Split s) const;
  // canonical list, u < v, lexicographically sorted
  EdgeList undirected_edges() const;

 private:
  TextAttributedGraph() = default;
  void validate() const;

  std::vector<std::string> texts_;
  std::vector<int> labels_;
  std::vector<std::string> class_names_;
  std::vector<Split> split_;
  std::vector<std::int64_t> node_ids_;
  std::vector<std::vector<int>> adj_;
  std::int64_t edge_count_ = 0;
};

// Fraction of intra-class edges, each undirected edge counted once.
// Errors on an edgeless graph (the ratio is undefined).
double graph_homophily(const TextAttributedGraph& g);

// Fraction of v's incident edges whose other endpoint shares v's label.
// Errors on an isolated node.
double node_homophily(const TextAttributedGraph& g, int v);

// Fraction of non-isolated nodes with node_homophily < 0.5; isolated nodes
// are excluded from both numerator and denominator.
double heterophilic_fraction(const TextAttributedGraph& g);

struct TwoHopNeighborhood {
  std::vector<int> one_hop;  // rows, ascending original node id
  std::vector<int> two_hop;  // rows at distance exactly 2, ascending node id
};

TwoHopNeighborhood two_hop_neighborhood(const TextAttributedGraph& g, int v);

// Two-hop rows in deterministic discovery order: one-hop neighbors are
// visited in ascending node-id order and each appends its own unseen
// neighbors in ascending node-id order. Prompt node lists use this ordering.
std::vector<int> two_hop_discovery_order(const TextAttributedGraph& g, int v);

// Returns a graph with the given undirected edges absent in both directions;
// removing a non-edge is an error. Nodes, texts, labels and splits carry over.
TextAttributedGraph prune_edges(const TextAttributedGraph& g, const EdgeList& removals);

}  // namespace login
