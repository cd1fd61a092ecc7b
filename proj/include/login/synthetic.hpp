// Seeded synthetic TAGs for tests and acceptance runs: a two-block (or
// k-block) stochastic block model whose node texts carry class-correlated
// token bags, embedded with the hash encoder.
#pragma once

#include <cstdint>
#include <vector>

#include "login/consult.hpp"
#include "login/graph.hpp"
#include "login/matrix.hpp"

namespace login {

struct SbmSpec {
  int nodes = 300;
  int classes = 2;
  double intra_p = 0.05;
  double inter_p = 0.05;
  std::uint64_t graph_seed = 1;
  std::uint64_t split_seed = 1;
  int dim = 64;
  int tokens_per_node = 20;
  double noise_frac = 0.1;   // fraction of node-unique noise tokens per text
  double train_frac = 0.6;
  double val_frac = 0.2;
};

struct SbmTag {
  TextAttributedGraph graph;
  Matrix embeddings;  // hash-encoded node texts, unit rows
  PromptMeta prompt;
};

SbmTag make_sbm_tag(const SbmSpec& spec);

// Copy of g with `frac` of the train labels flipped to a uniformly chosen
// wrong class; returns the flipped rows too.
struct FlippedGraph {
  TextAttributedGraph graph;
  std::vector<int> flipped_rows;
};
FlippedGraph flip_train_labels(const TextAttributedGraph& g, double frac, std::uint64_t seed);

}  // namespace login
