// Dataset bundle ingestion and run-artifact persistence.
//
// A bundle is a directory:
//   metadata.json     {"name", "description", "class_names", "prompt": {...}}
//   nodes.jsonl       {"id", "text", "label"} per node
//   edges.txt         "u v" per line, original node ids
//   splits.jsonl      {"seed", "train": [ids], "val": [ids], "test": [ids]}
//   embeddings.jsonl  optional, {"id", "vec": [Dim floats]}
// Machine artifacts are line-delimited JSON throughout: append-safe for
// caches, diff-friendly for fixtures.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "login/consult.hpp"
#include "login/graph.hpp"
#include "login/matrix.hpp"

namespace login {

struct DatasetBundle {
  std::string name;
  std::string description;
  std::vector<std::string> class_names;
  PromptMeta prompt;

  std::vector<std::int64_t> node_ids;  // row order follows the nodes file
  std::vector<std::string> texts;
  std::vector<int> labels;
  std::map<std::int64_t, int> row_of;

  EdgeList edges;                  // row pairs as listed (may repeat / mirror)
  std::int64_t raw_edge_lines = 0;
  std::int64_t canonical_edges = 0;

  std::map<std::uint64_t, std::vector<Split>> splits;  // per seed, per row
  std::optional<Matrix> embeddings;

  int node_count() const { return static_cast<int>(node_ids.size()); }
  std::vector<std::uint64_t> split_seeds() const;
  TextAttributedGraph graph_for_seed(std::uint64_t seed) const;
};

// Loads and validates a bundle. Distinct failures carry distinct stable
// message prefixes: "missing file:", "bad metadata:", "bad node record:",
// "duplicate node id:", "empty text:", "unknown label:", "bad edge line:",
// "dangling edge:", "bad split record:", "split coverage:",
// "ragged embeddings:", "unknown embedding id:".
DatasetBundle load_dataset(const std::string& dir);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

// Seeded shuffles at the given ratios, one assignment per seed.
std::map<std::uint64_t, std::vector<Split>> generate_splits(
    int rows, const std::vector<std::uint64_t>& seeds, const SplitRatios& ratios);

void write_splits(const std::string& path,
                  const std::map<std::uint64_t, std::vector<Split>>& splits,
                  const std::vector<std::int64_t>& node_ids);

void write_embeddings(const std::string& path, const std::vector<std::int64_t>& node_ids,
                      const Matrix& x);
Matrix load_embeddings(const std::string& path, const std::map<std::int64_t, int>& row_of,
                       int rows);

// Canonical undirected edge list, original ids, "u v" per line.
void write_edges(const std::string& path, const TextAttributedGraph& g);

}  // namespace login
