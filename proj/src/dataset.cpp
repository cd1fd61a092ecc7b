#include "login/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "login/rng.hpp"

namespace fs = std::filesystem;

namespace login {

namespace {

std::ifstream open_required(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorKind::Dataset, "missing file: " + p.string());
  return in;
}

}  // namespace

std::vector<std::uint64_t> DatasetBundle::split_seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& [seed, _] : splits) out.push_back(seed);
  return out;
}

TextAttributedGraph DatasetBundle::graph_for_seed(std::uint64_t seed) const {
  auto it = splits.find(seed);
  if (it == splits.end())
    fail(ErrorKind::Dataset,
         "split coverage: no split recorded for seed " + std::to_string(seed));
  return TextAttributedGraph::build(texts, labels, class_names, it->second, node_ids, edges);
}

DatasetBundle load_dataset(const std::string& dir) {
  DatasetBundle b;
  fs::path root(dir);
  if (!fs::is_directory(root)) fail(ErrorKind::Dataset, "missing file: " + dir);

  {  // metadata
    auto in = open_required(root / "metadata.json");
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::Dataset, "bad metadata: unparseable JSON");
    if (!j.contains("name") || !j.contains("class_names"))
      fail(ErrorKind::Dataset, "bad metadata: name and class_names are required");
    b.name = j["name"].get<std::string>();
    b.description = j.value("description", "");
    b.class_names = j["class_names"].get<std::vector<std::string>>();
    if (b.class_names.empty()) fail(ErrorKind::Dataset, "bad metadata: class_names is empty");
    b.prompt.dataset = b.name;
    if (j.contains("prompt")) {
      const auto& p = j["prompt"];
      b.prompt.graph_kind = p.value("graph_kind", b.prompt.graph_kind);
      b.prompt.target_noun = p.value("target_noun", b.prompt.target_noun);
      b.prompt.text_intro = p.value("text_intro", b.prompt.text_intro);
      b.prompt.category_word = p.value("category_word", b.prompt.category_word);
      b.prompt.question = p.value("question", b.prompt.question);
      b.prompt.directive = p.value("directive", b.prompt.directive);
      b.prompt.example_class = p.value("example_class", b.prompt.example_class);
    }
  }

  std::map<std::string, int> label_index;
  for (int c = 0; c < static_cast<int>(b.class_names.size()); ++c)
    label_index[b.class_names[c]] = c;

  {  // nodes
    auto in = open_required(root / "nodes.jsonl");
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("id") || !j.contains("text") || !j.contains("label"))
        fail(ErrorKind::Dataset, "bad node record: line " + std::to_string(row + 1));
      std::int64_t id = j["id"].get<std::int64_t>();
      if (b.row_of.count(id))
        fail(ErrorKind::Dataset, "duplicate node id: " + std::to_string(id));
      std::string text = j["text"].get<std::string>();
      if (text.empty()) fail(ErrorKind::Dataset, "empty text: node " + std::to_string(id));
      std::string label = j["label"].get<std::string>();
      auto lit = label_index.find(label);
      if (lit == label_index.end())
        fail(ErrorKind::Dataset,
             "unknown label: '" + label + "' at node " + std::to_string(id));
      b.row_of[id] = row;
      b.node_ids.push_back(id);
      b.texts.push_back(std::move(text));
      b.labels.push_back(lit->second);
      ++row;
    }
    if (row == 0) fail(ErrorKind::Dataset, "bad node record: nodes.jsonl is empty");
  }

  {  // edges
    auto in = open_required(root / "edges.txt");
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::int64_t u, v;
      if (!(ss >> u >> v))
        fail(ErrorKind::Dataset, "bad edge line: " + std::to_string(line_no));
      auto ui = b.row_of.find(u), vi = b.row_of.find(v);
      if (ui == b.row_of.end() || vi == b.row_of.end())
        fail(ErrorKind::Dataset, "dangling edge: line " + std::to_string(line_no) + " (" +
                                     std::to_string(u) + " " + std::to_string(v) + ")");
      b.edges.emplace_back(ui->second, vi->second);
      ++b.raw_edge_lines;
    }
  }

  {  // splits
    auto in = open_required(root / "splits.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("seed"))
        fail(ErrorKind::Dataset, "bad split record: unparseable line");
      std::uint64_t seed = j["seed"].get<std::uint64_t>();
      std::vector<Split> assign(b.node_count(), Split::Train);
      std::vector<bool> seen(b.node_count(), false);
      for (const char* part : {"train", "val", "test"}) {
        if (!j.contains(part))
          fail(ErrorKind::Dataset, std::string("bad split record: missing '") + part + "'");
        for (std::int64_t id : j[part].get<std::vector<std::int64_t>>()) {
          auto it = b.row_of.find(id);
          if (it == b.row_of.end())
            fail(ErrorKind::Dataset, "bad split record: unknown node " + std::to_string(id));
          if (seen[it->second])
            fail(ErrorKind::Dataset,
                 "split coverage: node " + std::to_string(id) + " tagged twice");
          seen[it->second] = true;
          assign[it->second] = split_from_name(part);
        }
      }
      for (int r = 0; r < b.node_count(); ++r)
        if (!seen[r])
          fail(ErrorKind::Dataset, "split coverage: node " + std::to_string(b.node_ids[r]) +
                                       " untagged for seed " + std::to_string(seed));
      b.splits[seed] = std::move(assign);
    }
    if (b.splits.empty()) fail(ErrorKind::Dataset, "bad split record: splits.jsonl is empty");
  }

  if (fs::exists(root / "embeddings.jsonl"))
    b.embeddings = load_embeddings((root / "embeddings.jsonl").string(), b.row_of,
                                   b.node_count());

  // canonical edge count, for comparison against published statistics
  std::set<std::pair<int, int>> canon;
  for (auto [u, v] : b.edges)
    if (u != v) canon.insert({std::min(u, v), std::max(u, v)});
  b.canonical_edges = static_cast<std::int64_t>(canon.size());
  return b;
}

std::map<std::uint64_t, std::vector<Split>> generate_splits(
    int rows, const std::vector<std::uint64_t>& seeds, const SplitRatios& ratios) {
  if (ratios.train <= 0.0 || ratios.val < 0.0 || ratios.test < 0.0)
    fail(ErrorKind::Config, "split ratios must be positive");
  double total = ratios.train + ratios.val + ratios.test;
  std::map<std::uint64_t, std::vector<Split>> out;
  for (std::uint64_t seed : seeds) {
    std::vector<int> order(rows);
    for (int i = 0; i < rows; ++i) order[i] = i;
    Rng rng = Rng::derive(seed, {tag("split-gen")});
    for (int i = rows - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    int n_train = std::max(1, static_cast<int>(std::lround(rows * ratios.train / total)));
    int n_val = static_cast<int>(std::lround(rows * ratios.val / total));
    n_val = std::min(n_val, rows - n_train);
    std::vector<Split> assign(rows, Split::Test);
    for (int i = 0; i < n_train; ++i) assign[order[i]] = Split::Train;
    for (int i = n_train; i < n_train + n_val; ++i) assign[order[i]] = Split::Val;
    out[seed] = std::move(assign);
  }
  return out;
}

void write_splits(const std::string& path,
                  const std::map<std::uint64_t, std::vector<Split>>& splits,
                  const std::vector<std::int64_t>& node_ids) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Dataset, "cannot write " + path);
  for (const auto& [seed, assign] : splits) {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    std::vector<std::int64_t> tr, va, te;
    for (std::size_t r = 0; r < assign.size(); ++r) {
      if (assign[r] == Split::Train) tr.push_back(node_ids[r]);
      else if (assign[r] == Split::Val) va.push_back(node_ids[r]);
      else te.push_back(node_ids[r]);
    }
    j["train"] = tr;
    j["val"] = va;
    j["test"] = te;
    out << j.dump() << "\n";
  }
}

void write_embeddings(const std::string& path, const std::vector<std::int64_t>& node_ids,
                      const Matrix& x) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Dataset, "cannot write " + path);
  for (int i = 0; i < x.rows; ++i) {
    nlohmann::ordered_json j;
    j["id"] = node_ids[i];
    j["vec"] = std::vector<double>(x.row(i), x.row(i) + x.cols);
    out << j.dump() << "\n";
  }
}

Matrix load_embeddings(const std::string& path, const std::map<std::int64_t, int>& row_of,
                       int rows) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Dataset, "missing file: " + path);
  Matrix x;
  std::vector<bool> seen(rows, false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("vec"))
      fail(ErrorKind::Dataset, "ragged embeddings: unparseable record");
    std::int64_t id = j["id"].get<std::int64_t>();
    auto it = row_of.find(id);
    if (it == row_of.end())
      fail(ErrorKind::Dataset, "unknown embedding id: " + std::to_string(id));
    auto vec = j["vec"].get<std::vector<double>>();
    if (x.rows == 0) x = Matrix(rows, static_cast<int>(vec.size()));
    if (static_cast<int>(vec.size()) != x.cols)
      fail(ErrorKind::Dataset, "ragged embeddings: node " + std::to_string(id) + " has dim " +
                                   std::to_string(vec.size()) + ", expected " +
                                   std::to_string(x.cols));
    for (double v : vec)
      if (!std::isfinite(v))
        fail(ErrorKind::Dataset, "ragged embeddings: non-finite value at node " +
                                     std::to_string(id));
    std::copy(vec.begin(), vec.end(), x.row(it->second));
    seen[it->second] = true;
  }
  for (int r = 0; r < rows; ++r)
    if (!seen[r])
      fail(ErrorKind::Dataset, "ragged embeddings: missing row for node index " +
                                   std::to_string(r));
  return x;
}

void write_edges(const std::string& path, const TextAttributedGraph& g) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Dataset, "cannot write " + path);
  for (auto [u, v] : g.undirected_edges())
    out << g.node_id(u) << " " << g.node_id(v) << "\n";
}

}  // namespace login
