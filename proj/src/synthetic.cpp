#include "login/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "login/dataset.hpp"
#include "login/encoder.hpp"
#include "login/rng.hpp"

namespace login {

SbmTag make_sbm_tag(const SbmSpec& spec) {
  int n = spec.nodes;
  int c = spec.classes;
  if (n < c || c < 2) fail(ErrorKind::Config, "sbm: need at least one node per class");

  std::vector<std::string> class_names;
  for (int k = 0; k < c; ++k) class_names.push_back("topic" + std::to_string(k));

  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i * c / n;  // contiguous blocks

  // token bags: mostly class keywords, a few node-unique noise tokens
  std::vector<std::string> texts(n);
  int noise_tokens =
      static_cast<int>(std::lround(spec.noise_frac * spec.tokens_per_node));
  int class_tokens = spec.tokens_per_node - noise_tokens;
  for (int i = 0; i < n; ++i) {
    std::ostringstream text;
    const std::string& cls = class_names[labels[i]];
    for (int t = 0; t < class_tokens; ++t) {
      if (t) text << ' ';
      if (t == 0)
        text << cls;  // the class name itself is a keyword
      else
        text << cls << "_kw" << (t % 8);
    }
    for (int t = 0; t < noise_tokens; ++t)
      text << " node" << i << "_rnd" << t;
    texts[i] = text.str();
  }

  EdgeList edges;
  Rng rng = Rng::derive(spec.graph_seed, {tag("sbm-edges")});
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      double p = labels[u] == labels[v] ? spec.intra_p : spec.inter_p;
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
    }

  auto splits = generate_splits(n, {spec.split_seed},
                                {spec.train_frac, spec.val_frac,
                                 1.0 - spec.train_frac - spec.val_frac});

  SbmTag out{TextAttributedGraph::build(texts, labels, class_names,
                                        splits.at(spec.split_seed), {}, edges),
             Matrix(), PromptMeta{}};
  auto enc = make_hash_encoder(spec.dim);
  out.embeddings = enc->encode(texts);

  out.prompt.dataset = "sbm";
  out.prompt.graph_kind = "topic graph";
  out.prompt.target_noun = "document";
  out.prompt.text_intro = "with the following content:";
  out.prompt.category_word = "categories";
  out.prompt.question = "Which topic does this document belong to?";
  out.prompt.directive = "Give the most likely topic of this document directly";
  return out;
}

FlippedGraph flip_train_labels(const TextAttributedGraph& g, double frac, std::uint64_t seed) {
  std::vector<int> train = g.nodes_in_split(Split::Train);
  Rng rng = Rng::derive(seed, {tag("label-flip")});
  for (int i = static_cast<int>(train.size()) - 1; i > 0; --i)
    std::swap(train[i], train[rng.uniform_int(i + 1)]);
  int k = static_cast<int>(std::lround(frac * static_cast<double>(train.size())));

  std::vector<int> labels = g.labels();
  std::vector<int> flipped_rows;
  for (int i = 0; i < k; ++i) {
    int row = train[i];
    int wrong = rng.uniform_int(g.class_count() - 1);
    if (wrong >= labels[row]) ++wrong;
    labels[row] = wrong;
    flipped_rows.push_back(row);
  }
  std::sort(flipped_rows.begin(), flipped_rows.end());

  std::vector<Split> split(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) split[i] = g.split(i);
  return FlippedGraph{TextAttributedGraph::build(g.texts(), labels, g.class_names(),
                                                 std::move(split), g.node_ids(),
                                                 g.undirected_edges()),
                      std::move(flipped_rows)};
}

}  // namespace login
