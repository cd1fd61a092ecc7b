// Prompt construction, consultant backends, response parsing, and the
// append-only response cache.
//
// A prompt carries the target node's text plus a summary of its two-hop
// neighborhood with human-annotated and GNN-predicted labels, and an output
// indicator pinning the JSON reply format. Consultants are swappable: a
// remote OpenAI-compatible chat endpoint, deterministic mocks for tests, and
// a replay backend that answers purely from the cache.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "login/graph.hpp"
#include "login/uncertainty.hpp"

namespace login {

// Per-dataset prompt wording; defaults match a generic citation graph.
struct PromptMeta {
  std::string dataset = "dataset";
  std::string graph_kind = "citation graph";
  std::string target_noun = "paper";
  std::string text_intro = "with the following information:";
  std::string category_word = "subcategories";
  std::string question = "Which category does this paper belong to?";
  std::string directive = "Give the most likely category of this paper directly";
  std::string example_class;  // defaults to the first class name
};

struct PromptDocument {
  std::string id;  // "<dataset>_<node>"
  std::int64_t node_idx = 0;
  std::vector<std::int64_t> node_list;  // target, then 1-hop sorted, then 2-hop
                                        // in discovery order
  std::vector<std::int64_t> one_hop;    // sorted ascending
  std::vector<std::int64_t> two_hop;    // sorted ascending
  std::vector<std::string> node_label;      // aligned to node_list
  std::vector<std::string> gnn_label;       // aligned to node_list
  std::string body;                         // full prompt text
  int target_row = -1;                      // internal row index, not serialized

  std::string graph_block_json() const;
  std::string serialized() const;
  std::string prompt_hash() const;
};

// Human-annotation slot provider; returns nullopt when a node's ground truth
// may not be read (test split while the label guard is locked), in which
// case the GNN prediction fills the slot.
using PromptLabelFn = std::function<std::optional<int>(int row)>;

// Builds the prompt for an uncertain node. `predictions` are hard labels per
// row. Errors if `row` is outside the report's uncertain set (leakage guard).
PromptDocument build_prompt(const TextAttributedGraph& g, const PromptLabelFn& human_label,
                            const std::vector<int>& predictions,
                            const UncertaintyReport& report, int row, const PromptMeta& meta);

struct ParsedResponse {
  std::optional<std::string> label;  // canonical class name
  std::string explanation;
};

// Extracts the first balanced JSON object, reads "classification result" and
// "explanation", and matches the label case-insensitively against
// class_names after trimming. Never throws; unparseable is a value.
ParsedResponse parse_response(const std::string& raw,
                              const std::vector<std::string>& class_names);

struct ConsultResponse {
  std::string raw;
  std::optional<std::string> label;
  std::string explanation;
  double latency_ms = 0.0;
  std::string backend;
};

struct CacheRecord {
  std::string dataset;
  std::int64_t node_id = 0;
  std::string prompt_hash;
  std::string raw;
  std::string parsed_label;  // empty when unparseable
  std::string explanation;
  std::int64_t timestamp_ms = 0;
};

// Append-only line-delimited JSON store keyed by (dataset, node, hash).
// One writer / many readers; writes are serialized internally.
class ResponseCache {
 public:
  ResponseCache();                             // in-memory only
  explicit ResponseCache(const std::string& path);  // loads, then appends
  ~ResponseCache();
  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  bool has(const std::string& dataset, std::int64_t node, const std::string& hash) const;
  std::optional<CacheRecord> get(const std::string& dataset, std::int64_t node,
                                 const std::string& hash) const;
  void put(const CacheRecord& rec);
  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class ConsultantBackend {
 public:
  virtual ~ConsultantBackend() = default;
  virtual std::string kind() const = 0;
  // `text` is the prompt body, possibly extended with a reprompt reminder.
  virtual std::string complete(const PromptDocument& doc, const std::string& text) = 0;
};

// Always answers with the node's ground-truth class and a templated
// explanation mentioning it.
std::unique_ptr<ConsultantBackend> make_mock_oracle(
    std::function<int(std::int64_t node_id)> truth_class,
    std::vector<std::string> class_names);

// Flips to a uniformly chosen wrong class with the given probability;
// deterministic per (seed, node).
std::unique_ptr<ConsultantBackend> make_mock_noisy(
    std::function<int(std::int64_t node_id)> truth_class,
    std::vector<std::string> class_names, double flip_prob, std::uint64_t seed);

// Answers only from the cache; a miss is an error.
std::unique_ptr<ConsultantBackend> make_replay(const ResponseCache* cache,
                                               std::string dataset);

// OpenAI-compatible chat-completion client (POST <endpoint>/v1/chat/completions).
std::unique_ptr<ConsultantBackend> make_remote_chat(std::string endpoint, std::string model,
                                                    std::string api_token,
                                                    double temperature = 0.0,
                                                    int timeout_s = 120);

struct RetryPolicy {
  int max_retries = 3;       // transport retries per request
  int base_delay_ms = 250;   // exponential backoff base
  bool reprompt_on_unparseable = true;
};

// One consultation: cache fast path, transport retries with backoff, one
// reprompt on unparseable output, and a cache append of the final response.
ConsultResponse consult(ConsultantBackend& backend, const PromptDocument& prompt,
                        const std::vector<std::string>& class_names, const RetryPolicy& retry,
                        ResponseCache* cache);

// Consults every prompt with up to max_inflight worker threads; results come
// back in the given prompt order regardless of completion order.
std::vector<ConsultResponse> consult_many(ConsultantBackend& backend,
                                          const std::vector<PromptDocument>& prompts,
                                          const std::vector<std::string>& class_names,
                                          const RetryPolicy& retry, ResponseCache* cache,
                                          int max_inflight);

}  // namespace login
