#include "login/consult.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "login/rng.hpp"

namespace login {

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool iequals(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

std::string quote_list(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += '"' + names[i] + '"';
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// PromptDocument
// ---------------------------------------------------------------------------

std::string PromptDocument::graph_block_json() const {
  nlohmann::ordered_json g;
  g["id"] = id;
  nlohmann::ordered_json inner;
  inner["node_idx"] = node_idx;
  inner["node_list"] = node_list;
  inner["one_hop_neighbors"] = one_hop;
  inner["two_hops_neighbors"] = two_hop;
  inner["node_label"] = node_label;
  inner["gnn_predicted_label"] = gnn_label;
  g["graph"] = std::move(inner);
  return g.dump();
}

std::string PromptDocument::serialized() const {
  nlohmann::ordered_json doc;
  doc["id"] = id;
  doc["graph"] = nlohmann::ordered_json::parse(graph_block_json())["graph"];
  doc["body"] = body;
  return doc.dump();
}

std::string PromptDocument::prompt_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialized())));
  return std::string(buf);
}

PromptDocument build_prompt(const TextAttributedGraph& g, const PromptLabelFn& human_label,
                            const std::vector<int>& predictions,
                            const UncertaintyReport& report, int row, const PromptMeta& meta) {
  if (!report.is_uncertain(row))
    fail(ErrorKind::Guard, "build_prompt: node " + std::to_string(g.node_id(row)) +
                               " is not in the uncertain set");

  PromptDocument doc;
  doc.target_row = row;
  doc.node_idx = g.node_id(row);
  doc.id = meta.dataset + "_" + std::to_string(doc.node_idx);

  TwoHopNeighborhood hood = two_hop_neighborhood(g, row);
  std::vector<int> rows;
  rows.push_back(row);
  for (int u : hood.one_hop) rows.push_back(u);
  for (int u : two_hop_discovery_order(g, row)) rows.push_back(u);

  for (int u : hood.one_hop) doc.one_hop.push_back(g.node_id(u));
  for (int u : hood.two_hop) doc.two_hop.push_back(g.node_id(u));
  for (int u : rows) {
    doc.node_list.push_back(g.node_id(u));
    std::optional<int> truth = human_label(u);
    int label_idx = truth ? *truth : predictions[u];
    doc.node_label.push_back(g.class_name(label_idx));
    doc.gnn_label.push_back(g.class_name(predictions[u]));
  }

  std::string example = meta.example_class.empty() ? g.class_names().front() : meta.example_class;
  std::ostringstream body;
  body << "Given a " << meta.graph_kind << ": " << doc.graph_block_json()
       << ", where the 0th node is the target " << meta.target_noun << ", " << meta.text_intro
       << " " << g.text(row)
       << ". And in the 'node label' list / 'GNN-predicted node label' list, you'll find the "
          "human-annotated / GNN-predicted "
       << meta.category_word << " corresponding to the neighbors within two hops of the target "
       << meta.target_noun << " as per the 'node_list'.\n"
       << "Question: " << meta.question << " " << meta.directive << ", choosing from "
       << quote_list(g.class_names())
       << ". Ensure that your response can be parsed by Python json, using the following format "
          "as an example: {\"classification result\": \""
       << example
       << "\", \"explanation\": \"your explanation for your classification here\"}. Ensure that "
          "the classification result must match one of the given choices.";
  doc.body = body.str();
  return doc;
}

// ---------------------------------------------------------------------------
// response parsing
// ---------------------------------------------------------------------------

ParsedResponse parse_response(const std::string& raw,
                              const std::vector<std::string>& class_names) {
  ParsedResponse out;
  for (std::size_t start = 0; start < raw.size(); ++start) {
    if (raw[start] != '{') continue;
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      char c = raw[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          auto j = nlohmann::json::parse(raw.substr(start, i - start + 1), nullptr, false);
          if (j.is_discarded() || !j.is_object()) break;  // not JSON; keep scanning
          // the first balanced JSON object decides the outcome
          if (!j.contains("classification result") || !j["classification result"].is_string())
            return out;
          std::string label = trim(j["classification result"].get<std::string>());
          std::string expl =
              j.contains("explanation") && j["explanation"].is_string()
                  ? j["explanation"].get<std::string>()
                  : "";
          for (const std::string& name : class_names) {
            if (iequals(label, name)) {
              if (expl.empty()) return out;  // label without explanation: unparseable
              out.label = name;
              out.explanation = expl;
              return out;
            }
          }
          return out;  // label not in vocabulary
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// cache
// ---------------------------------------------------------------------------

struct ResponseCache::Impl {
  mutable std::mutex mu;
  std::string path;
  std::map<std::string, CacheRecord> map;
  std::ofstream out;

  static std::string key(const std::string& dataset, std::int64_t node,
                         const std::string& hash) {
    return dataset + "#" + std::to_string(node) + "#" + hash;
  }
};

ResponseCache::ResponseCache() : impl_(new Impl) {}

ResponseCache::ResponseCache(const std::string& path) : impl_(new Impl) {
  impl_->path = path;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      fail(ErrorKind::Dataset, "corrupt cache line in " + path);
    CacheRecord rec;
    rec.dataset = j.at("dataset").get<std::string>();
    rec.node_id = j.at("node_id").get<std::int64_t>();
    rec.prompt_hash = j.at("prompt_hash").get<std::string>();
    rec.raw = j.at("raw_response").get<std::string>();
    rec.parsed_label = j.value("parsed_label", "");
    rec.explanation = j.value("explanation", "");
    rec.timestamp_ms = j.value("timestamp", std::int64_t{0});
    impl_->map[Impl::key(rec.dataset, rec.node_id, rec.prompt_hash)] = rec;
  }
  impl_->out.open(path, std::ios::app);
  if (!impl_->out) fail(ErrorKind::Dataset, "cannot open cache for append: " + path);
}

ResponseCache::~ResponseCache() = default;

bool ResponseCache::has(const std::string& dataset, std::int64_t node,
                        const std::string& hash) const {
  std::lock_guard lk(impl_->mu);
  return impl_->map.count(Impl::key(dataset, node, hash)) > 0;
}

std::optional<CacheRecord> ResponseCache::get(const std::string& dataset, std::int64_t node,
                                              const std::string& hash) const {
  std::lock_guard lk(impl_->mu);
  auto it = impl_->map.find(Impl::key(dataset, node, hash));
  if (it == impl_->map.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const CacheRecord& rec) {
  std::lock_guard lk(impl_->mu);
  impl_->map[Impl::key(rec.dataset, rec.node_id, rec.prompt_hash)] = rec;
  if (impl_->out.is_open()) {
    nlohmann::ordered_json j;
    j["dataset"] = rec.dataset;
    j["node_id"] = rec.node_id;
    j["prompt_hash"] = rec.prompt_hash;
    j["raw_response"] = rec.raw;
    j["parsed_label"] = rec.parsed_label;
    j["explanation"] = rec.explanation;
    j["timestamp"] = rec.timestamp_ms;
    impl_->out << j.dump() << "\n";
    impl_->out.flush();
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lk(impl_->mu);
  return impl_->map.size();
}

// ---------------------------------------------------------------------------
// backends
// ---------------------------------------------------------------------------

namespace {

std::string answer_json(const std::string& label, const std::string& explanation) {
  nlohmann::ordered_json j;
  j["classification result"] = label;
  j["explanation"] = explanation;
  return j.dump();
}

class MockOracleBackend final : public ConsultantBackend {
 public:
  MockOracleBackend(std::function<int(std::int64_t)> truth, std::vector<std::string> names)
      : truth_(std::move(truth)), names_(std::move(names)) {}
  std::string kind() const override { return "mock-oracle"; }
  std::string complete(const PromptDocument& doc, const std::string&) override {
    const std::string& cls = names_[truth_(doc.node_idx)];
    return answer_json(cls, "The content of the target node matches the category " + cls + ".");
  }

 private:
  std::function<int(std::int64_t)> truth_;
  std::vector<std::string> names_;
};

class MockNoisyBackend final : public ConsultantBackend {
 public:
  MockNoisyBackend(std::function<int(std::int64_t)> truth, std::vector<std::string> names,
                   double flip_prob, std::uint64_t seed)
      : truth_(std::move(truth)), names_(std::move(names)), flip_prob_(flip_prob), seed_(seed) {}
  std::string kind() const override { return "mock-noisy"; }
  std::string complete(const PromptDocument& doc, const std::string&) override {
    int truth_idx = truth_(doc.node_idx);
    Rng rng = Rng::derive(seed_, {tag("mock-noisy"), static_cast<std::uint64_t>(doc.node_idx)});
    int pick = truth_idx;
    if (rng.bernoulli(flip_prob_)) {
      int wrong = rng.uniform_int(static_cast<int>(names_.size()) - 1);
      pick = wrong < truth_idx ? wrong : wrong + 1;
    }
    return answer_json(names_[pick],
                       "The neighborhood context suggests the category " + names_[pick] + ".");
  }

 private:
  std::function<int(std::int64_t)> truth_;
  std::vector<std::string> names_;
  double flip_prob_;
  std::uint64_t seed_;
};

class ReplayBackend final : public ConsultantBackend {
 public:
  ReplayBackend(const ResponseCache* cache, std::string dataset)
      : cache_(cache), dataset_(std::move(dataset)) {}
  std::string kind() const override { return "replay-cache"; }
  std::string complete(const PromptDocument& doc, const std::string&) override {
    auto rec = cache_->get(dataset_, doc.node_idx, doc.prompt_hash());
    if (!rec)
      throw LoginError(ErrorKind::CacheMiss,
                       "replay cache miss for node " + std::to_string(doc.node_idx));
    return rec->raw;
  }

 private:
  const ResponseCache* cache_;
  std::string dataset_;
};

class RemoteChatBackend final : public ConsultantBackend {
 public:
  RemoteChatBackend(std::string endpoint, std::string model, std::string token,
                    double temperature, int timeout_s)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), token_(std::move(token)),
        temperature_(temperature), timeout_s_(timeout_s) {}
  std::string kind() const override { return "remote-chat"; }

  std::string complete(const PromptDocument&, const std::string& text) override {
    httplib::Client client(endpoint_);
    client.set_read_timeout(timeout_s_, 0);
    client.set_connection_timeout(timeout_s_, 0);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    nlohmann::ordered_json payload;
    payload["model"] = model_;
    payload["temperature"] = temperature_;
    payload["messages"] = nlohmann::ordered_json::array(
        {nlohmann::ordered_json{{"role", "user"}, {"content", text}}});

    auto res = client.Post("/v1/chat/completions", headers, payload.dump(), "application/json");
    if (!res)
      throw TransportError("chat endpoint unreachable: " + endpoint_);
    if (res->status != 200)
      throw TransportError("chat endpoint returned status " + std::to_string(res->status));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
      throw TransportError("malformed chat completion payload");
    const auto& msg = j["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content"))
      throw TransportError("chat completion missing message content");
    return msg["message"]["content"].get<std::string>();
  }

 private:
  std::string endpoint_, model_, token_;
  double temperature_;
  int timeout_s_;
};

}  // namespace

std::unique_ptr<ConsultantBackend> make_mock_oracle(std::function<int(std::int64_t)> truth_class,
                                                    std::vector<std::string> class_names) {
  return std::make_unique<MockOracleBackend>(std::move(truth_class), std::move(class_names));
}

std::unique_ptr<ConsultantBackend> make_mock_noisy(std::function<int(std::int64_t)> truth_class,
                                                   std::vector<std::string> class_names,
                                                   double flip_prob, std::uint64_t seed) {
  return std::make_unique<MockNoisyBackend>(std::move(truth_class), std::move(class_names),
                                            flip_prob, seed);
}

std::unique_ptr<ConsultantBackend> make_replay(const ResponseCache* cache, std::string dataset) {
  return std::make_unique<ReplayBackend>(cache, std::move(dataset));
}

std::unique_ptr<ConsultantBackend> make_remote_chat(std::string endpoint, std::string model,
                                                    std::string api_token, double temperature,
                                                    int timeout_s) {
  return std::make_unique<RemoteChatBackend>(std::move(endpoint), std::move(model),
                                             std::move(api_token), temperature, timeout_s);
}

// ---------------------------------------------------------------------------
// consultation driver
// ---------------------------------------------------------------------------

namespace {

std::string complete_with_retries(ConsultantBackend& backend, const PromptDocument& doc,
                                  const std::string& text, const RetryPolicy& retry) {
  int attempt = 0;
  for (;;) {
    try {
      return backend.complete(doc, text);
    } catch (const TransportError& e) {
      if (attempt >= retry.max_retries)
        throw LoginError(ErrorKind::Backend,
                         "consultation failed for node " + std::to_string(doc.node_idx) +
                             " after " + std::to_string(attempt + 1) + " attempts: " + e.what());
      std::this_thread::sleep_for(
          std::chrono::milliseconds(retry.base_delay_ms * (1LL << attempt)));
      ++attempt;
    }
  }
}

}  // namespace

ConsultResponse consult(ConsultantBackend& backend, const PromptDocument& prompt,
                        const std::vector<std::string>& class_names, const RetryPolicy& retry,
                        ResponseCache* cache) {
  const std::string dataset = prompt.id.substr(0, prompt.id.rfind('_'));
  const std::string hash = prompt.prompt_hash();
  if (cache) {
    if (auto rec = cache->get(dataset, prompt.node_idx, hash)) {
      ConsultResponse r;
      r.raw = rec->raw;
      if (!rec->parsed_label.empty()) r.label = rec->parsed_label;
      r.explanation = rec->explanation;
      r.backend = "cache";
      return r;
    }
  }

  auto start = std::chrono::steady_clock::now();
  std::string raw = complete_with_retries(backend, prompt, prompt.body, retry);
  ParsedResponse parsed = parse_response(raw, class_names);
  if (!parsed.label && retry.reprompt_on_unparseable) {
    raw = complete_with_retries(backend, prompt, prompt.body + "\nRespond with JSON only.",
                                retry);
    parsed = parse_response(raw, class_names);
  }
  auto end = std::chrono::steady_clock::now();

  ConsultResponse r;
  r.raw = raw;
  r.label = parsed.label;
  r.explanation = parsed.explanation;
  r.latency_ms = std::chrono::duration<double, std::milli>(end - start).count();
  r.backend = backend.kind();

  if (cache) {
    CacheRecord rec;
    rec.dataset = dataset;
    rec.node_id = prompt.node_idx;
    rec.prompt_hash = hash;
    rec.raw = r.raw;
    rec.parsed_label = r.label.value_or("");
    rec.explanation = r.explanation;
    rec.timestamp_ms = now_ms();
    cache->put(rec);
  }
  return r;
}

std::vector<ConsultResponse> consult_many(ConsultantBackend& backend,
                                          const std::vector<PromptDocument>& prompts,
                                          const std::vector<std::string>& class_names,
                                          const RetryPolicy& retry, ResponseCache* cache,
                                          int max_inflight) {
  std::vector<ConsultResponse> results(prompts.size());
  if (prompts.empty()) return results;
  int workers = std::max(1, std::min<int>(max_inflight, static_cast<int>(prompts.size())));

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto run = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= prompts.size()) return;
      try {
        results[i] = consult(backend, prompts[i], class_names, retry, cache);
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace login
