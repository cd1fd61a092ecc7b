#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "login/consult.hpp"
#include "login/dataset.hpp"

using namespace login;

namespace {

const std::vector<std::string> kCoraClasses{
    "Case_Based",  "Genetic_Algorithms",     "Neural_Networks", "Probabilistic_Methods",
    "Reinforcement_Learning", "Rule_Learning", "Theory"};

std::string fixture(const std::string& name) {
  return std::string(LOGIN_FIXTURE_DIR) + "/" + name;
}

// report that marks exactly the given rows uncertain
UncertaintyReport report_for(const std::vector<int>& rows, int n) {
  UncertaintyReport rep;
  rep.scores.assign(n, 0.0);
  rep.uncertain = rows;
  std::sort(rep.uncertain.begin(), rep.uncertain.end());
  return rep;
}

struct CountingBackend final : ConsultantBackend {
  ConsultantBackend* inner;
  std::atomic<int> calls{0};
  explicit CountingBackend(ConsultantBackend* b) : inner(b) {}
  std::string kind() const override { return inner->kind(); }
  std::string complete(const PromptDocument& doc, const std::string& text) override {
    ++calls;
    return inner->complete(doc, text);
  }
};

struct FlakyBackend final : ConsultantBackend {
  int failures_left;
  std::string reply;
  explicit FlakyBackend(int failures, std::string r) : failures_left(failures), reply(std::move(r)) {}
  std::string kind() const override { return "flaky"; }
  std::string complete(const PromptDocument&, const std::string&) override {
    if (failures_left > 0) {
      --failures_left;
      throw TransportError("synthetic outage");
    }
    return reply;
  }
};

// garbage first, valid JSON once the reprompt reminder shows up
struct RepromptBackend final : ConsultantBackend {
  std::string kind() const override { return "reprompt"; }
  std::string complete(const PromptDocument&, const std::string& text) override {
    if (text.find("Respond with JSON only.") == std::string::npos)
      return "let me think about it...";
    return R"({"classification result": "course", "explanation": "second try"})";
  }
};

}  // namespace

TEST_CASE("parse_response") {
  SUBCASE("plain JSON answer") {
    auto r = parse_response(
        R"({"classification result": "Genetic_Algorithms", "explanation": "crossover and mutation"})",
        kCoraClasses);
    REQUIRE(r.label.has_value());
    CHECK(*r.label == "Genetic_Algorithms");
    CHECK(r.explanation == "crossover and mutation");
  }
  SUBCASE("JSON wrapped in chatter") {
    auto r = parse_response(
        "Sure! Here is my answer: {\"classification result\": \"Theory\", \"explanation\": "
        "\"x\"} hope it helps",
        kCoraClasses);
    REQUIRE(r.label.has_value());
    CHECK(*r.label == "Theory");
    CHECK(r.explanation == "x");
  }
  SUBCASE("label outside the vocabulary is unparseable") {
    auto r = parse_response(
        R"({"classification result": "Astronomy", "explanation": "x"})", kCoraClasses);
    CHECK(!r.label.has_value());
  }
  SUBCASE("case-insensitive match after trimming returns the canonical name") {
    auto r = parse_response(
        R"({"classification result": "  neural_networks ", "explanation": "x"})", kCoraClasses);
    REQUIRE(r.label.has_value());
    CHECK(*r.label == "Neural_Networks");
  }
  SUBCASE("label without explanation is unparseable") {
    auto r = parse_response(R"({"classification result": "Theory"})", kCoraClasses);
    CHECK(!r.label.has_value());
  }
  SUBCASE("nested braces inside strings do not confuse the scanner") {
    auto r = parse_response(
        R"(note {not json} then {"classification result": "Theory", "explanation": "uses { and } freely"})",
        kCoraClasses);
    REQUIRE(r.label.has_value());
    CHECK(r.explanation == "uses { and } freely");
  }
  SUBCASE("never throws on arbitrary bytes and labels stay in vocabulary") {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
      std::string junk;
      int len = rng.uniform_int(60);
      for (int i = 0; i < len; ++i)
        junk.push_back(static_cast<char>(rng.uniform_int(256)));
      if (rng.bernoulli(0.3)) junk += R"({"classification result": "Theory", "explanation": "e"})";
      ParsedResponse r;
      CHECK_NOTHROW(r = parse_response(junk, kCoraClasses));
      if (r.label)
        CHECK(std::count(kCoraClasses.begin(), kCoraClasses.end(), *r.label) == 1);
    }
  }
}

TEST_CASE("prompt golden: cora node 356 graph block") {
  DatasetBundle bundle = load_dataset(fixture("cora_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int row = bundle.row_of.at(356);

  std::vector<int> predictions(g.node_count());
  for (int r = 0; r < g.node_count(); ++r) predictions[r] = g.label(r);
  predictions[row] = 3;  // the GNN mispredicts the target as Probabilistic_Methods

  auto rep = report_for({row}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  PromptDocument doc = build_prompt(g, human, predictions, rep, row, bundle.prompt);

  CHECK(doc.id == "cora_356");
  CHECK(doc.node_idx == 356);
  CHECK(doc.node_list == std::vector<std::int64_t>{356, 190, 510, 519, 2223, 192});
  CHECK(doc.one_hop == std::vector<std::int64_t>{190, 510});
  CHECK(doc.two_hop == std::vector<std::int64_t>{192, 519, 2223});
  CHECK(doc.node_label ==
        std::vector<std::string>{"Neural_Networks", "Neural_Networks", "Probabilistic_Methods",
                                 "Neural_Networks", "Neural_Networks", "Neural_Networks"});

  // body carries the pieces the consultant needs
  CHECK(doc.body.find("Given a citation graph: ") == 0);
  CHECK(doc.body.find(g.text(row)) != std::string::npos);
  CHECK(doc.body.find("Which CS sub-category does this paper belong to?") != std::string::npos);
  CHECK(doc.body.find("\"Case_Based\", \"Genetic_Algorithms\"") != std::string::npos);
  CHECK(doc.body.find(
            "{\"classification result\": \"Genetic_Algorithms\", \"explanation\": "
            "\"your explanation for your classification here\"}") != std::string::npos);

  // byte-deterministic serialization
  PromptDocument again = build_prompt(g, human, predictions, rep, row, bundle.prompt);
  CHECK(doc.serialized() == again.serialized());
  CHECK(doc.prompt_hash() == again.prompt_hash());
}

TEST_CASE("prompt golden: wisconsin node 62 graph block") {
  DatasetBundle bundle = load_dataset(fixture("wisconsin_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int row = bundle.row_of.at(62);

  std::vector<int> predictions(g.node_count());
  for (int r = 0; r < g.node_count(); ++r) predictions[r] = g.label(r);
  predictions[row] = 2;  // mispredicted as student

  auto rep = report_for({row}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  PromptDocument doc = build_prompt(g, human, predictions, rep, row, bundle.prompt);

  CHECK(doc.id == "wisconsin_62");
  CHECK(doc.node_idx == 62);
  CHECK(doc.node_list == std::vector<std::int64_t>{62, 166, 189, 165, 84});
  CHECK(doc.one_hop == std::vector<std::int64_t>{166, 189});
  CHECK(doc.two_hop == std::vector<std::int64_t>{84, 165});
  CHECK(doc.node_label ==
        std::vector<std::string>{"course", "student", "student", "student", "faculty"});
  CHECK(doc.gnn_label.size() == doc.node_list.size());
  CHECK(doc.body.find("Given a webpage link graph: ") == 0);
  CHECK(doc.body.find("choosing from \"course\", \"faculty\", \"student\", \"project\", "
                      "\"staff\"") != std::string::npos);
}

TEST_CASE("prompt for an isolated target is still valid") {
  std::vector<std::string> texts{"lonely node", "other"};
  std::vector<int> labels{0, 1};
  std::vector<std::string> names{"a", "b"};
  std::vector<Split> split{Split::Train, Split::Train};
  auto g = TextAttributedGraph::build(texts, labels, names, split, {10, 11}, {});
  auto rep = report_for({0}, 2);
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  PromptDocument doc = build_prompt(g, human, {0, 1}, rep, 0, PromptMeta{});
  CHECK(doc.node_list == std::vector<std::int64_t>{10});
  CHECK(doc.one_hop.empty());
  CHECK(doc.two_hop.empty());
  CHECK(doc.node_label == std::vector<std::string>{"a"});
}

TEST_CASE("build_prompt rejects nodes outside the uncertain set") {
  DatasetBundle bundle = load_dataset(fixture("cora_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  auto rep = report_for({bundle.row_of.at(356)}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  std::vector<int> predictions(g.node_count(), 0);
  CHECK_THROWS_AS(build_prompt(g, human, predictions, rep, bundle.row_of.at(190), bundle.prompt),
                  LoginError);
}

TEST_CASE("test-split neighbors fall back to the GNN prediction slot") {
  DatasetBundle bundle = load_dataset(fixture("wisconsin_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int target = bundle.row_of.at(62);
  int neighbor = bundle.row_of.at(166);
  std::vector<int> predictions(g.node_count(), 3);  // everything "project"
  auto rep = report_for({target}, g.node_count());
  // a guard-style provider that refuses the neighbor's ground truth
  auto human = [&](int r) -> std::optional<int> {
    if (r == neighbor) return std::nullopt;
    return g.label(r);
  };
  PromptDocument doc = build_prompt(g, human, predictions, rep, target, bundle.prompt);
  CHECK(doc.node_label[1] == "project");   // prediction filled the slot
  CHECK(doc.node_label[0] == "course");    // target keeps its human label
}

TEST_CASE("mock backends") {
  DatasetBundle bundle = load_dataset(fixture("wisconsin_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int row = bundle.row_of.at(62);
  auto rep = report_for({row}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  std::vector<int> predictions(g.node_count(), 0);
  PromptDocument doc = build_prompt(g, human, predictions, rep, row, bundle.prompt);

  auto truth = [&](std::int64_t id) { return g.label(bundle.row_of.at(id)); };

  auto oracle = make_mock_oracle(truth, g.class_names());
  ConsultResponse r1 = consult(*oracle, doc, g.class_names(), RetryPolicy{}, nullptr);
  REQUIRE(r1.label.has_value());
  CHECK(*r1.label == "course");
  CHECK(!r1.explanation.empty());

  auto flip_all = make_mock_noisy(truth, g.class_names(), 1.0, 7);
  ConsultResponse r2 = consult(*flip_all, doc, g.class_names(), RetryPolicy{}, nullptr);
  REQUIRE(r2.label.has_value());
  CHECK(*r2.label != "course");

  auto never_flip = make_mock_noisy(truth, g.class_names(), 0.0, 7);
  ConsultResponse r3 = consult(*never_flip, doc, g.class_names(), RetryPolicy{}, nullptr);
  REQUIRE(r3.label.has_value());
  CHECK(*r3.label == "course");
}

TEST_CASE("cache fast path, record/replay, and miss behavior") {
  DatasetBundle bundle = load_dataset(fixture("wisconsin_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int row = bundle.row_of.at(62);
  auto rep = report_for({row}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  std::vector<int> predictions(g.node_count(), 0);
  PromptDocument doc = build_prompt(g, human, predictions, rep, row, bundle.prompt);
  auto truth = [&](std::int64_t id) { return g.label(bundle.row_of.at(id)); };

  std::string path = "build/test_cache.jsonl";
  std::remove(path.c_str());
  {
    ResponseCache cache(path);
    auto oracle = make_mock_oracle(truth, g.class_names());
    CountingBackend counted(oracle.get());

    ConsultResponse first = consult(counted, doc, g.class_names(), RetryPolicy{}, &cache);
    CHECK(counted.calls == 1);
    ConsultResponse second = consult(counted, doc, g.class_names(), RetryPolicy{}, &cache);
    CHECK(counted.calls == 1);  // served from cache, zero backend traffic
    CHECK(second.raw == first.raw);
    CHECK(second.label == first.label);
    CHECK(second.explanation == first.explanation);
  }
  {
    // a fresh process would reload the cache file and replay from it
    ResponseCache reloaded(path);
    CHECK(reloaded.size() == 1);
    auto replay = make_replay(&reloaded, "wisconsin");
    ConsultResponse r = consult(*replay, doc, g.class_names(), RetryPolicy{}, nullptr);
    REQUIRE(r.label.has_value());
    CHECK(*r.label == "course");

    // replay misses are a distinct error
    PromptDocument other = doc;
    other.node_idx = 9999;
    other.id = "wisconsin_9999";
    try {
      consult(*replay, other, g.class_names(), RetryPolicy{0, 1, false}, nullptr);
      FAIL("expected a cache miss");
    } catch (const LoginError& e) {
      CHECK(e.kind() == ErrorKind::CacheMiss);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("transport retries with backoff, then a hard failure") {
  DatasetBundle bundle = load_dataset(fixture("wisconsin_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int row = bundle.row_of.at(62);
  auto rep = report_for({row}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  std::vector<int> predictions(g.node_count(), 0);
  PromptDocument doc = build_prompt(g, human, predictions, rep, row, bundle.prompt);

  FlakyBackend twice(2, R"({"classification result": "course", "explanation": "ok"})");
  ConsultResponse r = consult(twice, doc, g.class_names(), RetryPolicy{3, 1, true}, nullptr);
  REQUIRE(r.label.has_value());

  FlakyBackend hopeless(10, "never");
  try {
    consult(hopeless, doc, g.class_names(), RetryPolicy{2, 1, true}, nullptr);
    FAIL("expected backend failure");
  } catch (const LoginError& e) {
    CHECK(e.kind() == ErrorKind::Backend);
    CHECK(std::string(e.what()).find("62") != std::string::npos);  // carries the node id
  }
}

TEST_CASE("one reprompt turns an unparseable answer into a parsed one") {
  DatasetBundle bundle = load_dataset(fixture("wisconsin_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int row = bundle.row_of.at(62);
  auto rep = report_for({row}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  std::vector<int> predictions(g.node_count(), 0);
  PromptDocument doc = build_prompt(g, human, predictions, rep, row, bundle.prompt);

  RepromptBackend backend;
  ConsultResponse r = consult(backend, doc, g.class_names(), RetryPolicy{}, nullptr);
  REQUIRE(r.label.has_value());
  CHECK(r.explanation == "second try");

  RepromptBackend backend2;
  ConsultResponse r2 =
      consult(backend2, doc, g.class_names(), RetryPolicy{3, 1, false}, nullptr);
  CHECK(!r2.label.has_value());  // reprompt disabled: unparseable is the value
}

TEST_CASE("remote chat backend speaks the chat-completions contract") {
  httplib::Server server;
  std::string seen_path, seen_auth, seen_model, seen_content;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_path = req.path;
    if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
    auto j = nlohmann::json::parse(req.body);
    seen_model = j["model"];
    seen_content = j["messages"][0]["content"];
    if (hits <= 2) {  // first two attempts fail, the retry loop must recover
      res.status = 500;
      return;
    }
    nlohmann::json out;
    out["choices"] = {{{"message",
                        {{"role", "assistant"},
                         {"content",
                          R"({"classification result": "course", "explanation": "remote"})"}}}}};
    res.set_content(out.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  auto worker = std::thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  DatasetBundle bundle = load_dataset(fixture("wisconsin_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  int row = bundle.row_of.at(62);
  auto rep = report_for({row}, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  std::vector<int> predictions(g.node_count(), 0);
  PromptDocument doc = build_prompt(g, human, predictions, rep, row, bundle.prompt);

  auto remote = make_remote_chat("http://127.0.0.1:" + std::to_string(port), "test-model",
                                 "secret-token");
  ConsultResponse r = consult(*remote, doc, g.class_names(), RetryPolicy{3, 1, true}, nullptr);
  server.stop();
  worker.join();

  REQUIRE(r.label.has_value());
  CHECK(*r.label == "course");
  CHECK(r.explanation == "remote");
  CHECK(seen_path == "/v1/chat/completions");
  CHECK(seen_auth == "Bearer secret-token");
  CHECK(seen_model == "test-model");
  CHECK(seen_content == doc.body);
  CHECK(hits == 3);
}

TEST_CASE("consult_many joins results in prompt order under concurrency") {
  DatasetBundle bundle = load_dataset(fixture("cora_golden"));
  TextAttributedGraph g = bundle.graph_for_seed(1);
  std::vector<int> train_rows = g.nodes_in_split(Split::Train);
  auto rep = report_for(train_rows, g.node_count());
  auto human = [&g](int r) { return std::optional<int>(g.label(r)); };
  std::vector<int> predictions(g.node_count(), 0);

  std::vector<PromptDocument> prompts;
  for (int row : rep.uncertain)
    prompts.push_back(build_prompt(g, human, predictions, rep, row, bundle.prompt));
  auto truth = [&](std::int64_t id) { return g.label(bundle.row_of.at(id)); };
  auto oracle = make_mock_oracle(truth, g.class_names());

  auto responses = consult_many(*oracle, prompts, g.class_names(), RetryPolicy{}, nullptr, 4);
  REQUIRE(responses.size() == prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    REQUIRE(responses[i].label.has_value());
    CHECK(*responses[i].label ==
          g.class_name(g.label(bundle.row_of.at(prompts[i].node_idx))));
  }
}
