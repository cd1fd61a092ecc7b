#include "login/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace login {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

OptimizerRule optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerRule::Adam;
  if (name == "sgd") return OptimizerRule::Sgd;
  fail(ErrorKind::Config, "unknown optimizer '" + name + "'");
}

}  // namespace

RunConfig RunConfig::from_config(const ConfigFile& file) {
  RunConfig cfg;
  cfg.arch = arch_from_name(file.get_str("model", "gcn"));
  cfg.hidden = file.get_int("hidden", cfg.hidden);
  cfg.dropout = file.get_double("dropout", cfg.dropout);
  cfg.epochs = file.get_int("epochs", cfg.epochs);
  cfg.patience = file.get_int("patience", cfg.patience);
  cfg.lr = file.get_double("lr", cfg.lr);
  cfg.optimizer = optimizer_from_name(file.get_str("optimizer", "adam"));
  cfg.mixhop_powers = file.get_int_list("mixhop_powers", cfg.mixhop_powers);
  cfg.mc_samples = file.get_int("mc_samples", cfg.mc_samples);
  std::string gamma = file.get_str("gamma", "auto");
  cfg.gamma = gamma == "auto" ? -1.0 : std::stod(gamma);
  cfg.d_th = file.get_double("d_th", cfg.d_th);
  cfg.max_iterations = file.get_int("max_iterations", cfg.max_iterations);
  cfg.seeds = file.get_u64_list("seeds", cfg.seeds);
  cfg.consult_backend = file.get_str("consult_backend", cfg.consult_backend);
  cfg.noisy_flip_prob = file.get_double("noisy_flip_prob", cfg.noisy_flip_prob);
  cfg.consult_endpoint = file.get_str("consult_endpoint", "http://127.0.0.1:8000");
  cfg.consult_model = file.get_str("consult_model", "vicuna-7b-v1.5");
  cfg.consult_temperature = file.get_double("consult_temperature", 0.0);
  cfg.max_inflight = file.get_int("max_inflight", cfg.max_inflight);
  cfg.retry.max_retries = file.get_int("retries", cfg.retry.max_retries);
  cfg.retry.base_delay_ms = file.get_int("retry_base_ms", cfg.retry.base_delay_ms);
  cfg.encoder_backend = file.get_str("encoder_backend", cfg.encoder_backend);
  cfg.encoder_dim = file.get_int("encoder_dim", cfg.encoder_dim);
  cfg.embed_endpoint = file.get_str("embed_endpoint", "http://127.0.0.1:8001");
  cfg.embed_model = file.get_str("embed_model", "text-embedding");
  cfg.dataset_dir = file.get_str("dataset", "");
  cfg.run_dir = file.get_str("run_dir", "runs/latest");
  cfg.cache_dir = file.get_str("cache_dir", "");
  if (cfg.max_iterations < 1) fail(ErrorKind::Config, "max_iterations must be >= 1");
  if (cfg.seeds.empty()) fail(ErrorKind::Config, "seeds must be non-empty");
  return cfg;
}

// ---------------------------------------------------------------------------
// label guard
// ---------------------------------------------------------------------------

LabelGuard::LabelGuard(const TextAttributedGraph& g) {
  labels_ = g.labels();
  split_.resize(g.node_count());
  for (int v = 0; v < g.node_count(); ++v) split_[v] = g.split(v);
}

int LabelGuard::label(int row) const {
  if (!unlocked_ && split_[row] == Split::Test) {
    ++denied_;
    fail(ErrorKind::Guard,
         "test label read before final evaluation (row " + std::to_string(row) + ")");
  }
  return labels_[row];
}

std::optional<int> LabelGuard::observed(int row) const {
  if (!unlocked_ && split_[row] == Split::Test) return std::nullopt;
  return labels_[row];
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

double guarded_accuracy(const std::vector<int>& pred, const LabelGuard& guard,
                        const std::vector<int>& rows) {
  if (rows.empty()) fail(ErrorKind::Numeric, "accuracy: empty node mask");
  int hit = 0;
  for (int n : rows)
    if (pred[n] == guard.label(n)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

Matrix eval_forward(const GnnModel& model, const GraphOperators& ops, const ModelInputs& in) {
  return forward(model, ops, in, DropoutMask::ones(model.hidden_width()), false);
}

}  // namespace

TrainedModel pretrain(const RunConfig& cfg, const TextAttributedGraph& g, const Matrix& x,
                      std::uint64_t stream_seed, const LabelGuard& guard) {
  std::vector<int> train_rows = g.nodes_in_split(Split::Train);
  std::vector<int> val_rows = g.nodes_in_split(Split::Val);
  if (train_rows.empty()) fail(ErrorKind::Config, "pretrain: no train nodes in split");

  std::vector<int> labels(g.node_count(), -1);
  for (int n : train_rows) labels[n] = guard.label(n);

  GraphOperators ops = build_operators(g);
  TrainedModel out{init_model(cfg.arch, x.cols, cfg.hidden, g.class_count(), cfg.dropout,
                              cfg.mixhop_powers, Rng::derive(stream_seed, {tag("init")})),
                   0.0, 0};
  if (cfg.epochs == 0) return out;

  ModelInputs in = build_inputs(out.model, ops, x);
  Optimizer opt({cfg.optimizer, cfg.lr});

  ModelParameters best_params = out.model.params;
  double best_val = -1.0;
  int since_best = 0;
  int width = out.model.hidden_width();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<DropoutMask> masks;
    masks.reserve(cfg.mc_samples);
    for (int t = 0; t < cfg.mc_samples; ++t)
      masks.push_back(DropoutMask::sample(
          width, cfg.dropout,
          Rng::derive(stream_seed, {tag("mask"), static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(t)}),
          static_cast<std::uint64_t>(epoch) * cfg.mc_samples + t));

    LossAndGrads lg = loss_and_grads(out.model, ops, in, masks, train_rows, labels);
    if (!std::isfinite(lg.loss))
      fail(ErrorKind::Numeric, "training diverged at epoch " + std::to_string(epoch));
    out.model.params = opt.step(out.model.params, lg.grads);
    out.epochs_run = epoch + 1;

    if (!val_rows.empty()) {
      std::vector<int> pred = predict_labels(eval_forward(out.model, ops, in));
      double val_acc = guarded_accuracy(pred, guard, val_rows);
      if (val_acc > best_val) {
        best_val = val_acc;
        best_params = out.model.params;
        since_best = 0;
      } else if (cfg.patience > 0 && ++since_best > cfg.patience) {
        break;
      }
    }
  }
  if (!val_rows.empty()) {
    out.model.params = best_params;
    out.best_val_acc = best_val;
  }
  return out;
}

// ---------------------------------------------------------------------------
// reporting
// ---------------------------------------------------------------------------

namespace {

double mean_of_field(const std::vector<SeedOutcome>& rows, double SeedOutcome::*field) {
  double acc = 0.0;
  for (const SeedOutcome& r : rows) acc += r.*field;
  return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
}

std::optional<double> std_of_field(const std::vector<SeedOutcome>& rows,
                                   double SeedOutcome::*field) {
  if (rows.size() < 2) return std::nullopt;
  double mean = mean_of_field(rows, field);
  double ss = 0.0;
  for (const SeedOutcome& r : rows) {
    double d = r.*field - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(rows.size() - 1));
}

}  // namespace

double RunReport::mean_vanilla_test() const {
  return mean_of_field(per_seed, &SeedOutcome::vanilla_test);
}
double RunReport::mean_login_test() const {
  return mean_of_field(per_seed, &SeedOutcome::login_test);
}
std::optional<double> RunReport::std_vanilla_test() const {
  return std_of_field(per_seed, &SeedOutcome::vanilla_test);
}
std::optional<double> RunReport::std_login_test() const {
  return std_of_field(per_seed, &SeedOutcome::login_test);
}

std::string RunReport::to_table() const {
  std::ostringstream out;
  char line[256];
  out << "seed  vanilla_val  vanilla_test";
  if (has_login) out << "  login_val  login_test  |V_uc|  |V_r|  |V_w|  unparse  pruned";
  out << "\n";
  for (const SeedOutcome& r : per_seed) {
    if (has_login) {
      std::snprintf(line, sizeof line,
                    "%4llu  %11.4f  %12.4f  %9.4f  %10.4f  %6d  %5d  %5d  %7d  %6d\n",
                    static_cast<unsigned long long>(r.seed), r.vanilla_val, r.vanilla_test,
                    r.login_val, r.login_test, r.uncertain_count, r.right_count, r.wrong_count,
                    r.unparseable_count, r.edges_pruned);
    } else {
      std::snprintf(line, sizeof line, "%4llu  %11.4f  %12.4f\n",
                    static_cast<unsigned long long>(r.seed), r.vanilla_val, r.vanilla_test);
    }
    out << line;
  }
  auto fmt_std = [](std::optional<double> v) {
    char buf[32];
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::snprintf(line, sizeof line, "mean vanilla_test %.4f (std %s)\n", mean_vanilla_test(),
                fmt_std(std_vanilla_test()).c_str());
  out << line;
  if (has_login) {
    std::snprintf(line, sizeof line, "mean login_test   %.4f (std %s)\n", mean_login_test(),
                  fmt_std(std_login_test()).c_str());
    out << line;
    std::snprintf(line, sizeof line, "gamma used        %.4f\n", gamma_used);
    out << line;
  }
  return out.str();
}

std::string RunReport::to_jsonl() const {
  std::ostringstream out;
  for (const SeedOutcome& r : per_seed) {
    nlohmann::ordered_json j;
    j["kind"] = "seed";
    j["seed"] = r.seed;
    j["vanilla_val"] = r.vanilla_val;
    j["vanilla_test"] = r.vanilla_test;
    if (has_login) {
      j["login_val"] = r.login_val;
      j["login_test"] = r.login_test;
      j["uncertain"] = r.uncertain_count;
      j["right"] = r.right_count;
      j["wrong"] = r.wrong_count;
      j["unparseable"] = r.unparseable_count;
      j["edges_pruned"] = r.edges_pruned;
      j["seconds"] = {{"pretrain", r.seconds.pretrain},
                      {"uncertainty", r.seconds.uncertainty},
                      {"consult", r.seconds.consult},
                      {"feedback", r.seconds.feedback},
                      {"retrain", r.seconds.retrain},
                      {"eval", r.seconds.eval}};
    }
    out << j.dump() << "\n";
  }
  nlohmann::ordered_json s;
  s["kind"] = "summary";
  s["mean_vanilla_test"] = mean_vanilla_test();
  if (auto v = std_vanilla_test()) s["std_vanilla_test"] = *v;
  if (has_login) {
    s["mean_login_test"] = mean_login_test();
    if (auto v = std_login_test()) s["std_login_test"] = *v;
    s["gamma_used"] = gamma_used;
  }
  out << s.dump() << "\n";
  return out.str();
}

void write_report_files(const std::string& run_dir, const RunReport& report) {
  fs::create_directories(run_dir);
  std::ofstream txt(fs::path(run_dir) / "report.txt");
  txt << report.to_table();
  std::ofstream jsonl(fs::path(run_dir) / "report.jsonl");
  jsonl << report.to_jsonl();
}

// ---------------------------------------------------------------------------
// run orchestration
// ---------------------------------------------------------------------------

RunInputs inputs_from_bundle(const DatasetBundle& bundle) {
  RunInputs in;
  in.dataset_name = bundle.name;
  in.prompt = bundle.prompt;
  DatasetBundle copy = bundle;  // keep the bundle alive inside the closure
  in.graph_for_seed = [copy](std::uint64_t seed) { return copy.graph_for_seed(seed); };
  in.embeddings = bundle.embeddings;
  return in;
}

namespace {

std::unique_ptr<EncoderBackend> make_encoder(const RunConfig& cfg, int dim) {
  if (cfg.encoder_backend == "hash") return make_hash_encoder(dim);
  if (cfg.encoder_backend == "remote-embedding") {
    std::string cache = cfg.cache_dir.empty() ? "" : cfg.cache_dir + "/embeddings.jsonl";
    return make_remote_encoder(cfg.embed_endpoint, cfg.embed_model, api_token_from_env(), dim,
                               cache, cfg.retry.max_retries, cfg.retry.base_delay_ms);
  }
  fail(ErrorKind::Config, "unknown encoder backend '" + cfg.encoder_backend + "'");
}

std::unique_ptr<ConsultantBackend> make_consultant(const RunConfig& cfg,
                                                   const TextAttributedGraph& g,
                                                   const LabelGuard& guard,
                                                   const ResponseCache* cache,
                                                   std::uint64_t seed,
                                                   const std::string& dataset_name) {
  std::map<std::int64_t, int> row_of;
  for (int r = 0; r < g.node_count(); ++r) row_of[g.node_id(r)] = r;
  auto truth = [row_of, &guard](std::int64_t id) { return guard.label(row_of.at(id)); };
  if (cfg.consult_backend == "mock-oracle")
    return make_mock_oracle(truth, g.class_names());
  if (cfg.consult_backend == "mock-noisy")
    return make_mock_noisy(truth, g.class_names(), cfg.noisy_flip_prob, seed);
  if (cfg.consult_backend == "replay-cache") {
    if (!cache) fail(ErrorKind::Config, "replay-cache backend needs a cache directory");
    return make_replay(cache, dataset_name);
  }
  if (cfg.consult_backend == "remote-chat")
    return make_remote_chat(cfg.consult_endpoint, cfg.consult_model, api_token_from_env(),
                            cfg.consult_temperature);
  fail(ErrorKind::Config, "unknown consult backend '" + cfg.consult_backend + "'");
}

double auto_gamma(const TextAttributedGraph& g) {
  double h = heterophilic_fraction(g);
  double rounded = std::lround(h * 20.0) / 20.0;  // nearest 0.05
  return std::clamp(rounded, 0.05, 1.0);
}

struct SeedArtifacts {
  std::string dir;  // empty: no persistence
};

void persist_iteration(const SeedArtifacts& art, int iter, const TextAttributedGraph& g,
                       const UncertaintyReport& report, const std::vector<int>& predictions,
                       const FeedbackPlan& plan, const TextAttributedGraph& pruned,
                       const Matrix& updated_x) {
  if (art.dir.empty()) return;
  fs::path dir = fs::path(art.dir) / ("iter_" + std::to_string(iter));
  fs::create_directories(dir);
  write_uncertainty_report((dir / "uncertainty.tsv").string(), report, g.node_ids());

  std::ofstream pred_out(dir / "predictions.tsv");
  for (int r = 0; r < g.node_count(); ++r)
    pred_out << g.node_id(r) << '\t' << g.class_name(predictions[r]) << '\n';

  nlohmann::ordered_json pj;
  pj["d_th"] = plan.d_th;
  auto ids = [&g](const std::vector<int>& rows) {
    std::vector<std::int64_t> out;
    for (int r : rows) out.push_back(g.node_id(r));
    return out;
  };
  pj["right"] = ids(plan.right);
  pj["wrong"] = ids(plan.wrong);
  pj["isolated"] = ids(plan.isolated);
  pj["unparseable"] = plan.unparseable;
  nlohmann::ordered_json removals = nlohmann::ordered_json::array();
  for (auto [u, v] : plan.removals)
    removals.push_back({g.node_id(u), g.node_id(v)});
  pj["removals"] = std::move(removals);
  std::ofstream plan_out(dir / "plan.json");
  plan_out << pj.dump(2) << "\n";

  std::ofstream edges_out(dir / "pruned_edges.txt");
  for (auto [u, v] : plan.removals)
    edges_out << g.node_id(u) << " " << g.node_id(v) << "\n";

  write_edges((dir / "graph_edges.txt").string(), pruned);
  write_embeddings((dir / "embeddings.jsonl").string(), g.node_ids(), updated_x);
}

}  // namespace

RunReport run_login_impl(const RunConfig& cfg, const RunInputs& inputs, bool with_login) {
  RunReport report;
  report.has_login = with_login;

  std::unique_ptr<ResponseCache> cache;
  std::string cache_dir = cfg.cache_dir.empty()
                              ? (cfg.run_dir.empty() ? "" : cfg.run_dir + "/cache")
                              : cfg.cache_dir;
  if (with_login && !cache_dir.empty()) {
    fs::create_directories(cache_dir);
    cache = std::make_unique<ResponseCache>(cache_dir + "/responses.jsonl");
  }

  for (std::uint64_t seed : cfg.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    auto stage = std::chrono::steady_clock::now();

    TextAttributedGraph g0 = inputs.graph_for_seed(seed);
    LabelGuard guard(g0);

    Matrix x0;
    if (inputs.embeddings) {
      x0 = *inputs.embeddings;
      if (x0.rows != g0.node_count())
        fail(ErrorKind::Dataset, "embedding row count does not match graph");
    } else {
      auto enc = make_encoder(cfg, cfg.encoder_dim);
      x0 = enc->encode(g0.texts());
    }
    auto enc = make_encoder(cfg, x0.cols);

    // vanilla = the paired pretrained model on the untouched inputs
    stage = std::chrono::steady_clock::now();
    TrainedModel vanilla = pretrain(cfg, g0, x0, stream_seed(seed, "pretrain"), guard);
    outcome.seconds.pretrain = seconds_since(stage);

    TextAttributedGraph g = g0;
    Matrix x = x0;
    TrainedModel current = vanilla;

    if (with_login) {
      double gamma = cfg.gamma > 0.0 ? cfg.gamma : auto_gamma(g0);
      report.gamma_used = gamma;
      SeedArtifacts art{cfg.run_dir.empty()
                            ? ""
                            : cfg.run_dir + "/seed_" + std::to_string(seed)};
      auto backend =
          make_consultant(cfg, g0, guard, cache.get(), seed, inputs.dataset_name);

      for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        GraphOperators ops = build_operators(g);

        stage = std::chrono::steady_clock::now();
        UncertaintyConfig ucfg{cfg.mc_samples, cfg.dropout, gamma,
                               stream_seed(seed, "mc", iter)};
        std::vector<Matrix> samples = mc_sample(current.model, ops, x, ucfg);
        std::vector<double> scores = variance_scores(samples);
        Matrix digest;
        kernels::mean_of(samples, digest);
        UncertaintyReport ureport =
            select_uncertain(scores, digest, g.nodes_in_split(Split::Train), gamma);
        std::vector<int> predictions = predict_labels(ureport.mean_prediction);
        outcome.seconds.uncertainty += seconds_since(stage);
        outcome.uncertain_count = static_cast<int>(ureport.uncertain.size());

        stage = std::chrono::steady_clock::now();
        PromptMeta meta = inputs.prompt;
        meta.dataset = inputs.dataset_name.empty() ? meta.dataset : inputs.dataset_name;
        std::vector<PromptDocument> prompts;
        prompts.reserve(ureport.uncertain.size());
        auto observed = [&guard](int row) { return guard.observed(row); };
        for (int row : ureport.uncertain)
          prompts.push_back(build_prompt(g, observed, predictions, ureport, row, meta));
        std::vector<ConsultResponse> responses =
            consult_many(*backend, prompts, g.class_names(), cfg.retry, cache.get(),
                         cfg.max_inflight);
        outcome.seconds.consult += seconds_since(stage);

        stage = std::chrono::steady_clock::now();
        std::vector<Consultation> consultations;
        for (std::size_t i = 0; i < prompts.size(); ++i)
          consultations.push_back({prompts[i].target_row, responses[i]});
        auto truth = [&guard](int row) { return guard.label(row); };
        FeedbackPlan plan = verdict(consultations, truth, g, ureport, cfg.d_th);
        plan_pruning(g, x, plan);  // similarities on pre-update features
        Matrix x_next = update_features(x, plan, g.texts(), *enc);
        TextAttributedGraph g_next = prune_edges(g, plan.removals);
        outcome.seconds.feedback += seconds_since(stage);
        outcome.right_count = static_cast<int>(plan.right.size());
        outcome.wrong_count = static_cast<int>(plan.wrong.size());
        outcome.unparseable_count += plan.unparseable;
        outcome.edges_pruned += static_cast<int>(plan.removals.size());
        if (!plan.isolated.empty())
          std::cerr << "[login] seed " << seed << " iter " << iter << ": pruning isolated "
                    << plan.isolated.size() << " wrong node(s)\n";

        persist_iteration(art, iter, g, ureport, predictions, plan, g_next, x_next);
        g = std::move(g_next);
        x = std::move(x_next);

        stage = std::chrono::steady_clock::now();
        current = pretrain(cfg, g, x, stream_seed(seed, "retrain", iter), guard);
        outcome.seconds.retrain += seconds_since(stage);
      }
      if (!art.dir.empty()) {
        fs::create_directories(art.dir);
        save_model((fs::path(art.dir) / "model.json").string(), current.model);
      }
    }

    // final evaluation: the only place test labels are read
    stage = std::chrono::steady_clock::now();
    guard.unlock_for_final_eval();
    {
      GraphOperators ops0 = build_operators(g0);
      ModelInputs in0 = build_inputs(vanilla.model, ops0, x0);
      std::vector<int> pred = predict_labels(eval_forward(vanilla.model, ops0, in0));
      outcome.vanilla_val = guarded_accuracy(pred, guard, g0.nodes_in_split(Split::Val));
      outcome.vanilla_test = guarded_accuracy(pred, guard, g0.nodes_in_split(Split::Test));
    }
    if (with_login) {
      GraphOperators ops = build_operators(g);
      ModelInputs in = build_inputs(current.model, ops, x);
      std::vector<int> pred = predict_labels(eval_forward(current.model, ops, in));
      outcome.login_val = guarded_accuracy(pred, guard, g.nodes_in_split(Split::Val));
      outcome.login_test = guarded_accuracy(pred, guard, g.nodes_in_split(Split::Test));
    }
    outcome.seconds.eval = seconds_since(stage);
    report.per_seed.push_back(outcome);
  }

  if (!cfg.run_dir.empty()) write_report_files(cfg.run_dir, report);
  return report;
}

RunReport run_login(const RunConfig& cfg, const RunInputs& inputs) {
  return run_login_impl(cfg, inputs, true);
}

RunReport evaluate_vanilla(const RunConfig& cfg, const RunInputs& inputs) {
  return run_login_impl(cfg, inputs, false);
}

int consult_from_report(const RunConfig& cfg, const DatasetBundle& bundle,
                        std::uint64_t seed, const std::string& report_path,
                        const std::string& predictions_path) {
  TextAttributedGraph g = bundle.graph_for_seed(seed);
  LabelGuard guard(g);

  std::vector<UncertaintyLine> lines = read_uncertainty_report(report_path);
  UncertaintyReport report;
  report.scores.assign(g.node_count(), 0.0);
  for (const UncertaintyLine& l : lines) {
    auto it = bundle.row_of.find(l.node_id);
    if (it == bundle.row_of.end())
      fail(ErrorKind::Dataset, "uncertainty report names unknown node " +
                                   std::to_string(l.node_id));
    report.scores[it->second] = l.score;
    if (l.selected) report.uncertain.push_back(it->second);
  }
  std::sort(report.uncertain.begin(), report.uncertain.end());

  std::vector<int> predictions(g.node_count(), 0);
  {
    std::ifstream in(predictions_path);
    if (!in) fail(ErrorKind::Dataset, "missing file: " + predictions_path);
    std::int64_t id;
    std::string cls;
    std::map<std::string, int> class_idx;
    for (int c = 0; c < g.class_count(); ++c) class_idx[g.class_name(c)] = c;
    while (in >> id >> cls) {
      auto it = bundle.row_of.find(id);
      if (it == bundle.row_of.end())
        fail(ErrorKind::Dataset, "predictions name unknown node " + std::to_string(id));
      auto ct = class_idx.find(cls);
      if (ct == class_idx.end())
        fail(ErrorKind::Dataset, "predictions carry unknown label '" + cls + "'");
      predictions[it->second] = ct->second;
    }
  }

  std::string cache_dir = cfg.cache_dir.empty() ? cfg.run_dir + "/cache" : cfg.cache_dir;
  fs::create_directories(cache_dir);
  ResponseCache cache(cache_dir + "/responses.jsonl");
  auto backend = make_consultant(cfg, g, guard, &cache, seed, bundle.name);

  auto observed = [&guard](int row) { return guard.observed(row); };
  std::vector<PromptDocument> prompts;
  for (int row : report.uncertain)
    prompts.push_back(build_prompt(g, observed, predictions, report, row, bundle.prompt));
  consult_many(*backend, prompts, g.class_names(), cfg.retry, &cache, cfg.max_inflight);
  return static_cast<int>(prompts.size());
}

}  // namespace login
