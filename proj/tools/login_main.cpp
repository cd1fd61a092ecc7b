// Command line front door: train | consult | evaluate | homophily | replay |
// split-gen. Exit codes: 0 ok, 2 config, 3 dataset, 4 backend/cache,
// 5 graph/numeric/internal.
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "login/pipeline.hpp"
#include "login/synthetic.hpp"

namespace {

int exit_code_for(login::ErrorKind kind) {
  using login::ErrorKind;
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Dataset: return 3;
    case ErrorKind::Backend:
    case ErrorKind::CacheMiss: return 4;
    default: return 5;
  }
}

login::RunConfig load_run_config(const std::string& config_path, const std::string& dataset,
                                 const std::string& run_dir,
                                 const std::string& backend_override) {
  login::ConfigFile file = config_path.empty() ? login::ConfigFile::defaults()
                                               : login::ConfigFile::parse_file(config_path);
  if (!dataset.empty()) file.set("dataset", dataset);
  if (!run_dir.empty()) file.set("run_dir", run_dir);
  if (!backend_override.empty()) file.set("consult_backend", backend_override);
  login::RunConfig cfg = login::RunConfig::from_config(file);
  if (cfg.dataset_dir.empty())
    login::fail(login::ErrorKind::Config, "no dataset configured (config key 'dataset' or --dataset)");
  return cfg;
}

void print_homophily(const std::string& dataset_dir) {
  login::DatasetBundle bundle = login::load_dataset(dataset_dir);
  auto seeds = bundle.split_seeds();
  login::TextAttributedGraph g = bundle.graph_for_seed(seeds.front());
  std::printf("dataset          %s\n", bundle.name.c_str());
  std::printf("nodes            %d\n", g.node_count());
  std::printf("raw edge lines   %lld\n", static_cast<long long>(bundle.raw_edge_lines));
  std::printf("canonical edges  %lld\n", static_cast<long long>(g.edge_count()));
  std::printf("classes          %d\n", g.class_count());
  std::printf("graph homophily      %.4f\n", login::graph_homophily(g));
  std::printf("heterophilic nodes   %.4f\n", login::heterophilic_fraction(g));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-consulted GNN training"};
  app.require_subcommand(1);

  std::string config_path, dataset_dir, run_dir, report_path, predictions_path, out_path;
  std::uint64_t seed = 0;
  int n_seeds = 5;
  std::string ratios = "0.6,0.2,0.2";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--dataset", dataset_dir, "dataset bundle directory");
    cmd->add_option("--run-dir", run_dir, "run artifact directory");
  };

  CLI::App* train = app.add_subcommand("train", "full consulted training run");
  add_common(train);
  CLI::App* evaluate = app.add_subcommand("evaluate", "vanilla baseline only");
  add_common(evaluate);
  CLI::App* replay = app.add_subcommand("replay", "rerun from the response cache, no network");
  add_common(replay);
  CLI::App* consult = app.add_subcommand("consult", "consult from a saved uncertainty report");
  add_common(consult);
  consult->add_option("--report", report_path, "uncertainty report (tsv)")->required();
  consult->add_option("--predictions", predictions_path, "predictions file (tsv)")->required();
  consult->add_option("--seed", seed, "split seed the report was computed on");

  CLI::App* homophily = app.add_subcommand("homophily", "print homophily statistics");
  homophily->add_option("--dataset", dataset_dir, "dataset bundle directory")->required();

  CLI::App* splitgen = app.add_subcommand("split-gen", "generate per-seed splits");
  splitgen->add_option("--dataset", dataset_dir, "dataset bundle directory")->required();
  splitgen->add_option("--seeds", n_seeds, "number of seeds (1..n)");
  splitgen->add_option("--ratios", ratios, "train,val,test ratios");
  splitgen->add_option("--out", out_path, "output path (default: <dataset>/splits.jsonl)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (homophily->parsed()) {
      print_homophily(dataset_dir);
      return 0;
    }
    if (splitgen->parsed()) {
      login::DatasetBundle bundle = login::load_dataset(dataset_dir);
      login::SplitRatios r;
      if (std::sscanf(ratios.c_str(), "%lf,%lf,%lf", &r.train, &r.val, &r.test) != 3)
        login::fail(login::ErrorKind::Config, "--ratios expects three comma-separated numbers");
      std::vector<std::uint64_t> seeds;
      for (int s = 1; s <= n_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
      auto splits = login::generate_splits(bundle.node_count(), seeds, r);
      std::string out = out_path.empty() ? dataset_dir + "/splits.jsonl" : out_path;
      login::write_splits(out, splits, bundle.node_ids);
      std::printf("wrote %zu split assignments to %s\n", splits.size(), out.c_str());
      return 0;
    }

    std::string backend_override = replay->parsed() ? "replay-cache" : "";
    login::RunConfig cfg = load_run_config(config_path, dataset_dir, run_dir, backend_override);
    login::DatasetBundle bundle = login::load_dataset(cfg.dataset_dir);

    if (consult->parsed()) {
      std::uint64_t s = seed != 0 ? seed : cfg.seeds.front();
      int n = login::consult_from_report(cfg, bundle, s, report_path, predictions_path);
      std::printf("consulted %d node(s); cache warmed under %s\n", n,
                  (cfg.cache_dir.empty() ? cfg.run_dir + "/cache" : cfg.cache_dir).c_str());
      return 0;
    }

    login::RunInputs inputs = login::inputs_from_bundle(bundle);
    login::RunReport report = evaluate->parsed() ? login::evaluate_vanilla(cfg, inputs)
                                                 : login::run_login(cfg, inputs);
    std::cout << report.to_table();
    if (!cfg.run_dir.empty()) std::cout << "artifacts under " << cfg.run_dir << "\n";
    return 0;
  } catch (const login::LoginError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
}
