// End-to-end orchestration: pretrain, uncertainty, consultation, feedback,
// retrain, evaluation and reporting.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "login/config.hpp"
#include "login/consult.hpp"
#include "login/dataset.hpp"
#include "login/encoder.hpp"
#include "login/feedback.hpp"
#include "login/models.hpp"
#include "login/uncertainty.hpp"

namespace login {

struct RunConfig {
  Arch arch = Arch::Gcn;
  int hidden = 64;
  double dropout = 0.5;
  int epochs = 200;
  int patience = 30;
  double lr = 1e-2;
  OptimizerRule optimizer = OptimizerRule::Adam;
  std::vector<int> mixhop_powers = {0, 1, 2};

  int mc_samples = 5;     // T
  double gamma = -1.0;    // <= 0 means auto: heterophilic fraction to nearest 0.05
  double d_th = 0.15;
  int max_iterations = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  std::string consult_backend = "mock-oracle";
  double noisy_flip_prob = 0.5;
  std::string consult_endpoint;
  std::string consult_model;
  double consult_temperature = 0.0;
  int max_inflight = 4;
  RetryPolicy retry;

  std::string encoder_backend = "hash";
  int encoder_dim = 256;
  std::string embed_endpoint;
  std::string embed_model;

  std::string dataset_dir;
  std::string run_dir;
  std::string cache_dir;  // empty: <run_dir>/cache

  static RunConfig from_config(const ConfigFile& file);
};

// Guards ground-truth label access: test-split labels are unreadable until
// the final evaluation unlocks them; every read while locked throws and is
// counted.
class LabelGuard {
 public:
  explicit LabelGuard(const TextAttributedGraph& g);

  int label(int row) const;                   // throws on a locked test read
  std::optional<int> observed(int row) const; // nullopt for locked test rows
  Split split(int row) const { return split_[row]; }
  void unlock_for_final_eval() { unlocked_ = true; }
  bool unlocked() const { return unlocked_; }
  long long denied_test_reads() const { return denied_; }

 private:
  std::vector<int> labels_;
  std::vector<Split> split_;
  bool unlocked_ = false;
  mutable long long denied_ = 0;
};

struct TrainedModel {
  GnnModel model;
  double best_val_acc = 0.0;
  int epochs_run = 0;
};

// Trains by minimizing the MC-dropout loss with T fresh masks per epoch,
// early-stopping on a validation-accuracy plateau. Deterministic per stream
// seed; epochs = 0 returns the initialized model.
TrainedModel pretrain(const RunConfig& cfg, const TextAttributedGraph& g, const Matrix& x,
                      std::uint64_t stream_seed, const LabelGuard& guard);

struct StageSeconds {
  double pretrain = 0, uncertainty = 0, consult = 0, feedback = 0, retrain = 0, eval = 0;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double vanilla_val = 0, vanilla_test = 0;
  double login_val = 0, login_test = 0;
  int uncertain_count = 0, right_count = 0, wrong_count = 0;
  int unparseable_count = 0, edges_pruned = 0;
  StageSeconds seconds;
};

struct RunReport {
  bool has_login = true;
  double gamma_used = 0.0;
  std::vector<SeedOutcome> per_seed;

  double mean_vanilla_test() const;
  double mean_login_test() const;
  std::optional<double> std_vanilla_test() const;  // sample std, >= 2 seeds
  std::optional<double> std_login_test() const;
  std::string to_table() const;
  std::string to_jsonl() const;
};

// Everything run_login needs from a dataset, so bundles and synthetic TAGs
// share the entry point.
struct RunInputs {
  std::string dataset_name;
  PromptMeta prompt;
  std::function<TextAttributedGraph(std::uint64_t seed)> graph_for_seed;
  std::optional<Matrix> embeddings;  // row per node; absent: encode texts
};

RunInputs inputs_from_bundle(const DatasetBundle& bundle);

// Algorithm: pretrain, estimate uncertainty, divide, consult, feed back,
// retrain from fresh initialization, iterate; the final test evaluation uses
// the retrained model only. The vanilla row of the report is the paired
// pretrained model evaluated on the untouched graph.
RunReport run_login(const RunConfig& cfg, const RunInputs& inputs);

// Vanilla baseline only (same code path and seed streams as the vanilla row
// inside run_login).
RunReport evaluate_vanilla(const RunConfig& cfg, const RunInputs& inputs);

// Consultation stage against a saved uncertainty report, for cache warming.
// Returns the number of consultations performed.
int consult_from_report(const RunConfig& cfg, const DatasetBundle& bundle,
                        std::uint64_t seed, const std::string& report_path,
                        const std::string& predictions_path);

void write_report_files(const std::string& run_dir, const RunReport& report);

}  // namespace login
