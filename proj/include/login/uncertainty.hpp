// Monte-Carlo-dropout uncertainty: T masked forward passes, per-node
// predictive variance, and selection of the most uncertain train nodes.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "login/models.hpp"

namespace login {

struct UncertaintyConfig {
  int samples = 5;          // T
  double dropout = 0.5;     // theta, shared with the model
  double uncertain_ratio = 0.3;  // gamma in (0, 1]
  std::uint64_t rng_seed = 0;
};

struct UncertaintyReport {
  std::vector<double> scores;    // per node, >= 0
  Matrix mean_prediction;        // mean over the T draws
  std::vector<int> uncertain;    // V_uc, ascending rows, train only
  std::vector<int> certain;      // V_c = train \ V_uc, ascending rows

  bool is_uncertain(int row) const;
};

// T forward passes with independent fresh masks and dropout kept on.
// Reproducible from cfg.rng_seed; sample t uses the stream (seed, t).
std::vector<Matrix> mc_sample(const GnnModel& model, const GraphOperators& ops,
                              const Matrix& x, const UncertaintyConfig& cfg);

// Per-node score: population variance per class over the T samples, summed
// over classes.
std::vector<double> variance_scores(const std::vector<Matrix>& samples);

// Top round(gamma * |train|) train rows by score; ties break toward the
// lower node row. Val/test rows are never selected.
UncertaintyReport select_uncertain(const std::vector<double>& scores,
                                   const Matrix& mean_prediction,
                                   const std::vector<int>& train_rows, double gamma);

// Line-oriented artifact: node_id <tab> score <tab> selected-flag.
void write_uncertainty_report(const std::string& path, const UncertaintyReport& report,
                              const std::vector<std::int64_t>& node_ids);
// Returns (node_id, score, selected) tuples in file order.
struct UncertaintyLine {
  std::int64_t node_id;
  double score;
  bool selected;
};
std::vector<UncertaintyLine> read_uncertainty_report(const std::string& path);

}  // namespace login
