#include "login/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "login/kernels.hpp"

namespace login {

bool UncertaintyReport::is_uncertain(int row) const {
  return std::binary_search(uncertain.begin(), uncertain.end(), row);
}

std::vector<Matrix> mc_sample(const GnnModel& model, const GraphOperators& ops,
                              const Matrix& x, const UncertaintyConfig& cfg) {
  if (cfg.samples < 1) fail(ErrorKind::Config, "mc_sample: T must be >= 1");
  ModelInputs in = build_inputs(model, ops, x);
  std::vector<Matrix> out;
  out.reserve(cfg.samples);
  for (int t = 0; t < cfg.samples; ++t) {
    DropoutMask mask = DropoutMask::sample(
        model.hidden_width(), model.dropout,
        Rng::derive(cfg.rng_seed, {tag("mc-sample"), static_cast<std::uint64_t>(t)}),
        static_cast<std::uint64_t>(t));
    out.push_back(forward(model, ops, in, mask, model.dropout > 0.0));
  }
  return out;
}

std::vector<double> variance_scores(const std::vector<Matrix>& samples) {
  std::vector<double> scores;
  kernels::variance_scores(samples, scores);
  return scores;
}

UncertaintyReport select_uncertain(const std::vector<double>& scores,
                                   const Matrix& mean_prediction,
                                   const std::vector<int>& train_rows, double gamma) {
  if (train_rows.empty()) fail(ErrorKind::Config, "select_uncertain: empty train set");
  double want = gamma * static_cast<double>(train_rows.size());
  if (want < 1.0 - 1e-12)
    fail(ErrorKind::Config, "select_uncertain: gamma * |train| < 1");
  int k = static_cast<int>(std::floor(want + 0.5));  // round half up
  k = std::max(1, std::min(k, static_cast<int>(train_rows.size())));

  std::vector<int> order = train_rows;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  UncertaintyReport rep;
  rep.scores = scores;
  rep.mean_prediction = mean_prediction;
  rep.uncertain.assign(order.begin(), order.begin() + k);
  rep.certain.assign(order.begin() + k, order.end());
  std::sort(rep.uncertain.begin(), rep.uncertain.end());
  std::sort(rep.certain.begin(), rep.certain.end());
  return rep;
}

void write_uncertainty_report(const std::string& path, const UncertaintyReport& report,
                              const std::vector<std::int64_t>& node_ids) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Dataset, "cannot write uncertainty report " + path);
  char buf[64];
  for (std::size_t row = 0; row < report.scores.size(); ++row) {
    std::snprintf(buf, sizeof buf, "%.17g", report.scores[row]);
    out << node_ids[row] << '\t' << buf << '\t'
        << (report.is_uncertain(static_cast<int>(row)) ? 1 : 0) << '\n';
  }
}

std::vector<UncertaintyLine> read_uncertainty_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Dataset, "cannot read uncertainty report " + path);
  std::vector<UncertaintyLine> lines;
  std::int64_t id;
  double score;
  int flag;
  while (in >> id >> score >> flag) lines.push_back({id, score, flag != 0});
  return lines;
}

}  // namespace login
