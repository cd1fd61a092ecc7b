#include "login/feedback.hpp"

#include <algorithm>
#include <set>

#include "login/kernels.hpp"

namespace login {

FeedbackPlan verdict(const std::vector<Consultation>& consultations, const TruthFn& truth,
                     const TextAttributedGraph& g, const UncertaintyReport& report,
                     double d_th) {
  FeedbackPlan plan;
  plan.d_th = d_th;
  struct Entry {
    int row;
    bool right;
    std::string explanation;
  };
  std::vector<Entry> entries;
  for (const Consultation& c : consultations) {
    if (!report.is_uncertain(c.row))
      fail(ErrorKind::Guard, "verdict: response for node " + std::to_string(g.node_id(c.row)) +
                                 " outside the uncertain set");
    if (!c.response.label) {
      ++plan.unparseable;
      entries.push_back({c.row, false, ""});
      continue;
    }
    bool right = *c.response.label == g.class_name(truth(c.row));
    entries.push_back({c.row, right, c.response.explanation});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.row < b.row; });
  for (const Entry& e : entries) {
    if (e.right) {
      plan.right.push_back(e.row);
      plan.right_explanations.push_back(e.explanation);
    } else {
      plan.wrong.push_back(e.row);
    }
  }
  return plan;
}

Matrix update_features(const Matrix& x, const FeedbackPlan& plan,
                       const std::vector<std::string>& texts, EncoderBackend& enc) {
  if (enc.dim() != x.cols)
    fail(ErrorKind::Numeric, "update_features: encoder dim does not match embeddings");
  Matrix out = x;
  if (plan.right.empty()) return out;

  std::vector<std::string> augmented;
  augmented.reserve(plan.right.size());
  for (std::size_t i = 0; i < plan.right.size(); ++i)
    augmented.push_back(texts[plan.right[i]] + "\nExplanation: " + plan.right_explanations[i]);

  Matrix rows;
  try {
    rows = enc.encode(augmented);
  } catch (const LoginError& e) {
    throw LoginError(e.kind(), std::string("feature update failed at node row ") +
                                   std::to_string(plan.right.front()) + ": " + e.what());
  }
  if (rows.rows != static_cast<int>(plan.right.size()) || rows.cols != x.cols)
    fail(ErrorKind::Backend, "update_features: encoder returned wrong shape");
  if (!rows.all_finite())
    fail(ErrorKind::Backend, "update_features: encoder returned non-finite row");
  for (std::size_t i = 0; i < plan.right.size(); ++i)
    std::copy(rows.row(static_cast<int>(i)), rows.row(static_cast<int>(i)) + x.cols,
              out.row(plan.right[i]));
  return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    fail(ErrorKind::Numeric, "cosine_similarity: dimension mismatch");
  return kernels::cosine(a.data(), b.data(), static_cast<int>(a.size()));
}

void plan_pruning(const TextAttributedGraph& g, const Matrix& x, FeedbackPlan& plan) {
  plan.removals.clear();
  plan.isolated.clear();
  if (plan.d_th < 0.0 || plan.d_th > 1.0)
    fail(ErrorKind::Config, "similarity threshold must lie in [0,1]");

  // flatten (wrong node, neighbor) candidates, score them in parallel
  std::vector<std::pair<int, int>> cand;
  for (int n : plan.wrong)
    for (int i : g.neighbors(n)) cand.emplace_back(n, i);
  std::vector<double> sim(cand.size());
  std::int64_t m = static_cast<std::int64_t>(cand.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < m; ++k)
    sim[k] = kernels::cosine(x.row(cand[k].first), x.row(cand[k].second), x.cols);

  std::set<std::pair<int, int>> gone;
  for (std::int64_t k = 0; k < m; ++k)
    if (sim[k] < plan.d_th)  // strict: d == d_th keeps the edge
      gone.insert({std::min(cand[k].first, cand[k].second),
                   std::max(cand[k].first, cand[k].second)});
  plan.removals.assign(gone.begin(), gone.end());

  for (int n : plan.wrong) {
    int left = g.degree(n);
    for (int i : g.neighbors(n))
      if (gone.count({std::min(n, i), std::max(n, i)})) --left;
    if (g.degree(n) > 0 && left == 0) plan.isolated.push_back(n);
  }
}

}  // namespace login
