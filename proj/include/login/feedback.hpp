// The complementary coping mechanism: verdict consultations against ground
// truth, re-encode right nodes' texts with the returned explanations, prune
// low-similarity edges around wrong nodes.
#pragma once

#include <string>
#include <vector>

#include "login/consult.hpp"
#include "login/encoder.hpp"
#include "login/graph.hpp"

namespace login {

struct Consultation {
  int row = -1;  // internal row of the consulted node
  ConsultResponse response;
};

struct FeedbackPlan {
  std::vector<int> right;  // V_r, ascending rows
  std::vector<int> wrong;  // V_w, ascending rows (unparseable lands here)
  std::vector<std::string> right_explanations;  // aligned to `right`
  double d_th = 0.15;
  EdgeList removals;            // undirected pairs, canonical u < v
  std::vector<int> isolated;    // wrong nodes left with degree 0 by the removals
  int unparseable = 0;
};

// Truth provider for consulted nodes; consulted nodes are train nodes, so
// this read is always legal under the label guard.
using TruthFn = std::function<int(int row)>;

// Right iff the parsed label equals ground truth; unparseable counts as
// wrong. Every consultation must belong to the uncertain set.
FeedbackPlan verdict(const std::vector<Consultation>& consultations, const TruthFn& truth,
                     const TextAttributedGraph& g, const UncertaintyReport& report,
                     double d_th);

// Rows of V_r are re-encoded from the node text with the explanation
// appended ("\nExplanation: " separator); every other row is untouched.
Matrix update_features(const Matrix& x, const FeedbackPlan& plan,
                       const std::vector<std::string>& texts, EncoderBackend& enc);

// (a . b) / (|a| |b|); zero vectors map to similarity 0.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Fills plan.removals with { (n,i) : n in V_w, i in N(n), cos(x_n, x_i) < d_th }
// and plan.isolated with wrong nodes the removals would isolate. Similarities
// use the features passed in (the pre-update embeddings).
void plan_pruning(const TextAttributedGraph& g, const Matrix& x, FeedbackPlan& plan);

}  // namespace login
