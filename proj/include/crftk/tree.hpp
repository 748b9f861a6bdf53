#pragma once

#include <utility>
#include <vector>

#include "crftk/features.hpp"
#include "crftk/types.hpp"

namespace crftk {

// Belief-propagation tables over one tree.  alpha[y][v] scores the subtree
// rooted at v with v labeled y; beta[y][v] scores the rest of the tree given
// that labeling.  up_msg[v][yp] is the message node v sends to its parent.
struct TreeTrellis {
  double log_z = 0;
  int n = 0, n_labels = 0;
  std::vector<double> alpha, beta;
  std::vector<double> up_msg;
  std::vector<double> node_marg;  // [y][v]
  std::vector<double> edge_marg;  // [v][y_child][y_parent]; root row unused

  double alpha_at(int y, int v) const { return alpha[static_cast<size_t>(y) * n + v]; }
  double beta_at(int y, int v) const { return beta[static_cast<size_t>(y) * n + v]; }
  double node_marginal(int y, int v) const { return node_marg[static_cast<size_t>(y) * n + v]; }
  double edge_marginal(int child, int y_child, int y_parent) const {
    return edge_marg[(static_cast<size_t>(child) * n_labels + y_child) * n_labels + y_parent];
  }
};

// Per-node label restrictions: clamp[v] fixes node v to that label, -1 leaves
// it free.  Pass an empty vector for a fully unconstrained pass.
using LabelClamp = std::vector<int>;

// State score of labeling node v with y: sparse predicates plus dense block.
double tree_state_score(const TreeInstance& inst, const FeatureIndex& idx,
                        const std::vector<double>& w, int v, int y);
// Edge score of child labeled yc under parent labeled yp over the child's relation.
double tree_edge_score(const TreeInstance& inst, const FeatureIndex& idx,
                       const std::vector<double>& w, int child, int yc, int yp);
// Joint (unnormalized, log-domain) score of a full labeling.
double tree_score(const TreeInstance& inst, const std::vector<int>& labels,
                  const FeatureIndex& idx, const std::vector<double>& w);

TreeTrellis tree_upward_downward(const TreeInstance& inst, const FeatureIndex& idx,
                                 const std::vector<double>& w,
                                 const LabelClamp& clamp = {});

struct TreeViterbiResult {
  std::vector<int> labels;
  double score = 0;
};
// MAP labeling under the clamp; ties fall to the lowest label id.
TreeViterbiResult tree_map_decode(const TreeInstance& inst, const FeatureIndex& idx,
                                  const std::vector<double>& w,
                                  const LabelClamp& clamp = {});

// Adds scale * f(x, labels) to out (sparse, dense and edge features).
void accumulate_assignment_features(const TreeInstance& inst,
                                    const std::vector<int>& labels,
                                    const FeatureIndex& idx, double scale,
                                    std::vector<double>& out);
// Adds scale * E[f] under the trellis marginals to out.
void accumulate_expected_features(const TreeInstance& inst, const TreeTrellis& tr,
                                  const FeatureIndex& idx, double scale,
                                  std::vector<double>& out);

// Log-likelihood of fully observed trees (every node label set), with
// elastic-net regularization; returns the objective and its ascent gradient.
std::pair<double, std::vector<double>> tree_loglik_gradient(
    const std::vector<TreeInstance>& corpus, const FeatureIndex& idx,
    const std::vector<double>& w, double l1, double l2);

}  // namespace crftk
