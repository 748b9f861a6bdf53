#pragma once

#include <utility>
#include <vector>

#include "crftk/features.hpp"
#include "crftk/types.hpp"

namespace crftk {

// One segment: inclusive token range [start, end] carrying a single label.
struct Segment {
  int start = 0, end = 0, label = 0;
  bool operator==(const Segment&) const = default;
};

// Segments in left-to-right order, tiling [0, n) exactly; adjacent segments
// carry distinct labels and are at most max_seg_len long.
using SegmentLabeling = std::vector<Segment>;

void validate_segmentation(const SegmentLabeling& segs, int n, int max_seg_len,
                           int n_labels);
// Collapses a per-token labeling into its maximal-run segments.
SegmentLabeling runs_to_segments(const std::vector<int>& tags);

struct SegmentedInstance {
  ChainInstance chain;
  SegmentLabeling gold;
};

struct SmTrellis {
  double log_z = 0;
  int n = 0, n_labels = 0, max_seg_len = 0;
  // alpha[y][i]: mass of prefix segmentations whose last segment ends at i
  // with label y.  beta[y][i]: mass of suffix segmentations whose first
  // segment starts at i with label y (that segment's state score included).
  std::vector<double> alpha, beta;
  std::vector<double> seg_marg;  // [y][end][d]: segment [end-d, end] with label y
  std::vector<double> pos_marg;  // [y][i]: token i covered by a y-segment
  std::vector<double> bnd_marg;  // [boundary-1][prev y][next y], boundaries 1..n-1

  double alpha_at(int y, int i) const { return alpha[static_cast<size_t>(y) * n + i]; }
  double beta_at(int y, int i) const { return beta[static_cast<size_t>(y) * n + i]; }
  double seg_marginal(int y, int end, int d) const {
    return seg_marg[(static_cast<size_t>(y) * n + end) * max_seg_len + d];
  }
  double pos_marginal(int y, int i) const { return pos_marg[static_cast<size_t>(y) * n + i]; }
  double bnd_marginal(int b, int prev, int next) const {
    return bnd_marg[(static_cast<size_t>(b - 1) * n_labels + prev) * n_labels + next];
  }
};

// Sum of the per-position state features over [start, end] under `label`,
// plus the segment-length indicator when the index carries one.
double segment_state_score(const ChainInstance& inst, const FeatureIndex& idx,
                           const std::vector<double>& w, int label, int start, int end);
double score_segmentation(const ChainInstance& inst, const SegmentLabeling& segs,
                          const FeatureIndex& idx, const std::vector<double>& w,
                          int max_seg_len);

SmTrellis sm_forward_backward(const ChainInstance& inst, const FeatureIndex& idx,
                              const std::vector<double>& w, int max_seg_len);

struct SmViterbiResult {
  SegmentLabeling segments;
  double score = 0;
};
// MAP segmentation; ties resolved toward the lowest predecessor label index,
// then the shortest segment (a segment reaching back to the chain start ranks
// after all labeled predecessors).
SmViterbiResult sm_viterbi(const ChainInstance& inst, const FeatureIndex& idx,
                           const std::vector<double>& w, int max_seg_len);

std::pair<double, std::vector<double>> sm_loglik_gradient(
    const std::vector<SegmentedInstance>& corpus, const FeatureIndex& idx,
    const std::vector<double>& w, double l1, double l2, int max_seg_len);

}  // namespace crftk
