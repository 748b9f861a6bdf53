#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "crftk/features.hpp"
#include "crftk/types.hpp"

namespace crftk {

// Log-domain forward/backward quantities for one chain at some order K.
// Slots enumerate the label contexts that can occur at chain positions
// (ascending by encoded id); cells that are structurally impossible at a
// position hold -inf in alpha/beta and 0 in the marginals.
struct TrellisResult {
  double log_z = 0;
  int n = 0, order = 1, n_labels = 0;
  std::vector<uint64_t> contexts;   // slot -> encoded context
  std::vector<double> alpha, beta;  // [slot][pos], log domain
  std::vector<double> state_marg;   // [label][pos]
  std::vector<double> trans_marg;   // [boundary-1][from slot][to slot]

  int n_slots() const { return static_cast<int>(contexts.size()); }
  int slot(uint64_t ctx) const;  // -1 when the context is not a slot
  double alpha_at(int s, int i) const { return alpha[static_cast<size_t>(s) * n + i]; }
  double beta_at(int s, int i) const { return beta[static_cast<size_t>(s) * n + i]; }
  double state_marginal(int y, int i) const {
    return state_marg[static_cast<size_t>(y) * n + i];
  }
  // boundary b joins positions b-1 and b; valid for 1 <= b <= n-1
  double trans_marginal(int b, int from_slot, int to_slot) const {
    size_t s = static_cast<size_t>(n_slots());
    return trans_marg[(static_cast<size_t>(b - 1) * s + from_slot) * s + to_slot];
  }
};

struct ViterbiResult {
  std::vector<int> labels;
  double score = 0;  // unnormalized log score of the returned path
};

// Sum of the registered state-feature weights firing at one position under a
// label context.
double state_score(const ChainInstance& inst, const FeatureIndex& idx,
                   const std::vector<double>& w, int pos, uint64_t ctx);
// Weight of the (from, to) context transition; 0 when unregistered.
double transition_score(const FeatureIndex& idx, const std::vector<double>& w,
                        uint64_t from, uint64_t to);
// Unnormalized log score of a full labeling (state + transition + any begin
// transitions the index carries).
double score_sequence(const ChainInstance& inst, const std::vector<int>& y,
                      const FeatureIndex& idx, const std::vector<double>& w,
                      int order);

TrellisResult forward_backward(const ChainInstance& inst, const FeatureIndex& idx,
                               const std::vector<double>& w, int order);
double sequence_logprob(const ChainInstance& inst, const std::vector<int>& y,
                        const FeatureIndex& idx, const std::vector<double>& w,
                        int order);
// MAP path; ties resolved toward the lowest label index, then the lowest
// predecessor index.
ViterbiResult viterbi(const ChainInstance& inst, const FeatureIndex& idx,
                      const std::vector<double>& w, int order);

// Penalized conditional log-likelihood of a labeled corpus and its ascent
// gradient: sum_i (score(gold_i) - logZ_i) - l1*|w|_1 - l2*|w|_2^2.
std::pair<double, std::vector<double>> loglik_gradient(
    const std::vector<ChainInstance>& corpus, const FeatureIndex& idx,
    const std::vector<double>& w, double l1, double l2, int order);

namespace detail {
// The dedicated first-order path and the tuple-state path; the public
// functions dispatch on order == 1.  Exposed so equivalence tests can run the
// tuple engine at order 1.
TrellisResult forward_backward_first_order(const ChainInstance&, const FeatureIndex&,
                                           const std::vector<double>& w);
TrellisResult forward_backward_tuple(const ChainInstance&, const FeatureIndex&,
                                     const std::vector<double>& w, int order);
ViterbiResult viterbi_first_order(const ChainInstance&, const FeatureIndex&,
                                  const std::vector<double>& w);
ViterbiResult viterbi_tuple(const ChainInstance&, const FeatureIndex&,
                            const std::vector<double>& w, int order);
}  // namespace detail

}  // namespace crftk
