#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "crftk/features.hpp"
#include "crftk/tree.hpp"
#include "crftk/types.hpp"

namespace crftk {

// Training regimes for trees whose root label is observed but whose other
// nodes are (partially) hidden: a max-margin objective over best completions,
// or a marginalized one that sums the hidden nodes out.
enum class LatentMode { MaxMargin, Marginalized };

struct LatentObjectiveConfig {
  LatentMode mode = LatentMode::MaxMargin;
  double c = 1e-3;       // weight of the (1/2)c·||theta||^2 term (max-margin only)
  int epochs = 1000;
  double eta0 = 0.1;     // step size eta0 / (1 + epoch)
  double tol = 1e-6;     // stop when the relative objective change drops below
  uint64_t seed = 1;     // instance shuffling
};

// Clamp built from the instance's observed labels, with the root forced to
// root_label regardless of what is stored there.
LabelClamp latent_clamp(const TreeInstance& inst, int root_label);

// Best completion (max-product) with observed nodes clamped and the root
// forced to root_label.
TreeViterbiResult constrained_map(const TreeInstance& inst, const FeatureIndex& idx,
                                  const std::vector<double>& w, int root_label);
// Log of the summed exponentiated scores over completions, same clamping.
double constrained_logz(const TreeInstance& inst, const FeatureIndex& idx,
                        const std::vector<double>& w, int root_label);

// Max-margin objective over the batch, minimization direction:
//   (1/2)c||w||^2 - sum_i w . (f(y_i) - f(y'_i))
// with y_i the best completion under the correct root and y'_i the best
// assignment over all wrong roots.
std::pair<double, std::vector<double>> lcrf_loss_subgradient(
    const std::vector<TreeInstance>& batch, const FeatureIndex& idx,
    const std::vector<double>& w, double c);

// Marginalized objective, maximization direction:
//   sum_i constrained_logz(correct root) - constrained_logz(best wrong root)
// with the gradient as the difference of clamped feature expectations.
std::pair<double, std::vector<double>> lmcrf_objective_gradient(
    const std::vector<TreeInstance>& batch, const FeatureIndex& idx,
    const std::vector<double>& w);

struct LatentTrainResult {
  std::vector<double> weights;
  std::vector<double> objective;  // full-batch objective after each epoch
  int epochs_run = 0;
};

// Averaged stochastic (sub)gradient training.  Returns the averaged
// parameters, or the epoch snapshot with the best dev root accuracy when a
// dev split is supplied.
LatentTrainResult train_latent(const std::vector<TreeInstance>& corpus,
                               const FeatureIndex& idx,
                               const LatentObjectiveConfig& cfg,
                               const std::vector<TreeInstance>* dev = nullptr);

// Argmax over root labels of the constrained MAP score (max-margin) or the
// constrained log partition (marginalized); ties fall to the lowest label.
int predict_root(const TreeInstance& inst, const FeatureIndex& idx,
                 const std::vector<double>& w, LatentMode mode);

}  // namespace crftk
