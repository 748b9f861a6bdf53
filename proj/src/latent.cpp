#include "crftk/latent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crftk/numeric.hpp"

namespace crftk {

namespace {

int observed_root(const TreeInstance& inst, int ny) {
  int y = inst.node(inst.root()).label;
  if (y < 0 || y >= ny) throw Error("tree instance has an unobserved root label");
  return y;
}

void require_wrong_label(int ny) {
  if (ny < 2) throw Error("latent training needs at least two labels");
}

// Best completion over every root label except `correct`; ties toward the
// lower wrong label.
TreeViterbiResult best_wrong_map(const TreeInstance& inst, const FeatureIndex& idx,
                                 const std::vector<double>& w, int correct) {
  TreeViterbiResult best;
  best.score = kNegInf;
  for (int r = 0; r < idx.n_labels(); ++r) {
    if (r == correct) continue;
    TreeViterbiResult cand = constrained_map(inst, idx, w, r);
    if (cand.score > best.score) best = std::move(cand);
  }
  return best;
}

int best_wrong_logz_root(const TreeInstance& inst, const FeatureIndex& idx,
                         const std::vector<double>& w, int correct) {
  int arg = -1;
  double hi = kNegInf;
  for (int r = 0; r < idx.n_labels(); ++r) {
    if (r == correct) continue;
    double z = constrained_logz(inst, idx, w, r);
    if (z > hi) { hi = z; arg = r; }
  }
  return arg;
}

}  // namespace

LabelClamp latent_clamp(const TreeInstance& inst, int root_label) {
  LabelClamp clamp(static_cast<size_t>(inst.size()), -1);
  for (int v = 0; v < inst.size(); ++v)
    if (inst.node(v).label >= 0) clamp[static_cast<size_t>(v)] = inst.node(v).label;
  clamp[static_cast<size_t>(inst.root())] = root_label;
  return clamp;
}

TreeViterbiResult constrained_map(const TreeInstance& inst, const FeatureIndex& idx,
                                  const std::vector<double>& w, int root_label) {
  if (root_label < 0 || root_label >= idx.n_labels())
    throw Error("root label out of range");
  return tree_map_decode(inst, idx, w, latent_clamp(inst, root_label));
}

double constrained_logz(const TreeInstance& inst, const FeatureIndex& idx,
                        const std::vector<double>& w, int root_label) {
  if (root_label < 0 || root_label >= idx.n_labels())
    throw Error("root label out of range");
  return tree_upward_downward(inst, idx, w, latent_clamp(inst, root_label)).log_z;
}

std::pair<double, std::vector<double>> lcrf_loss_subgradient(
    const std::vector<TreeInstance>& batch, const FeatureIndex& idx,
    const std::vector<double>& w, double c) {
  if (batch.empty()) throw Error("empty corpus");
  require_wrong_label(idx.n_labels());

  double obj = 0;
  std::vector<double> sub(w.size(), 0.0);
  for (size_t j = 0; j < w.size(); ++j) {
    obj += 0.5 * c * w[j] * w[j];
    sub[j] = c * w[j];
  }
  for (const auto& inst : batch) {
    int gold = observed_root(inst, idx.n_labels());
    TreeViterbiResult y = constrained_map(inst, idx, w, gold);
    TreeViterbiResult wrong = best_wrong_map(inst, idx, w, gold);
    obj -= y.score - wrong.score;  // w . (f(y) - f(y'))
    accumulate_assignment_features(inst, y.labels, idx, -1.0, sub);
    accumulate_assignment_features(inst, wrong.labels, idx, 1.0, sub);
  }
  return {obj, std::move(sub)};
}

std::pair<double, std::vector<double>> lmcrf_objective_gradient(
    const std::vector<TreeInstance>& batch, const FeatureIndex& idx,
    const std::vector<double>& w) {
  if (batch.empty()) throw Error("empty corpus");
  require_wrong_label(idx.n_labels());

  double obj = 0;
  std::vector<double> grad(w.size(), 0.0);
  for (const auto& inst : batch) {
    int gold = observed_root(inst, idx.n_labels());
    int wrong = best_wrong_logz_root(inst, idx, w, gold);
    TreeTrellis tc = tree_upward_downward(inst, idx, w, latent_clamp(inst, gold));
    TreeTrellis tw = tree_upward_downward(inst, idx, w, latent_clamp(inst, wrong));
    obj += tc.log_z - tw.log_z;
    accumulate_expected_features(inst, tc, idx, 1.0, grad);
    accumulate_expected_features(inst, tw, idx, -1.0, grad);
  }
  return {obj, std::move(grad)};
}

LatentTrainResult train_latent(const std::vector<TreeInstance>& corpus,
                               const FeatureIndex& idx,
                               const LatentObjectiveConfig& cfg,
                               const std::vector<TreeInstance>* dev) {
  if (corpus.empty()) throw Error("empty corpus");
  if (cfg.epochs < 1) throw Error("epochs must be >= 1");
  if (cfg.c < 0 || cfg.eta0 <= 0) throw Error("step and regularization must be non-negative");
  require_wrong_label(idx.n_labels());

  const size_t dim = static_cast<size_t>(idx.n_features());
  const double per_inst_c = cfg.c / static_cast<double>(corpus.size());
  std::vector<double> theta(dim, 0.0), avg(dim, 0.0), step(dim);
  long n_steps = 0;

  std::vector<size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(cfg.seed);

  LatentTrainResult res;
  double best_dev = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double eta = cfg.eta0 / (1.0 + epoch);

    for (size_t pos : order) {
      const TreeInstance& inst = corpus[pos];
      int gold = observed_root(inst, idx.n_labels());
      std::fill(step.begin(), step.end(), 0.0);

      if (cfg.mode == LatentMode::MaxMargin) {
        // descend on (1/2)(c/N)||w||^2 - w . (f(y) - f(y'))
        TreeViterbiResult y = constrained_map(inst, idx, theta, gold);
        TreeViterbiResult wrong = best_wrong_map(inst, idx, theta, gold);
        accumulate_assignment_features(inst, y.labels, idx, 1.0, step);
        accumulate_assignment_features(inst, wrong.labels, idx, -1.0, step);
        for (size_t j = 0; j < dim; ++j) theta[j] += eta * (step[j] - per_inst_c * theta[j]);
      } else {
        // ascend on constrained_logz(gold) - constrained_logz(best wrong)
        int wrong = best_wrong_logz_root(inst, idx, theta, gold);
        TreeTrellis tc = tree_upward_downward(inst, idx, theta, latent_clamp(inst, gold));
        TreeTrellis tw = tree_upward_downward(inst, idx, theta, latent_clamp(inst, wrong));
        accumulate_expected_features(inst, tc, idx, 1.0, step);
        accumulate_expected_features(inst, tw, idx, -1.0, step);
        for (size_t j = 0; j < dim; ++j) theta[j] += eta * step[j];
      }

      ++n_steps;
      for (size_t j = 0; j < dim; ++j) avg[j] += (theta[j] - avg[j]) / static_cast<double>(n_steps);
    }

    double obj = cfg.mode == LatentMode::MaxMargin
                     ? lcrf_loss_subgradient(corpus, idx, theta, cfg.c).first
                     : lmcrf_objective_gradient(corpus, idx, theta).first;
    res.objective.push_back(obj);
    res.epochs_run = epoch + 1;

    if (dev) {
      int hits = 0;
      for (const auto& t : *dev)
        if (predict_root(t, idx, avg, cfg.mode) == observed_root(t, idx.n_labels())) ++hits;
      double acc = dev->empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(dev->size());
      if (acc > best_dev) {
        best_dev = acc;
        res.weights = avg;
      }
    }

    if (epoch > 0) {
      double prev = res.objective[static_cast<size_t>(epoch - 1)];
      if (std::abs(obj - prev) / std::max(1.0, std::abs(prev)) < cfg.tol) break;
    }
  }

  if (!dev) res.weights = avg;
  return res;
}

int predict_root(const TreeInstance& inst, const FeatureIndex& idx,
                 const std::vector<double>& w, LatentMode mode) {
  int arg = 0;
  double hi = kNegInf;
  for (int r = 0; r < idx.n_labels(); ++r) {
    double s = mode == LatentMode::MaxMargin ? constrained_map(inst, idx, w, r).score
                                             : constrained_logz(inst, idx, w, r);
    if (s > hi) { hi = s; arg = r; }
  }
  return arg;
}

}  // namespace crftk
