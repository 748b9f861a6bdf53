#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "crftk/chain.hpp"
#include "crftk/features.hpp"
#include "crftk/numeric.hpp"
#include "crftk/tree.hpp"
#include "crftk/types.hpp"
#include "oracles.hpp"

using namespace crftk;

namespace {

#define CHECK_CLOSE(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))

LabelAlphabet make_labels(int ny) {
  LabelAlphabet labels;
  for (int y = 0; y < ny; ++y) labels.add("L" + std::to_string(y));
  return labels;
}

// Star-free chain of nodes: node v hangs off v-1.
TreeInstance path_tree(const ChainInstance& chain) {
  std::vector<TreeNode> nodes(static_cast<size_t>(chain.size()));
  for (int v = 0; v < chain.size(); ++v) {
    nodes[static_cast<size_t>(v)].parent = v - 1;
    nodes[static_cast<size_t>(v)].obs = chain.obs[static_cast<size_t>(v)];
    nodes[static_cast<size_t>(v)].label =
        chain.labeled() ? chain.gold[static_cast<size_t>(v)] : -1;
  }
  return TreeInstance(std::move(nodes));
}

void compare_to_oracle(const TreeInstance& inst, const FeatureIndex& idx,
                       const std::vector<double>& w, const LabelClamp& clamp, double tol) {
  oracle::TreeBrute ref = oracle::brute_tree(inst, idx, w, clamp);
  TreeTrellis tr = tree_upward_downward(inst, idx, w, clamp);
  const int n = inst.size(), ny = idx.n_labels();

  CHECK_CLOSE(tr.log_z, ref.log_z, tol);
  for (int y = 0; y < ny; ++y)
    for (int v = 0; v < n; ++v)
      CHECK_CLOSE(tr.node_marginal(y, v), ref.node_marg[static_cast<size_t>(y) * n + v], tol);
  for (int v = 0; v < n; ++v) {
    if (inst.node(v).parent == -1) continue;
    for (int yc = 0; yc < ny; ++yc)
      for (int yp = 0; yp < ny; ++yp)
        CHECK_CLOSE(tr.edge_marginal(v, yc, yp),
                    ref.edge_marg[(static_cast<size_t>(v) * ny + yc) * ny + yp], tol);
  }

  TreeViterbiResult vit = tree_map_decode(inst, idx, w, clamp);
  CHECK_CLOSE(vit.score, ref.best_score, tol);
  CHECK(vit.labels == ref.best);
}

}  // namespace

TEST_CASE("uniform weights spread tree probability evenly") {
  std::mt19937 rng(1);
  LabelAlphabet labels = make_labels(3);
  TreeInstance inst = oracle::random_tree(rng, 4, 3, 2, 0, 1);
  std::vector<TreeInstance> corpus = {inst};
  FeatureIndex idx = build_feature_index(corpus, labels, FeatureTemplates{}, 1);
  std::vector<double> w(static_cast<size_t>(idx.n_features()), 0.0);

  TreeTrellis tr = tree_upward_downward(inst, idx, w);
  CHECK_CLOSE(tr.log_z, 4 * std::log(3.0), 1e-12);
  for (int v = 0; v < 4; ++v)
    for (int y = 0; y < 3; ++y) CHECK_CLOSE(tr.node_marginal(y, v), 1.0 / 3, 1e-12);

  // clamping the root leaves the three free nodes
  LabelClamp clamp(4, -1);
  clamp[static_cast<size_t>(inst.root())] = 2;
  TreeTrellis tc = tree_upward_downward(inst, idx, w, clamp);
  CHECK_CLOSE(tc.log_z, 3 * std::log(3.0), 1e-12);
  CHECK_CLOSE(tc.node_marginal(2, inst.root()), 1.0, 1e-12);
  CHECK_CLOSE(tc.node_marginal(0, inst.root()), 0.0, 1e-12);

  // all ties resolve downward
  CHECK(tree_map_decode(inst, idx, w).labels == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("a path-shaped tree reproduces the chain quantities") {
  std::mt19937 rng(20240819);
  for (int draw = 0; draw < 25; ++draw) {
    int ny = 2 + static_cast<int>(rng() % 3);
    int n = 1 + static_cast<int>(rng() % 6);
    LabelAlphabet labels = make_labels(ny);
    std::vector<ChainInstance> corpus = {oracle::random_chain(rng, n, ny, 3)};
    FeatureIndex idx = build_feature_index(corpus, labels, {}, 1, 1);
    std::vector<double> w = oracle::random_weights(rng, static_cast<size_t>(idx.n_features()));

    TrellisResult chain_tr = forward_backward(corpus[0], idx, w, 1);
    TreeInstance tree = path_tree(corpus[0]);
    TreeTrellis tree_tr = tree_upward_downward(tree, idx, w);

    CHECK_CLOSE(tree_tr.log_z, chain_tr.log_z, 1e-10);
    for (int y = 0; y < ny; ++y)
      for (int i = 0; i < n; ++i)
        CHECK_CLOSE(tree_tr.node_marginal(y, i), chain_tr.state_marginal(y, i), 1e-10);
    for (int i = 1; i < n; ++i)
      for (int yc = 0; yc < ny; ++yc)
        for (int yp = 0; yp < ny; ++yp)
          CHECK_CLOSE(tree_tr.edge_marginal(i, yc, yp), chain_tr.trans_marginal(i, yp, yc),
                      1e-10);

    ViterbiResult cv = viterbi(corpus[0], idx, w, 1);
    TreeViterbiResult tv = tree_map_decode(tree, idx, w);
    CHECK_CLOSE(tv.score, cv.score, 1e-10);
    CHECK(tv.labels == cv.labels);
  }
}

TEST_CASE("belief propagation matches exhaustive enumeration") {
  std::mt19937 rng(555);
  for (int draw = 0; draw < 60; ++draw) {
    int ny = 2 + static_cast<int>(rng() % 2);
    int n = 1 + static_cast<int>(rng() % 8);
    int dense_width = static_cast<int>(rng() % 3);
    LabelAlphabet labels = make_labels(ny);

    std::vector<TreeInstance> build_corpus = {
        oracle::random_tree(rng, n, ny, 3, dense_width, 2),
        oracle::random_tree(rng, 4, ny, 3, dense_width, 2)};
    FeatureIndex idx = build_feature_index(build_corpus, labels, FeatureTemplates{}, 1);
    std::vector<double> w =
        oracle::random_weights(rng, static_cast<size_t>(idx.n_features()), 0.8);

    compare_to_oracle(build_corpus[0], idx, w, {}, 1e-9);
    // unseen predicates and relations score zero on both sides
    compare_to_oracle(oracle::random_tree(rng, n, ny, 4, dense_width, 3), idx, w, {}, 1e-9);

    // clamp a random subset of nodes
    LabelClamp clamp(static_cast<size_t>(n), -1);
    for (int v = 0; v < n; ++v)
      if (rng() % 3 == 0) clamp[static_cast<size_t>(v)] = static_cast<int>(rng() % ny);
    compare_to_oracle(build_corpus[0], idx, w, clamp, 1e-9);
  }
}

TEST_CASE("node and edge marginals are mutually consistent") {
  std::mt19937 rng(8);
  int ny = 3, n = 7;
  LabelAlphabet labels = make_labels(ny);
  std::vector<TreeInstance> corpus = {oracle::random_tree(rng, n, ny, 3, 2, 2)};
  FeatureIndex idx = build_feature_index(corpus, labels, FeatureTemplates{}, 1);
  std::vector<double> w = oracle::random_weights(rng, static_cast<size_t>(idx.n_features()));

  TreeTrellis tr = tree_upward_downward(corpus[0], idx, w);
  for (int v = 0; v < n; ++v) {
    double sum = 0;
    for (int y = 0; y < ny; ++y) sum += tr.node_marginal(y, v);
    CHECK_CLOSE(sum, 1.0, 1e-10);
    int p = corpus[0].node(v).parent;
    if (p == -1) continue;
    for (int yc = 0; yc < ny; ++yc) {
      double over_parent = 0;
      for (int yp = 0; yp < ny; ++yp) over_parent += tr.edge_marginal(v, yc, yp);
      CHECK_CLOSE(over_parent, tr.node_marginal(yc, v), 1e-10);
    }
    for (int yp = 0; yp < ny; ++yp) {
      double over_child = 0;
      for (int yc = 0; yc < ny; ++yc) over_child += tr.edge_marginal(v, yc, yp);
      CHECK_CLOSE(over_child, tr.node_marginal(yp, p), 1e-10);
    }
  }
}

TEST_CASE("a fully clamped tree concentrates on the joint score") {
  std::mt19937 rng(13);
  int ny = 3, n = 5;
  LabelAlphabet labels = make_labels(ny);
  std::vector<TreeInstance> corpus = {oracle::random_tree(rng, n, ny, 3, 1, 2)};
  FeatureIndex idx = build_feature_index(corpus, labels, FeatureTemplates{}, 1);
  std::vector<double> w = oracle::random_weights(rng, static_cast<size_t>(idx.n_features()));

  LabelClamp clamp;
  for (int v = 0; v < n; ++v) clamp.push_back(static_cast<int>(rng() % ny));
  TreeTrellis tr = tree_upward_downward(corpus[0], idx, w, clamp);
  CHECK_CLOSE(tr.log_z, tree_score(corpus[0], clamp, idx, w), 1e-10);
  for (int v = 0; v < n; ++v)
    CHECK_CLOSE(tr.node_marginal(clamp[static_cast<size_t>(v)], v), 1.0, 1e-10);

  TreeViterbiResult vit = tree_map_decode(corpus[0], idx, w, clamp);
  CHECK(vit.labels == clamp);
}

TEST_CASE("feature accumulation reproduces the joint score") {
  std::mt19937 rng(21);
  int ny = 3, n = 6;
  LabelAlphabet labels = make_labels(ny);
  std::vector<TreeInstance> corpus = {oracle::random_tree(rng, n, ny, 3, 2, 2)};
  FeatureIndex idx = build_feature_index(corpus, labels, FeatureTemplates{}, 1);
  std::vector<double> w = oracle::random_weights(rng, static_cast<size_t>(idx.n_features()));

  std::vector<int> y;
  for (int v = 0; v < n; ++v) y.push_back(static_cast<int>(rng() % ny));
  std::vector<double> acc(w.size(), 0.0);
  accumulate_assignment_features(corpus[0], y, idx, 1.0, acc);
  double dot = 0;
  for (size_t j = 0; j < w.size(); ++j) dot += acc[j] * w[j];
  CHECK_CLOSE(dot, tree_score(corpus[0], y, idx, w), 1e-10);

  // expected features dotted with the weights give the mean joint score
  TreeTrellis tr = tree_upward_downward(corpus[0], idx, w);
  std::vector<double> exp_acc(w.size(), 0.0);
  accumulate_expected_features(corpus[0], tr, idx, 1.0, exp_acc);
  double mean = 0;
  for (size_t j = 0; j < w.size(); ++j) mean += exp_acc[j] * w[j];
  oracle::TreeBrute ref = oracle::brute_tree(corpus[0], idx, w);
  double mean_ref = 0;
  std::vector<int> a = oracle::first_assignment(static_cast<size_t>(n));
  do {
    double s = oracle::tree_assign_score(corpus[0], idx, w, a);
    mean_ref += std::exp(s - ref.log_z) * s;
  } while (oracle::next_assignment(a, ny));
  CHECK_CLOSE(mean, mean_ref, 1e-9);
}

TEST_CASE("tree log-likelihood gradient matches central differences") {
  std::mt19937 rng(91);
  for (int draw = 0; draw < 10; ++draw) {
    int ny = 2 + static_cast<int>(rng() % 2);
    LabelAlphabet labels = make_labels(ny);
    std::vector<TreeInstance> corpus;
    for (int k = 0; k < 3; ++k)
      corpus.push_back(
          oracle::random_tree(rng, 2 + static_cast<int>(rng() % 4), ny, 3, 2, 2));
    FeatureIndex idx = build_feature_index(corpus, labels, FeatureTemplates{}, 1);
    REQUIRE(idx.n_features() <= 200);
    std::vector<double> w =
        oracle::random_weights(rng, static_cast<size_t>(idx.n_features()), 0.5);
    double l2 = draw % 2 == 0 ? 0.0 : 0.1;

    auto [obj, grad] = tree_loglik_gradient(corpus, idx, w, 0.0, l2);
    auto value_at = [&](const std::vector<double>& th) {
      return tree_loglik_gradient(corpus, idx, th, 0.0, l2).first;
    };
    CHECK(oracle::max_grad_rel_err(value_at, w, grad) <= 1e-5);
    CHECK(obj <= 0.0 + 1e-12);
  }
}

TEST_CASE("tree scoring rejects malformed requests") {
  std::mt19937 rng(3);
  LabelAlphabet labels = make_labels(2);
  std::vector<TreeInstance> corpus = {oracle::random_tree(rng, 3, 2, 2, 0, 1)};
  FeatureIndex idx = build_feature_index(corpus, labels, FeatureTemplates{}, 1);
  std::vector<double> w(static_cast<size_t>(idx.n_features()), 0.0);

  CHECK_THROWS_WITH(tree_upward_downward(corpus[0], idx, w, LabelClamp{0}),
                    "label clamp length does not match the tree size");
  CHECK_THROWS_WITH(tree_upward_downward(corpus[0], idx, w, LabelClamp{0, 5, 0}),
                    "label clamp value out of range");

  // impossible weights leave nothing to normalize
  std::vector<double> bad(w.size(), kNegInf);
  CHECK_THROWS_WITH(tree_upward_downward(corpus[0], idx, bad),
                    "no labeling satisfies the constraints");

  TreeInstance unlabeled = oracle::random_tree(rng, 3, 2, 2, 0, 1);
  unlabeled.set_label(1, -1);
  CHECK_THROWS_WITH(tree_loglik_gradient({unlabeled}, idx, w, 0, 0),
                    "tree instance has unobserved labels");
}
