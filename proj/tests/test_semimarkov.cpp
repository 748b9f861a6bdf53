#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "crftk/features.hpp"
#include "crftk/numeric.hpp"
#include "crftk/semimarkov.hpp"
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

std::vector<int> random_tags(std::mt19937& rng, int n, int ny) {
  std::vector<int> tags(static_cast<size_t>(n));
  std::uniform_int_distribution<int> pick(0, ny - 1);
  for (auto& t : tags) t = pick(rng);
  return tags;
}

int max_run(const std::vector<int>& tags) {
  int best = 0, cur = 0;
  for (size_t i = 0; i < tags.size(); ++i) {
    cur = (i > 0 && tags[i] == tags[i - 1]) ? cur + 1 : 1;
    best = std::max(best, cur);
  }
  return best;
}

void compare_to_oracle(const ChainInstance& inst, const FeatureIndex& idx,
                       const std::vector<double>& w, int L, double tol) {
  oracle::SmBrute ref = oracle::brute_segments(inst, idx, w, L);
  SmTrellis tr = sm_forward_backward(inst, idx, w, L);
  const int n = inst.size(), ny = idx.n_labels();

  CHECK_CLOSE(tr.log_z, ref.log_z, tol);
  for (int y = 0; y < ny; ++y)
    for (int end = 0; end < n; ++end)
      for (int d = 0; d < L; ++d)
        CHECK_CLOSE(tr.seg_marginal(y, end, d),
                    ref.seg_marg[(static_cast<size_t>(y) * n + end) * L + d], tol);
  for (int y = 0; y < ny; ++y)
    for (int i = 0; i < n; ++i)
      CHECK_CLOSE(tr.pos_marginal(y, i), ref.pos_marg[static_cast<size_t>(y) * n + i], tol);
  for (int b = 1; b < n; ++b)
    for (int p = 0; p < ny; ++p)
      for (int q = 0; q < ny; ++q)
        CHECK_CLOSE(tr.bnd_marginal(b, p, q),
                    ref.bnd_marg[(static_cast<size_t>(b - 1) * ny + p) * ny + q], tol);

  SmViterbiResult vit = sm_viterbi(inst, idx, w, L);
  CHECK_CLOSE(vit.score, ref.best_score, tol);
  CHECK(vit.segments == ref.best);
}

}  // namespace

TEST_CASE("uniform weights count alternating segmentations") {
  LabelAlphabet labels = make_labels(2);
  ChainInstance inst;
  for (int i = 0; i < 3; ++i) inst.obs.push_back({"p" + std::to_string(i)});
  inst.gold = {0, 1, 0};
  std::vector<ChainInstance> corpus = {inst};
  FeatureTemplates tmpl;
  tmpl.seg_length = true;
  FeatureIndex idx = build_segment_feature_index(corpus, labels, tmpl, 1, 3);
  std::vector<double> w(static_cast<size_t>(idx.n_features()), 0.0);

  // compositions of 3 tokens, two alternating label choices each: 8 total
  SmTrellis tr = sm_forward_backward(inst, idx, w, 3);
  CHECK_CLOSE(tr.log_z, std::log(8.0), 1e-12);
  for (int i = 0; i < 3; ++i) {
    double sum = 0;
    for (int y = 0; y < 2; ++y) sum += tr.pos_marginal(y, i);
    CHECK_CLOSE(sum, 1.0, 1e-12);
  }

  SmViterbiResult vit = sm_viterbi(inst, idx, w, 3);
  CHECK(vit.segments == SegmentLabeling{{0, 0, 0}, {1, 1, 1}, {2, 2, 0}});
  CHECK_CLOSE(vit.score, 0.0, 1e-12);
}

TEST_CASE("segment trellis matches exhaustive enumeration") {
  std::mt19937 rng(20240818);
  for (int draw = 0; draw < 60; ++draw) {
    int ny = 2 + static_cast<int>(rng() % 2);
    int n = 1 + static_cast<int>(rng() % 6);
    int L = 1 + static_cast<int>(rng() % 3);
    LabelAlphabet labels = make_labels(ny);

    std::vector<ChainInstance> build_corpus = {oracle::random_chain(rng, n, ny, 3),
                                               oracle::random_chain(rng, 4, ny, 3)};
    FeatureTemplates tmpl;
    tmpl.seg_length = draw % 2 == 0;
    tmpl.bos = draw % 3 == 0;
    FeatureIndex idx = build_segment_feature_index(build_corpus, labels, tmpl, 1, L);
    std::vector<double> w =
        oracle::random_weights(rng, static_cast<size_t>(idx.n_features()), 0.8);

    compare_to_oracle(build_corpus[0], idx, w, L, 1e-9);
    compare_to_oracle(oracle::random_chain(rng, n, ny, 4), idx, w, L, 1e-9);
  }
}

TEST_CASE("segment marginals are coherent with each other") {
  std::mt19937 rng(11);
  int ny = 3, n = 6, L = 3;
  LabelAlphabet labels = make_labels(ny);
  std::vector<ChainInstance> corpus = {oracle::random_chain(rng, n, ny, 3)};
  FeatureTemplates tmpl;
  tmpl.seg_length = true;
  FeatureIndex idx = build_segment_feature_index(corpus, labels, tmpl, 1, L);
  std::vector<double> w = oracle::random_weights(rng, static_cast<size_t>(idx.n_features()));

  SmTrellis tr = sm_forward_backward(corpus[0], idx, w, L);

  // the last forward column carries the whole partition mass
  double acc = kNegInf;
  for (int y = 0; y < ny; ++y) acc = oracle::lse(acc, tr.alpha_at(y, n - 1));
  CHECK_CLOSE(acc, tr.log_z, 1e-10);

  // position coverage equals the sum of segment marginals that span it
  for (int i = 0; i < n; ++i) {
    double cover = 0;
    for (int y = 0; y < ny; ++y) {
      double mass = 0;
      for (int end = i; end < std::min(n, i + L); ++end)
        for (int d = end - i; d < L; ++d)
          if (end - d <= i) mass += tr.seg_marginal(y, end, d);
      CHECK_CLOSE(tr.pos_marginal(y, i), mass, 1e-10);
      cover += tr.pos_marginal(y, i);
    }
    CHECK_CLOSE(cover, 1.0, 1e-10);
  }

  // each interior boundary either splits two segments or sits inside one
  for (int b = 1; b < n; ++b) {
    double split = 0;
    for (int p = 0; p < ny; ++p)
      for (int q = 0; q < ny; ++q) split += tr.bnd_marginal(b, p, q);
    double inside = 0;
    for (int y = 0; y < ny; ++y)
      for (int end = b; end < std::min(n, b + L); ++end)
        for (int d = 0; d < L; ++d)
          if (end - d <= b - 1) inside += tr.seg_marginal(y, end, d);
    CHECK_CLOSE(split + inside, 1.0, 1e-10);
  }
}

TEST_CASE("segment log-likelihood gradient matches central differences") {
  std::mt19937 rng(77);
  for (int draw = 0; draw < 10; ++draw) {
    int ny = 2;
    LabelAlphabet labels = make_labels(ny);
    std::vector<SegmentedInstance> corpus;
    std::vector<ChainInstance> chains;
    int L = 2;
    for (int k = 0; k < 3; ++k) {
      int n = 2 + static_cast<int>(rng() % 3);
      ChainInstance inst = oracle::random_chain(rng, n, ny, 3);
      inst.gold = random_tags(rng, n, ny);
      L = std::max(L, max_run(inst.gold));
      chains.push_back(inst);
    }
    for (auto& inst : chains) corpus.push_back({inst, runs_to_segments(inst.gold)});

    FeatureTemplates tmpl;
    tmpl.seg_length = true;
    tmpl.bos = draw % 2 == 0;
    FeatureIndex idx = build_segment_feature_index(chains, labels, tmpl, 1, L);
    REQUIRE(idx.n_features() <= 200);
    std::vector<double> w =
        oracle::random_weights(rng, static_cast<size_t>(idx.n_features()), 0.5);
    double l2 = draw % 2 == 0 ? 0.0 : 0.1;

    auto [obj, grad] = sm_loglik_gradient(corpus, idx, w, 0.0, l2, L);
    auto value_at = [&](const std::vector<double>& th) {
      return sm_loglik_gradient(corpus, idx, th, 0.0, l2, L).first;
    };
    CHECK(oracle::max_grad_rel_err(value_at, w, grad) <= 1e-5);
    CHECK(obj <= 0.0 + 1e-12);
  }
}

TEST_CASE("scoring a fixed segmentation sums its parts") {
  std::mt19937 rng(123);
  int ny = 3, n = 6, L = 3;
  LabelAlphabet labels = make_labels(ny);
  std::vector<ChainInstance> corpus = {oracle::random_chain(rng, n, ny, 3)};
  FeatureTemplates tmpl;
  tmpl.seg_length = true;
  tmpl.bos = true;
  FeatureIndex idx = build_segment_feature_index(corpus, labels, tmpl, 1, L);
  std::vector<double> w = oracle::random_weights(rng, static_cast<size_t>(idx.n_features()));

  SegmentLabeling segs = {{0, 1, 2}, {2, 2, 0}, {3, 5, 1}};
  CHECK_CLOSE(score_segmentation(corpus[0], segs, idx, w, L),
              oracle::sm_score(corpus[0], idx, w, segs), 1e-12);
}

TEST_CASE("run collapsing produces maximal segments") {
  CHECK(runs_to_segments({0, 0, 1, 1, 1, 0}) ==
        SegmentLabeling{{0, 1, 0}, {2, 4, 1}, {5, 5, 0}});
  CHECK(runs_to_segments({2}) == SegmentLabeling{{0, 0, 2}});
  CHECK(runs_to_segments({}) == SegmentLabeling{});
}

TEST_CASE("segmentations are validated structurally") {
  CHECK_THROWS_WITH(validate_segmentation({}, 3, 2, 2), "empty segmentation");
  CHECK_THROWS_WITH(validate_segmentation({{1, 2, 0}}, 3, 3, 2),
                    "segmentation does not start at token 0");
  CHECK_THROWS_WITH(validate_segmentation({{0, 0, 0}, {2, 2, 1}}, 3, 3, 2),
                    "segments do not tile the instance");
  CHECK_THROWS_WITH(validate_segmentation({{0, 0, 0}, {1, 2, 0}}, 3, 3, 2),
                    "adjacent segments share a label");
  CHECK_THROWS_WITH(validate_segmentation({{0, 1, 0}}, 3, 3, 2),
                    "segmentation does not cover the instance");
  CHECK_THROWS_WITH(validate_segmentation({{0, 3, 0}}, 4, 2, 2),
                    "segment [0,3] longer than the maximum of 2");
  CHECK_THROWS_WITH(validate_segmentation({{0, 0, 5}}, 1, 2, 2),
                    "segment label out of range");
  CHECK_THROWS_WITH(validate_segmentation({{0, -1, 0}}, 2, 2, 2),
                    "segment has negative length");
  // a well-formed labeling passes
  validate_segmentation({{0, 1, 1}, {2, 2, 0}}, 3, 2, 2);
}

TEST_CASE("segment models insist on an order-one index") {
  LabelAlphabet labels = make_labels(2);
  ChainInstance inst;
  inst.obs = {{"a"}, {"b"}};
  inst.gold = {0, 1};
  std::vector<ChainInstance> corpus = {inst};
  FeatureIndex idx2 = build_feature_index(corpus, labels, {}, 1, 2);
  std::vector<double> w(static_cast<size_t>(idx2.n_features()), 0.0);
  CHECK_THROWS_WITH(sm_forward_backward(inst, idx2, w, 2),
                    "segment models use an order-1 feature index");

  FeatureIndex idx1 = build_feature_index(corpus, labels, {}, 1, 1);
  std::vector<double> w1(static_cast<size_t>(idx1.n_features()), 0.0);
  ChainInstance empty;
  CHECK_THROWS_WITH(sm_forward_backward(empty, idx1, w1, 2), "empty instance");
  CHECK_THROWS_WITH(sm_forward_backward(inst, idx1, w1, 0),
                    "max segment length must be >= 1");
}
