#pragma once

// Brute-force reference implementations used to cross-check the dynamic
// programs, plus a central-difference gradient checker.  Everything here
// enumerates the full space, so keep instances tiny (n <= 6 or so).
//
// Scores are recomputed from raw feature lookups — none of the production
// scoring helpers are reused — so an agreement failure points at exactly one
// side.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crftk/features.hpp"
#include "crftk/numeric.hpp"
#include "crftk/semimarkov.hpp"
#include "crftk/types.hpp"

namespace oracle {

inline double lse(double a, double b) {
  if (a == crftk::kNegInf) return b;
  if (b == crftk::kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Odometer over label assignments; position 0 varies fastest.  Returns false
// once the space is exhausted.  `frozen[i] >= 0` pins a coordinate.
inline bool next_assignment(std::vector<int>& y, int ny, const std::vector<int>& frozen = {}) {
  for (size_t i = 0; i < y.size(); ++i) {
    if (!frozen.empty() && frozen[i] >= 0) continue;
    if (++y[i] < ny) return true;
    y[i] = 0;
  }
  return false;
}

inline std::vector<int> first_assignment(size_t n, const std::vector<int>& frozen = {}) {
  std::vector<int> y(n, 0);
  for (size_t i = 0; i < n; ++i)
    if (!frozen.empty() && frozen[i] >= 0) y[i] = frozen[i];
  return y;
}

// --- chains -------------------------------------------------------------------

// Context of the K labels ending at position i, encoded independently of the
// production codec: base (ny+1), oldest first, begin = digit 0.
inline uint64_t octx(const std::vector<int>& y, int i, int k, int ny) {
  uint64_t c = 0;
  for (int t = i - k + 1; t <= i; ++t)
    c = c * static_cast<uint64_t>(ny + 1) +
        static_cast<uint64_t>(t < 0 ? 0 : y[static_cast<size_t>(t)] + 1);
  return c;
}

inline double chain_seq_score(const crftk::ChainInstance& inst, const crftk::FeatureIndex& idx,
                              const std::vector<double>& w, const std::vector<int>& y, int k) {
  const int n = inst.size(), ny = idx.n_labels();
  const int rel = idx.relation_id("");
  double s = 0;
  for (int i = 0; i < n; ++i) {
    uint64_t c = octx(y, i, k, ny);
    for (const auto& pred : inst.obs[static_cast<size_t>(i)]) {
      int f = idx.state_feature(idx.predicate_id(pred), c);
      if (f >= 0) s += w[static_cast<size_t>(f)];
    }
  }
  for (int i = 1; i < n; ++i) {
    int f = idx.transition_feature(rel, octx(y, i - 1, k, ny), octx(y, i, k, ny));
    if (f >= 0) s += w[static_cast<size_t>(f)];
  }
  int f = idx.transition_feature(rel, 0, octx(y, 0, k, ny));
  if (f >= 0) s += w[static_cast<size_t>(f)];
  return s;
}

// Whole-sequence projection of the decoder's cell-level preferences: lowest
// final label, then the rest of the final context oldest first, then earlier
// labels right to left.
inline bool chain_tie_less(const std::vector<int>& a, const std::vector<int>& b, int k) {
  const int n = static_cast<int>(a.size());
  if (a[static_cast<size_t>(n - 1)] != b[static_cast<size_t>(n - 1)])
    return a[static_cast<size_t>(n - 1)] < b[static_cast<size_t>(n - 1)];
  if (k >= 2)
    for (int i = std::max(0, n - k); i < n - 1; ++i)
      if (a[static_cast<size_t>(i)] != b[static_cast<size_t>(i)])
        return a[static_cast<size_t>(i)] < b[static_cast<size_t>(i)];
  for (int i = n - 1 - k; i >= 0; --i)
    if (a[static_cast<size_t>(i)] != b[static_cast<size_t>(i)])
      return a[static_cast<size_t>(i)] < b[static_cast<size_t>(i)];
  return false;
}

struct ChainBrute {
  double log_z = crftk::kNegInf;
  std::vector<uint64_t> contexts;  // ascending, mirrors the trellis slot order
  std::vector<double> state_marg;  // [y][i]
  std::vector<double> trans_marg;  // [b-1][u][v] over `contexts`
  std::vector<int> best;
  double best_score = crftk::kNegInf;
};

inline ChainBrute brute_chain(const crftk::ChainInstance& inst, const crftk::FeatureIndex& idx,
                              const std::vector<double>& w, int k) {
  const int n = inst.size(), ny = idx.n_labels();
  ChainBrute r;
  r.contexts = crftk::enumerate_contexts(k, ny);
  const int ns = static_cast<int>(r.contexts.size());
  auto slot = [&](uint64_t c) {
    return static_cast<int>(std::lower_bound(r.contexts.begin(), r.contexts.end(), c) -
                            r.contexts.begin());
  };

  std::vector<std::vector<int>> seqs;
  std::vector<double> scores;
  std::vector<int> y = first_assignment(static_cast<size_t>(n));
  do {
    seqs.push_back(y);
    double s = chain_seq_score(inst, idx, w, y, k);
    scores.push_back(s);
    r.log_z = lse(r.log_z, s);
    if (s > r.best_score ||
        (s == r.best_score && (r.best.empty() || chain_tie_less(y, r.best, k)))) {
      r.best_score = s;
      r.best = y;
    }
  } while (next_assignment(y, ny));

  r.state_marg.assign(static_cast<size_t>(ny) * n, 0.0);
  r.trans_marg.assign(static_cast<size_t>(std::max(0, n - 1)) * ns * ns, 0.0);
  for (size_t q = 0; q < seqs.size(); ++q) {
    double p = std::exp(scores[q] - r.log_z);
    const std::vector<int>& s = seqs[q];
    for (int i = 0; i < n; ++i)
      r.state_marg[static_cast<size_t>(s[static_cast<size_t>(i)]) * n + i] += p;
    for (int b = 1; b < n; ++b) {
      int u = slot(octx(s, b - 1, k, ny)), v = slot(octx(s, b, k, ny));
      r.trans_marg[(static_cast<size_t>(b - 1) * ns + u) * ns + v] += p;
    }
  }
  return r;
}

// --- semi-Markov ----------------------------------------------------------------

inline double sm_score(const crftk::ChainInstance& inst, const crftk::FeatureIndex& idx,
                       const std::vector<double>& w, const crftk::SegmentLabeling& segs) {
  const int rel = idx.relation_id("");
  double s = 0;
  int f = idx.transition_feature(rel, 0, static_cast<uint64_t>(segs.front().label + 1));
  if (f >= 0) s += w[static_cast<size_t>(f)];
  for (size_t q = 0; q < segs.size(); ++q) {
    const crftk::Segment& sg = segs[q];
    uint64_t c = static_cast<uint64_t>(sg.label + 1);
    for (int i = sg.start; i <= sg.end; ++i)
      for (const auto& pred : inst.obs[static_cast<size_t>(i)]) {
        int g = idx.state_feature(idx.predicate_id(pred), c);
        if (g >= 0) s += w[static_cast<size_t>(g)];
      }
    int g = idx.seg_length_feature(sg.end - sg.start + 1, sg.label);
    if (g >= 0) s += w[static_cast<size_t>(g)];
    if (q > 0) {
      g = idx.transition_feature(rel, static_cast<uint64_t>(segs[q - 1].label + 1), c);
      if (g >= 0) s += w[static_cast<size_t>(g)];
    }
  }
  return s;
}

// Projection of the segment decoder's candidate ranking: lowest final label,
// then per step (walking right to left) labeled predecessors by label then by
// segment length, with the start-anchored segment ranking last.
inline bool sm_tie_less(const crftk::SegmentLabeling& a, const crftk::SegmentLabeling& b) {
  if (a.back().label != b.back().label) return a.back().label < b.back().label;
  size_t ka = a.size() - 1, kb = b.size() - 1;
  while (true) {
    bool bos_a = ka == 0, bos_b = kb == 0;
    if (bos_a != bos_b) return bos_b;
    if (bos_a) return false;
    int ypa = a[ka - 1].label, ypb = b[kb - 1].label;
    if (ypa != ypb) return ypa < ypb;
    int da = a[ka].end - a[ka].start, db = b[kb].end - b[kb].start;
    if (da != db) return da < db;
    --ka;
    --kb;
  }
}

struct SmBrute {
  double log_z = crftk::kNegInf;
  std::vector<double> seg_marg;  // [y][end][d]
  std::vector<double> pos_marg;  // [y][i]
  std::vector<double> bnd_marg;  // [b-1][prev][next]
  crftk::SegmentLabeling best;
  double best_score = crftk::kNegInf;
};

inline void enumerate_segmentations(int n, int max_len, int ny, int start, int prev_label,
                                    crftk::SegmentLabeling& cur,
                                    std::vector<crftk::SegmentLabeling>& out) {
  if (start == n) {
    out.push_back(cur);
    return;
  }
  for (int len = 1; len <= std::min(max_len, n - start); ++len)
    for (int yv = 0; yv < ny; ++yv) {
      if (yv == prev_label) continue;
      cur.push_back({start, start + len - 1, yv});
      enumerate_segmentations(n, max_len, ny, start + len, yv, cur, out);
      cur.pop_back();
    }
}

inline SmBrute brute_segments(const crftk::ChainInstance& inst, const crftk::FeatureIndex& idx,
                              const std::vector<double>& w, int max_len) {
  const int n = inst.size(), ny = idx.n_labels();
  SmBrute r;
  std::vector<crftk::SegmentLabeling> all;
  crftk::SegmentLabeling cur;
  enumerate_segmentations(n, max_len, ny, 0, -1, cur, all);

  std::vector<double> scores(all.size());
  for (size_t q = 0; q < all.size(); ++q) {
    scores[q] = sm_score(inst, idx, w, all[q]);
    r.log_z = lse(r.log_z, scores[q]);
    if (scores[q] > r.best_score ||
        (scores[q] == r.best_score && (r.best.empty() || sm_tie_less(all[q], r.best)))) {
      r.best_score = scores[q];
      r.best = all[q];
    }
  }

  r.seg_marg.assign(static_cast<size_t>(ny) * n * max_len, 0.0);
  r.pos_marg.assign(static_cast<size_t>(ny) * n, 0.0);
  r.bnd_marg.assign(static_cast<size_t>(std::max(0, n - 1)) * ny * ny, 0.0);
  for (size_t q = 0; q < all.size(); ++q) {
    double p = std::exp(scores[q] - r.log_z);
    const crftk::SegmentLabeling& segs = all[q];
    for (size_t c = 0; c < segs.size(); ++c) {
      const crftk::Segment& sg = segs[c];
      r.seg_marg[(static_cast<size_t>(sg.label) * n + sg.end) * max_len +
                 (sg.end - sg.start)] += p;
      for (int i = sg.start; i <= sg.end; ++i)
        r.pos_marg[static_cast<size_t>(sg.label) * n + i] += p;
      if (c > 0)
        r.bnd_marg[(static_cast<size_t>(sg.start - 1) * ny + segs[c - 1].label) * ny +
                   sg.label] += p;
    }
  }
  return r;
}

// --- trees ----------------------------------------------------------------------

inline double tree_assign_score(const crftk::TreeInstance& inst, const crftk::FeatureIndex& idx,
                                const std::vector<double>& w, const std::vector<int>& y) {
  const int n = inst.size();
  double s = 0;
  for (int v = 0; v < n; ++v) {
    const crftk::TreeNode& nd = inst.node(v);
    uint64_t c = static_cast<uint64_t>(y[static_cast<size_t>(v)] + 1);
    for (const auto& pred : nd.obs) {
      int f = idx.state_feature(idx.predicate_id(pred), c);
      if (f >= 0) s += w[static_cast<size_t>(f)];
    }
    for (size_t j = 0; j < nd.dense.size(); ++j)
      s += nd.dense[j] *
           w[static_cast<size_t>(y[static_cast<size_t>(v)]) * idx.dense_width() + j];
    if (nd.parent != -1) {
      int f = idx.transition_feature(
          idx.relation_id(nd.relation),
          static_cast<uint64_t>(y[static_cast<size_t>(nd.parent)] + 1), c);
      if (f >= 0) s += w[static_cast<size_t>(f)];
    }
  }
  return s;
}

struct TreeBrute {
  double log_z = crftk::kNegInf;
  std::vector<double> node_marg;  // [y][v]
  std::vector<double> edge_marg;  // [child][yc][yp]
  std::vector<int> best;
  double best_score = crftk::kNegInf;
};

inline TreeBrute brute_tree(const crftk::TreeInstance& inst, const crftk::FeatureIndex& idx,
                            const std::vector<double>& w, const std::vector<int>& clamp = {}) {
  const int n = inst.size(), ny = idx.n_labels();
  TreeBrute r;
  // The decoder assigns parents before children, so ties compare in that order.
  std::vector<int> visit(inst.topo_order().rbegin(), inst.topo_order().rend());
  auto tie_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
    for (int v : visit)
      if (a[static_cast<size_t>(v)] != b[static_cast<size_t>(v)])
        return a[static_cast<size_t>(v)] < b[static_cast<size_t>(v)];
    return false;
  };

  std::vector<std::vector<int>> assigns;
  std::vector<double> scores;
  std::vector<int> y = first_assignment(static_cast<size_t>(n), clamp);
  do {
    assigns.push_back(y);
    double s = tree_assign_score(inst, idx, w, y);
    scores.push_back(s);
    r.log_z = lse(r.log_z, s);
    if (s > r.best_score || (s == r.best_score && (r.best.empty() || tie_less(y, r.best)))) {
      r.best_score = s;
      r.best = y;
    }
  } while (next_assignment(y, ny, clamp));

  r.node_marg.assign(static_cast<size_t>(ny) * n, 0.0);
  r.edge_marg.assign(static_cast<size_t>(n) * ny * ny, 0.0);
  for (size_t q = 0; q < assigns.size(); ++q) {
    double p = std::exp(scores[q] - r.log_z);
    const std::vector<int>& a = assigns[q];
    for (int v = 0; v < n; ++v) {
      r.node_marg[static_cast<size_t>(a[static_cast<size_t>(v)]) * n + v] += p;
      int par = inst.node(v).parent;
      if (par != -1)
        r.edge_marg[(static_cast<size_t>(v) * ny + a[static_cast<size_t>(v)]) * ny +
                    a[static_cast<size_t>(par)]] += p;
    }
  }
  return r;
}

// --- gradient checking ------------------------------------------------------------

// Largest central-difference relative error over all coordinates:
// |g_j - (f(x+he_j) - f(x-he_j)) / 2h| / max(1, |g_j|, |fd_j|).
template <class F>
inline double max_grad_rel_err(F&& value_at, std::vector<double> theta,
                               const std::vector<double>& grad, double h = 1e-6) {
  double worst = 0;
  for (size_t j = 0; j < theta.size(); ++j) {
    double keep = theta[j];
    theta[j] = keep + h;
    double up = value_at(theta);
    theta[j] = keep - h;
    double dn = value_at(theta);
    theta[j] = keep;
    double fd = (up - dn) / (2 * h);
    double denom = std::max({1.0, std::fabs(grad[j]), std::fabs(fd)});
    worst = std::max(worst, std::fabs(grad[j] - fd) / denom);
  }
  return worst;
}

// --- random test fixtures ----------------------------------------------------------

// Chain with `n` tokens over `ny` labels; each position carries 1-2 predicates
// drawn from a small shared vocabulary so features repeat across positions.
inline crftk::ChainInstance random_chain(std::mt19937& rng, int n, int ny, int vocab) {
  crftk::ChainInstance inst;
  std::uniform_int_distribution<int> pick_pred(0, vocab - 1);
  std::uniform_int_distribution<int> pick_label(0, ny - 1);
  std::uniform_int_distribution<int> pick_extra(0, 1);
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> preds = {"w=" + std::to_string(pick_pred(rng))};
    if (pick_extra(rng)) preds.push_back("x=" + std::to_string(pick_pred(rng)));
    inst.obs.push_back(std::move(preds));
    inst.gold.push_back(pick_label(rng));
  }
  return inst;
}

inline std::vector<double> random_weights(std::mt19937& rng, size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> w(n);
  for (auto& x : w) x = g(rng);
  return w;
}

// Random tree over n nodes: parent of node v drawn from 0..v-1, nodes carry
// sparse predicates, optional dense vectors, and labels.
inline crftk::TreeInstance random_tree(std::mt19937& rng, int n, int ny, int vocab,
                                       int dense_width, int n_relations) {
  std::uniform_int_distribution<int> pick_pred(0, vocab - 1);
  std::uniform_int_distribution<int> pick_label(0, ny - 1);
  std::uniform_int_distribution<int> pick_rel(0, n_relations - 1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<crftk::TreeNode> nodes(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) {
    crftk::TreeNode& nd = nodes[static_cast<size_t>(v)];
    if (v == 0) {
      nd.parent = -1;
    } else {
      std::uniform_int_distribution<int> pick_parent(0, v - 1);
      nd.parent = pick_parent(rng);
      nd.relation = "r" + std::to_string(pick_rel(rng));
    }
    nd.obs = {"w=" + std::to_string(pick_pred(rng))};
    nd.dense.resize(static_cast<size_t>(dense_width));
    for (auto& x : nd.dense) x = g(rng);
    nd.label = pick_label(rng);
  }
  return crftk::TreeInstance(std::move(nodes));
}

}  // namespace oracle
