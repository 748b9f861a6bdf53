#include "crftk/tree.hpp"

#include <algorithm>
#include <cmath>

#include "crftk/numeric.hpp"

namespace crftk {

namespace {

void check_clamp(const LabelClamp& clamp, int n, int ny) {
  if (clamp.empty()) return;
  if (static_cast<int>(clamp.size()) != n)
    throw Error("label clamp length does not match the tree size");
  for (int c : clamp)
    if (c < -1 || c >= ny) throw Error("label clamp value out of range");
}

inline bool allowed(const LabelClamp& clamp, int v, int y) {
  return clamp.empty() || clamp[static_cast<size_t>(v)] < 0 ||
         clamp[static_cast<size_t>(v)] == y;
}

}  // namespace

double tree_state_score(const TreeInstance& inst, const FeatureIndex& idx,
                        const std::vector<double>& w, int v, int y) {
  const TreeNode& nd = inst.node(v);
  double s = 0;
  uint64_t ctx = static_cast<uint64_t>(y + 1);
  for (const auto& pred : nd.obs) {
    int f = idx.state_feature(idx.predicate_id(pred), ctx);
    if (f >= 0) s += w[static_cast<size_t>(f)];
  }
  for (size_t j = 0; j < nd.dense.size(); ++j)
    s += nd.dense[j] * w[static_cast<size_t>(idx.dense_feature(y, static_cast<int>(j)))];
  return s;
}

double tree_edge_score(const TreeInstance& inst, const FeatureIndex& idx,
                       const std::vector<double>& w, int child, int yc, int yp) {
  int f = idx.transition_feature(idx.relation_id(inst.node(child).relation),
                                 static_cast<uint64_t>(yp + 1),
                                 static_cast<uint64_t>(yc + 1));
  return f >= 0 ? w[static_cast<size_t>(f)] : 0.0;
}

double tree_score(const TreeInstance& inst, const std::vector<int>& labels,
                  const FeatureIndex& idx, const std::vector<double>& w) {
  const int n = inst.size(), ny = idx.n_labels();
  if (static_cast<int>(labels.size()) != n)
    throw Error("labeling length does not match the tree size");
  double total = 0;
  for (int v = 0; v < n; ++v) {
    int y = labels[static_cast<size_t>(v)];
    if (y < 0 || y >= ny) throw Error("label id out of range");
    total += tree_state_score(inst, idx, w, v, y);
    int p = inst.node(v).parent;
    if (p != -1) total += tree_edge_score(inst, idx, w, v, y, labels[static_cast<size_t>(p)]);
  }
  return total;
}

TreeTrellis tree_upward_downward(const TreeInstance& inst, const FeatureIndex& idx,
                                 const std::vector<double>& w,
                                 const LabelClamp& clamp) {
  const int n = inst.size(), ny = idx.n_labels();
  check_clamp(clamp, n, ny);

  TreeTrellis tr;
  tr.n = n;
  tr.n_labels = ny;
  tr.alpha.assign(static_cast<size_t>(ny) * n, kNegInf);
  tr.beta.assign(static_cast<size_t>(ny) * n, kNegInf);
  tr.up_msg.assign(static_cast<size_t>(n) * ny, kNegInf);

  // upward: children are visited before their parent
  for (int v : inst.topo_order()) {
    for (int y = 0; y < ny; ++y) {
      if (!allowed(clamp, v, y)) continue;
      double a = tree_state_score(inst, idx, w, v, y);
      for (int c : inst.children()[static_cast<size_t>(v)])
        a += tr.up_msg[static_cast<size_t>(c) * ny + y];
      tr.alpha[static_cast<size_t>(y) * n + v] = a;
    }
    int p = inst.node(v).parent;
    if (p == -1) continue;
    for (int yp = 0; yp < ny; ++yp) {
      double m = kNegInf;
      for (int yc = 0; yc < ny; ++yc) {
        double a = tr.alpha_at(yc, v);
        if (a == kNegInf) continue;
        m = log_add(m, a + tree_edge_score(inst, idx, w, v, yc, yp));
      }
      tr.up_msg[static_cast<size_t>(v) * ny + yp] = m;
    }
  }

  const int root = inst.root();
  double log_z = kNegInf;
  for (int y = 0; y < ny; ++y) log_z = log_add(log_z, tr.alpha_at(y, root));
  if (!std::isfinite(log_z)) throw Error("no labeling satisfies the constraints");
  tr.log_z = log_z;

  // downward: beta[y][v] completes the tree outside v's subtree.  A parent's
  // own contribution divides out the child's upward message.
  for (int y = 0; y < ny; ++y) tr.beta[static_cast<size_t>(y) * n + root] = 0.0;
  for (auto it = inst.topo_order().rbegin(); it != inst.topo_order().rend(); ++it) {
    int p = *it;
    for (int c : inst.children()[static_cast<size_t>(p)]) {
      for (int yc = 0; yc < ny; ++yc) {
        if (!allowed(clamp, c, yc)) continue;
        double b = kNegInf;
        for (int yp = 0; yp < ny; ++yp) {
          double outer = tr.alpha_at(yp, p) + tr.beta_at(yp, p);
          if (outer == kNegInf || !std::isfinite(outer)) continue;
          b = log_add(b, outer - tr.up_msg[static_cast<size_t>(c) * ny + yp] +
                             tree_edge_score(inst, idx, w, c, yc, yp));
        }
        tr.beta[static_cast<size_t>(yc) * n + c] = b;
      }
    }
  }

  tr.node_marg.assign(static_cast<size_t>(ny) * n, 0.0);
  for (int v = 0; v < n; ++v)
    for (int y = 0; y < ny; ++y) {
      double a = tr.alpha_at(y, v), b = tr.beta_at(y, v);
      if (a == kNegInf || b == kNegInf) continue;
      tr.node_marg[static_cast<size_t>(y) * n + v] = std::exp(a + b - log_z);
    }

  tr.edge_marg.assign(static_cast<size_t>(n) * ny * ny, 0.0);
  for (int c = 0; c < n; ++c) {
    int p = inst.node(c).parent;
    if (p == -1) continue;
    for (int yc = 0; yc < ny; ++yc) {
      double ac = tr.alpha_at(yc, c);
      if (ac == kNegInf) continue;
      for (int yp = 0; yp < ny; ++yp) {
        double outer = tr.alpha_at(yp, p) + tr.beta_at(yp, p);
        if (outer == kNegInf || !std::isfinite(outer)) continue;
        double lp = ac + tree_edge_score(inst, idx, w, c, yc, yp) + outer -
                    tr.up_msg[static_cast<size_t>(c) * ny + yp] - log_z;
        tr.edge_marg[(static_cast<size_t>(c) * ny + yc) * ny + yp] = std::exp(lp);
      }
    }
  }
  return tr;
}

TreeViterbiResult tree_map_decode(const TreeInstance& inst, const FeatureIndex& idx,
                                  const std::vector<double>& w,
                                  const LabelClamp& clamp) {
  const int n = inst.size(), ny = idx.n_labels();
  check_clamp(clamp, n, ny);

  std::vector<double> best(static_cast<size_t>(ny) * n, kNegInf);
  // bp[v][yp]: maximizing label of v given its parent takes yp
  std::vector<int> bp(static_cast<size_t>(n) * ny, -1);
  std::vector<double> up(static_cast<size_t>(n) * ny, kNegInf);

  for (int v : inst.topo_order()) {
    for (int y = 0; y < ny; ++y) {
      if (!allowed(clamp, v, y)) continue;
      double s = tree_state_score(inst, idx, w, v, y);
      for (int c : inst.children()[static_cast<size_t>(v)])
        s += up[static_cast<size_t>(c) * ny + y];
      best[static_cast<size_t>(y) * n + v] = s;
    }
    int p = inst.node(v).parent;
    if (p == -1) continue;
    for (int yp = 0; yp < ny; ++yp) {
      double hi = kNegInf;
      int arg = -1;
      for (int yc = 0; yc < ny; ++yc) {
        double b = best[static_cast<size_t>(yc) * n + v];
        if (b == kNegInf) continue;
        double cand = b + tree_edge_score(inst, idx, w, v, yc, yp);
        if (cand > hi) { hi = cand; arg = yc; }
      }
      up[static_cast<size_t>(v) * ny + yp] = hi;
      bp[static_cast<size_t>(v) * ny + yp] = arg;
    }
  }

  const int root = inst.root();
  int root_y = -1;
  double hi = kNegInf;
  for (int y = 0; y < ny; ++y) {
    double b = best[static_cast<size_t>(y) * n + root];
    if (b > hi) { hi = b; root_y = y; }
  }
  if (root_y < 0) throw Error("no labeling satisfies the constraints");

  TreeViterbiResult res;
  res.score = hi;
  res.labels.assign(static_cast<size_t>(n), -1);
  res.labels[static_cast<size_t>(root)] = root_y;
  // parents appear after children in topo order, so walk it backwards
  for (auto it = inst.topo_order().rbegin(); it != inst.topo_order().rend(); ++it) {
    int p = *it;
    int yp = res.labels[static_cast<size_t>(p)];
    for (int c : inst.children()[static_cast<size_t>(p)])
      res.labels[static_cast<size_t>(c)] = bp[static_cast<size_t>(c) * ny + yp];
  }
  return res;
}

void accumulate_assignment_features(const TreeInstance& inst,
                                    const std::vector<int>& labels,
                                    const FeatureIndex& idx, double scale,
                                    std::vector<double>& out) {
  const int n = inst.size();
  if (static_cast<int>(labels.size()) != n)
    throw Error("labeling length does not match the tree size");
  for (int v = 0; v < n; ++v) {
    const TreeNode& nd = inst.node(v);
    int y = labels[static_cast<size_t>(v)];
    uint64_t ctx = static_cast<uint64_t>(y + 1);
    for (const auto& pred : nd.obs) {
      int f = idx.state_feature(idx.predicate_id(pred), ctx);
      if (f >= 0) out[static_cast<size_t>(f)] += scale;
    }
    for (size_t j = 0; j < nd.dense.size(); ++j)
      out[static_cast<size_t>(idx.dense_feature(y, static_cast<int>(j)))] += scale * nd.dense[j];
    if (nd.parent != -1) {
      int f = idx.transition_feature(idx.relation_id(nd.relation),
                                     static_cast<uint64_t>(labels[static_cast<size_t>(nd.parent)] + 1),
                                     ctx);
      if (f >= 0) out[static_cast<size_t>(f)] += scale;
    }
  }
}

void accumulate_expected_features(const TreeInstance& inst, const TreeTrellis& tr,
                                  const FeatureIndex& idx, double scale,
                                  std::vector<double>& out) {
  const int n = inst.size(), ny = idx.n_labels();
  for (int v = 0; v < n; ++v) {
    const TreeNode& nd = inst.node(v);
    for (int y = 0; y < ny; ++y) {
      double p = tr.node_marginal(y, v);
      if (p == 0.0) continue;
      uint64_t ctx = static_cast<uint64_t>(y + 1);
      for (const auto& pred : nd.obs) {
        int f = idx.state_feature(idx.predicate_id(pred), ctx);
        if (f >= 0) out[static_cast<size_t>(f)] += scale * p;
      }
      for (size_t j = 0; j < nd.dense.size(); ++j)
        out[static_cast<size_t>(idx.dense_feature(y, static_cast<int>(j)))] += scale * p * nd.dense[j];
    }
    if (nd.parent != -1) {
      int rid = idx.relation_id(nd.relation);
      for (int yc = 0; yc < ny; ++yc)
        for (int yp = 0; yp < ny; ++yp) {
          double p = tr.edge_marginal(v, yc, yp);
          if (p == 0.0) continue;
          int f = idx.transition_feature(rid, static_cast<uint64_t>(yp + 1),
                                         static_cast<uint64_t>(yc + 1));
          if (f >= 0) out[static_cast<size_t>(f)] += scale * p;
        }
    }
  }
}

std::pair<double, std::vector<double>> tree_loglik_gradient(
    const std::vector<TreeInstance>& corpus, const FeatureIndex& idx,
    const std::vector<double>& w, double l1, double l2) {
  if (corpus.empty()) throw Error("empty corpus");
  const int ny = idx.n_labels();
  double obj = 0;
  std::vector<double> grad(w.size(), 0.0);

  for (const auto& inst : corpus) {
    const int n = inst.size();
    std::vector<int> gold(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) {
      int y = inst.node(v).label;
      if (y < 0 || y >= ny) throw Error("tree instance has unobserved labels");
      gold[static_cast<size_t>(v)] = y;
    }

    TreeTrellis tr = tree_upward_downward(inst, idx, w);
    obj += tree_score(inst, gold, idx, w) - tr.log_z;
    accumulate_assignment_features(inst, gold, idx, 1.0, grad);
    accumulate_expected_features(inst, tr, idx, -1.0, grad);
  }

  for (size_t j = 0; j < w.size(); ++j) {
    double wj = w[static_cast<size_t>(j)];
    obj -= l1 * std::abs(wj) + l2 * wj * wj;
    double sign = wj > 0 ? 1.0 : (wj < 0 ? -1.0 : 0.0);
    grad[static_cast<size_t>(j)] -= l1 * sign + 2.0 * l2 * wj;
  }
  return {obj, std::move(grad)};
}

}  // namespace crftk
