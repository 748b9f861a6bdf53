#include "crftk/chain.hpp"

#include <algorithm>
#include <cmath>

#include "crftk/numeric.hpp"

namespace crftk {

int TrellisResult::slot(uint64_t ctx) const {
  auto it = std::lower_bound(contexts.begin(), contexts.end(), ctx);
  if (it == contexts.end() || *it != ctx) return -1;
  return static_cast<int>(it - contexts.begin());
}

double state_score(const ChainInstance& inst, const FeatureIndex& idx,
                   const std::vector<double>& w, int pos, uint64_t ctx) {
  double s = 0;
  for (const auto& pred : inst.obs[static_cast<size_t>(pos)]) {
    int f = idx.state_feature(idx.predicate_id(pred), ctx);
    if (f >= 0) s += w[static_cast<size_t>(f)];
  }
  return s;
}

double transition_score(const FeatureIndex& idx, const std::vector<double>& w,
                        uint64_t from, uint64_t to) {
  int f = idx.transition_feature(idx.relation_id(""), from, to);
  return f >= 0 ? w[static_cast<size_t>(f)] : 0.0;
}

namespace {

void check_instance(const ChainInstance& inst, int order) {
  if (inst.size() == 0) throw Error("empty instance");
  if (order < 1) throw Error("order must be >= 1");
}

std::vector<uint64_t> gold_contexts(const std::vector<int>& y, int order, int ny) {
  std::vector<uint64_t> out(y.size());
  std::vector<int> win(static_cast<size_t>(order));
  for (size_t i = 0; i < y.size(); ++i) {
    for (int k = 0; k < order; ++k) {
      long j = static_cast<long>(i) - (order - 1 - k);
      win[static_cast<size_t>(k)] = j < 0 ? kBosLabel : y[static_cast<size_t>(j)];
    }
    out[i] = ctx_encode(win.data(), order, ny);
  }
  return out;
}

// Precomputed per-instance scores shared by the tuple-state algorithms.
struct TupleScores {
  int n = 0, ny = 0, order = 1, ns = 0;
  std::vector<uint64_t> ctxs;       // ascending
  std::vector<int> pad, last;       // per slot
  std::vector<int> shift_to;        // [slot][y] -> slot
  std::vector<std::vector<int>> preds;  // per slot: predecessor slots, sorted by (last, ctx)
  std::vector<double> state;        // [slot][pos]; only cells valid at the position are used
  std::vector<double> trans;        // [from][to]
  std::vector<double> bos;          // per slot: begin-transition weight into position 0

  int required_pad(int i) const { return std::max(0, order - 1 - i); }
  bool valid(int s, int i) const { return pad[static_cast<size_t>(s)] == required_pad(i); }
  double st(int s, int i) const { return state[static_cast<size_t>(s) * n + i]; }
  double tr(int u, int v) const { return trans[static_cast<size_t>(u) * ns + v]; }
};

TupleScores make_tuple_scores(const ChainInstance& inst, const FeatureIndex& idx,
                              const std::vector<double>& w, int order) {
  TupleScores ts;
  ts.n = inst.size();
  ts.ny = idx.n_labels();
  ts.order = order;
  ts.ctxs = enumerate_contexts(order, ts.ny);
  ts.ns = static_cast<int>(ts.ctxs.size());
  ts.pad.resize(static_cast<size_t>(ts.ns));
  ts.last.resize(static_cast<size_t>(ts.ns));
  for (int s = 0; s < ts.ns; ++s) {
    ts.pad[static_cast<size_t>(s)] = ctx_padding(ts.ctxs[static_cast<size_t>(s)], order, ts.ny);
    ts.last[static_cast<size_t>(s)] = ctx_last(ts.ctxs[static_cast<size_t>(s)], ts.ny);
  }

  auto slot_of = [&](uint64_t c) {
    return static_cast<int>(std::lower_bound(ts.ctxs.begin(), ts.ctxs.end(), c) -
                            ts.ctxs.begin());
  };
  ts.shift_to.assign(static_cast<size_t>(ts.ns) * ts.ny, -1);
  ts.preds.assign(static_cast<size_t>(ts.ns), {});
  for (int u = 0; u < ts.ns; ++u)
    for (int y = 0; y < ts.ny; ++y) {
      int v = slot_of(ctx_shift(ts.ctxs[static_cast<size_t>(u)], order, ts.ny, y));
      ts.shift_to[static_cast<size_t>(u) * ts.ny + y] = v;
      ts.preds[static_cast<size_t>(v)].push_back(u);
    }
  // predecessor tie order: lowest newest-label first, then lowest context id
  for (auto& ps : ts.preds)
    std::sort(ps.begin(), ps.end(), [&](int a, int b) {
      int la = ts.last[static_cast<size_t>(a)], lb = ts.last[static_cast<size_t>(b)];
      return la != lb ? la < lb : ts.ctxs[static_cast<size_t>(a)] < ts.ctxs[static_cast<size_t>(b)];
    });

  int rel = idx.relation_id("");
  ts.state.assign(static_cast<size_t>(ts.ns) * ts.n, 0.0);
  for (int i = 0; i < ts.n; ++i)
    for (int s = 0; s < ts.ns; ++s)
      if (ts.valid(s, i))
        ts.state[static_cast<size_t>(s) * ts.n + i] =
            state_score(inst, idx, w, i, ts.ctxs[static_cast<size_t>(s)]);

  ts.trans.assign(static_cast<size_t>(ts.ns) * ts.ns, 0.0);
  for (int u = 0; u < ts.ns; ++u)
    for (int y = 0; y < ts.ny; ++y) {
      int v = ts.shift_to[static_cast<size_t>(u) * ts.ny + y];
      int f = idx.transition_feature(rel, ts.ctxs[static_cast<size_t>(u)],
                                     ts.ctxs[static_cast<size_t>(v)]);
      if (f >= 0) ts.trans[static_cast<size_t>(u) * ts.ns + v] = w[static_cast<size_t>(f)];
    }

  ts.bos.assign(static_cast<size_t>(ts.ns), 0.0);
  for (int s = 0; s < ts.ns; ++s)
    if (ts.pad[static_cast<size_t>(s)] == order - 1) {
      int f = idx.transition_feature(rel, 0, ts.ctxs[static_cast<size_t>(s)]);
      if (f >= 0) ts.bos[static_cast<size_t>(s)] = w[static_cast<size_t>(f)];
    }
  return ts;
}

}  // namespace

namespace detail {

TrellisResult forward_backward_first_order(const ChainInstance& inst,
                                           const FeatureIndex& idx,
                                           const std::vector<double>& w) {
  check_instance(inst, 1);
  const int n = inst.size(), ny = idx.n_labels();
  const int rel = idx.relation_id("");

  std::vector<double> st(static_cast<size_t>(ny) * n);
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < ny; ++y)
      st[static_cast<size_t>(y) * n + i] =
          state_score(inst, idx, w, i, static_cast<uint64_t>(y + 1));
  std::vector<double> tr(static_cast<size_t>(ny) * ny, 0.0);
  for (int a = 0; a < ny; ++a)
    for (int b = 0; b < ny; ++b) {
      int f = idx.transition_feature(rel, static_cast<uint64_t>(a + 1),
                                     static_cast<uint64_t>(b + 1));
      if (f >= 0) tr[static_cast<size_t>(a) * ny + b] = w[static_cast<size_t>(f)];
    }
  std::vector<double> bos(static_cast<size_t>(ny), 0.0);
  for (int y = 0; y < ny; ++y) {
    int f = idx.transition_feature(rel, 0, static_cast<uint64_t>(y + 1));
    if (f >= 0) bos[static_cast<size_t>(y)] = w[static_cast<size_t>(f)];
  }

  TrellisResult r;
  r.n = n; r.order = 1; r.n_labels = ny;
  r.contexts.resize(static_cast<size_t>(ny));
  for (int y = 0; y < ny; ++y) r.contexts[static_cast<size_t>(y)] = static_cast<uint64_t>(y + 1);
  r.alpha.assign(static_cast<size_t>(ny) * n, kNegInf);
  r.beta.assign(static_cast<size_t>(ny) * n, kNegInf);

  auto A = [&](int y, int i) -> double& { return r.alpha[static_cast<size_t>(y) * n + i]; };
  auto B = [&](int y, int i) -> double& { return r.beta[static_cast<size_t>(y) * n + i]; };

  for (int y = 0; y < ny; ++y) A(y, 0) = bos[static_cast<size_t>(y)] + st[static_cast<size_t>(y) * n];
  for (int i = 1; i < n; ++i)
    for (int y = 0; y < ny; ++y) {
      double acc = kNegInf;
      for (int p = 0; p < ny; ++p)
        acc = log_add(acc, A(p, i - 1) + tr[static_cast<size_t>(p) * ny + y]);
      A(y, i) = acc + st[static_cast<size_t>(y) * n + i];
    }
  r.log_z = kNegInf;
  for (int y = 0; y < ny; ++y) r.log_z = log_add(r.log_z, A(y, n - 1));

  for (int y = 0; y < ny; ++y) B(y, n - 1) = 0.0;
  for (int i = n - 2; i >= 0; --i)
    for (int y = 0; y < ny; ++y) {
      double acc = kNegInf;
      for (int q = 0; q < ny; ++q)
        acc = log_add(acc, tr[static_cast<size_t>(y) * ny + q] +
                               st[static_cast<size_t>(q) * n + i + 1] + B(q, i + 1));
      B(y, i) = acc;
    }

  r.state_marg.assign(static_cast<size_t>(ny) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < ny; ++y)
      r.state_marg[static_cast<size_t>(y) * n + i] = std::exp(A(y, i) + B(y, i) - r.log_z);

  r.trans_marg.assign(static_cast<size_t>(n - 1) * ny * ny, 0.0);
  for (int b = 1; b < n; ++b)
    for (int p = 0; p < ny; ++p)
      for (int y = 0; y < ny; ++y)
        r.trans_marg[(static_cast<size_t>(b - 1) * ny + p) * ny + y] =
            std::exp(A(p, b - 1) + tr[static_cast<size_t>(p) * ny + y] +
                     st[static_cast<size_t>(y) * n + b] + B(y, b) - r.log_z);
  return r;
}

TrellisResult forward_backward_tuple(const ChainInstance& inst, const FeatureIndex& idx,
                                     const std::vector<double>& w, int order) {
  check_instance(inst, order);
  TupleScores ts = make_tuple_scores(inst, idx, w, order);
  const int n = ts.n, ns = ts.ns;

  TrellisResult r;
  r.n = n; r.order = order; r.n_labels = ts.ny;
  r.contexts = ts.ctxs;
  r.alpha.assign(static_cast<size_t>(ns) * n, kNegInf);
  r.beta.assign(static_cast<size_t>(ns) * n, kNegInf);
  auto A = [&](int s, int i) -> double& { return r.alpha[static_cast<size_t>(s) * n + i]; };
  auto B = [&](int s, int i) -> double& { return r.beta[static_cast<size_t>(s) * n + i]; };

  for (int s = 0; s < ns; ++s)
    if (ts.valid(s, 0)) A(s, 0) = ts.bos[static_cast<size_t>(s)] + ts.st(s, 0);
  for (int i = 1; i < n; ++i)
    for (int v = 0; v < ns; ++v) {
      if (!ts.valid(v, i)) continue;
      double acc = kNegInf;
      for (int u : ts.preds[static_cast<size_t>(v)]) {
        if (!ts.valid(u, i - 1)) continue;
        acc = log_add(acc, A(u, i - 1) + ts.tr(u, v));
      }
      A(v, i) = acc + ts.st(v, i);
    }
  r.log_z = kNegInf;
  for (int s = 0; s < ns; ++s)
    if (ts.valid(s, n - 1)) r.log_z = log_add(r.log_z, A(s, n - 1));

  for (int s = 0; s < ns; ++s)
    if (ts.valid(s, n - 1)) B(s, n - 1) = 0.0;
  for (int i = n - 2; i >= 0; --i)
    for (int u = 0; u < ns; ++u) {
      if (!ts.valid(u, i)) continue;
      double acc = kNegInf;
      for (int y = 0; y < ts.ny; ++y) {
        int v = ts.shift_to[static_cast<size_t>(u) * ts.ny + y];
        acc = log_add(acc, ts.tr(u, v) + ts.st(v, i + 1) + B(v, i + 1));
      }
      B(u, i) = acc;
    }

  r.state_marg.assign(static_cast<size_t>(ts.ny) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < ns; ++s)
      if (ts.valid(s, i))
        r.state_marg[static_cast<size_t>(ts.last[static_cast<size_t>(s)]) * n + i] +=
            std::exp(A(s, i) + B(s, i) - r.log_z);

  r.trans_marg.assign(static_cast<size_t>(n - 1) * ns * ns, 0.0);
  for (int b = 1; b < n; ++b)
    for (int v = 0; v < ns; ++v) {
      if (!ts.valid(v, b)) continue;
      for (int u : ts.preds[static_cast<size_t>(v)]) {
        if (!ts.valid(u, b - 1)) continue;
        r.trans_marg[(static_cast<size_t>(b - 1) * ns + u) * ns + v] =
            std::exp(A(u, b - 1) + ts.tr(u, v) + ts.st(v, b) + B(v, b) - r.log_z);
      }
    }
  return r;
}

ViterbiResult viterbi_first_order(const ChainInstance& inst, const FeatureIndex& idx,
                                  const std::vector<double>& w) {
  check_instance(inst, 1);
  const int n = inst.size(), ny = idx.n_labels();
  const int rel = idx.relation_id("");

  std::vector<double> st(static_cast<size_t>(ny) * n);
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < ny; ++y)
      st[static_cast<size_t>(y) * n + i] =
          state_score(inst, idx, w, i, static_cast<uint64_t>(y + 1));
  std::vector<double> tr(static_cast<size_t>(ny) * ny, 0.0);
  for (int a = 0; a < ny; ++a)
    for (int b = 0; b < ny; ++b) {
      int f = idx.transition_feature(rel, static_cast<uint64_t>(a + 1),
                                     static_cast<uint64_t>(b + 1));
      if (f >= 0) tr[static_cast<size_t>(a) * ny + b] = w[static_cast<size_t>(f)];
    }

  std::vector<double> best(static_cast<size_t>(ny) * n, kNegInf);
  std::vector<int> back(static_cast<size_t>(ny) * n, -1);
  for (int y = 0; y < ny; ++y) {
    double b0 = 0;
    int f = idx.transition_feature(rel, 0, static_cast<uint64_t>(y + 1));
    if (f >= 0) b0 = w[static_cast<size_t>(f)];
    best[static_cast<size_t>(y) * n] = b0 + st[static_cast<size_t>(y) * n];
  }
  for (int i = 1; i < n; ++i)
    for (int y = 0; y < ny; ++y) {
      double hi = kNegInf;
      int arg = -1;
      for (int p = 0; p < ny; ++p) {
        double v = best[static_cast<size_t>(p) * n + i - 1] + tr[static_cast<size_t>(p) * ny + y];
        if (v > hi) { hi = v; arg = p; }
      }
      best[static_cast<size_t>(y) * n + i] = hi + st[static_cast<size_t>(y) * n + i];
      back[static_cast<size_t>(y) * n + i] = arg;
    }

  ViterbiResult res;
  double hi = kNegInf;
  int arg = 0;
  for (int y = 0; y < ny; ++y) {
    double v = best[static_cast<size_t>(y) * n + n - 1];
    if (v > hi) { hi = v; arg = y; }
  }
  res.score = hi;
  res.labels.assign(static_cast<size_t>(n), 0);
  res.labels[static_cast<size_t>(n - 1)] = arg;
  for (int i = n - 1; i > 0; --i)
    res.labels[static_cast<size_t>(i - 1)] =
        back[static_cast<size_t>(res.labels[static_cast<size_t>(i)]) * n + i];
  return res;
}

ViterbiResult viterbi_tuple(const ChainInstance& inst, const FeatureIndex& idx,
                            const std::vector<double>& w, int order) {
  check_instance(inst, order);
  TupleScores ts = make_tuple_scores(inst, idx, w, order);
  const int n = ts.n, ns = ts.ns;

  std::vector<double> best(static_cast<size_t>(ns) * n, kNegInf);
  std::vector<int> back(static_cast<size_t>(ns) * n, -1);
  for (int s = 0; s < ns; ++s)
    if (ts.valid(s, 0))
      best[static_cast<size_t>(s) * n] = ts.bos[static_cast<size_t>(s)] + ts.st(s, 0);
  for (int i = 1; i < n; ++i)
    for (int v = 0; v < ns; ++v) {
      if (!ts.valid(v, i)) continue;
      double hi = kNegInf;
      int arg = -1;
      // preds are sorted by (newest label, context), so strict improvement
      // keeps the lowest-ranked argmax
      for (int u : ts.preds[static_cast<size_t>(v)]) {
        if (!ts.valid(u, i - 1)) continue;
        double s = best[static_cast<size_t>(u) * n + i - 1] + ts.tr(u, v);
        if (s > hi) { hi = s; arg = u; }
      }
      best[static_cast<size_t>(v) * n + i] = hi + ts.st(v, i);
      back[static_cast<size_t>(v) * n + i] = arg;
    }

  // final slot scan ordered by (newest label, context id)
  std::vector<int> order_slots(static_cast<size_t>(ns));
  for (int s = 0; s < ns; ++s) order_slots[static_cast<size_t>(s)] = s;
  std::sort(order_slots.begin(), order_slots.end(), [&](int a, int b) {
    int la = ts.last[static_cast<size_t>(a)], lb = ts.last[static_cast<size_t>(b)];
    return la != lb ? la < lb : ts.ctxs[static_cast<size_t>(a)] < ts.ctxs[static_cast<size_t>(b)];
  });
  double hi = kNegInf;
  int arg = -1;
  for (int s : order_slots) {
    if (!ts.valid(s, n - 1)) continue;
    double v = best[static_cast<size_t>(s) * n + n - 1];
    if (v > hi) { hi = v; arg = s; }
  }

  ViterbiResult res;
  res.score = hi;
  res.labels.assign(static_cast<size_t>(n), 0);
  int cur = arg;
  for (int i = n - 1; i >= 0; --i) {
    res.labels[static_cast<size_t>(i)] = ts.last[static_cast<size_t>(cur)];
    cur = i > 0 ? back[static_cast<size_t>(cur) * n + i] : -1;
  }
  return res;
}

}  // namespace detail

TrellisResult forward_backward(const ChainInstance& inst, const FeatureIndex& idx,
                               const std::vector<double>& w, int order) {
  return order == 1 ? detail::forward_backward_first_order(inst, idx, w)
                    : detail::forward_backward_tuple(inst, idx, w, order);
}

ViterbiResult viterbi(const ChainInstance& inst, const FeatureIndex& idx,
                      const std::vector<double>& w, int order) {
  return order == 1 ? detail::viterbi_first_order(inst, idx, w)
                    : detail::viterbi_tuple(inst, idx, w, order);
}

double score_sequence(const ChainInstance& inst, const std::vector<int>& y,
                      const FeatureIndex& idx, const std::vector<double>& w,
                      int order) {
  check_instance(inst, order);
  if (static_cast<int>(y.size()) != inst.size())
    throw Error("labeling length does not match token count");
  const int ny = idx.n_labels();
  for (int v : y)
    if (v < 0 || v >= ny) throw Error("label id out of range");

  std::vector<uint64_t> ctx = gold_contexts(y, order, ny);
  double s = 0;
  for (int i = 0; i < inst.size(); ++i)
    s += state_score(inst, idx, w, i, ctx[static_cast<size_t>(i)]);
  for (int i = 1; i < inst.size(); ++i)
    s += transition_score(idx, w, ctx[static_cast<size_t>(i - 1)], ctx[static_cast<size_t>(i)]);
  s += transition_score(idx, w, 0, ctx[0]);  // begin transition, 0 when absent
  return s;
}

double sequence_logprob(const ChainInstance& inst, const std::vector<int>& y,
                        const FeatureIndex& idx, const std::vector<double>& w,
                        int order) {
  double s = score_sequence(inst, y, idx, w, order);
  return s - forward_backward(inst, idx, w, order).log_z;
}

std::pair<double, std::vector<double>> loglik_gradient(
    const std::vector<ChainInstance>& corpus, const FeatureIndex& idx,
    const std::vector<double>& w, double l1, double l2, int order) {
  if (corpus.empty()) throw Error("empty corpus");
  const int ny = idx.n_labels();
  const int rel = idx.relation_id("");
  double obj = 0;
  std::vector<double> grad(w.size(), 0.0);

  for (const auto& inst : corpus) {
    if (!inst.labeled()) throw Error("unlabeled instance in training corpus");
    TrellisResult tr = forward_backward(inst, idx, w, order);
    obj += score_sequence(inst, inst.gold, idx, w, order) - tr.log_z;

    // empirical counts along the gold path
    std::vector<uint64_t> gc = gold_contexts(inst.gold, order, ny);
    for (int i = 0; i < inst.size(); ++i)
      for (const auto& pred : inst.obs[static_cast<size_t>(i)]) {
        int f = idx.state_feature(idx.predicate_id(pred), gc[static_cast<size_t>(i)]);
        if (f >= 0) grad[static_cast<size_t>(f)] += 1.0;
      }
    for (int i = 1; i < inst.size(); ++i) {
      int f = idx.transition_feature(rel, gc[static_cast<size_t>(i - 1)], gc[static_cast<size_t>(i)]);
      if (f >= 0) grad[static_cast<size_t>(f)] += 1.0;
    }
    {
      int f = idx.transition_feature(rel, 0, gc[0]);
      if (f >= 0) grad[static_cast<size_t>(f)] += 1.0;
    }

    // expected counts under the model
    const int ns = tr.n_slots();
    for (int i = 0; i < inst.size(); ++i)
      for (int s = 0; s < ns; ++s) {
        double a = tr.alpha_at(s, i);
        if (a == kNegInf) continue;
        double p = std::exp(a + tr.beta_at(s, i) - tr.log_z);
        if (p == 0) continue;
        for (const auto& pred : inst.obs[static_cast<size_t>(i)]) {
          int f = idx.state_feature(idx.predicate_id(pred), tr.contexts[static_cast<size_t>(s)]);
          if (f >= 0) grad[static_cast<size_t>(f)] -= p;
        }
      }
    for (int b = 1; b < inst.size(); ++b)
      for (int u = 0; u < ns; ++u)
        for (int v = 0; v < ns; ++v) {
          double p = tr.trans_marginal(b, u, v);
          if (p == 0) continue;
          int f = idx.transition_feature(rel, tr.contexts[static_cast<size_t>(u)],
                                         tr.contexts[static_cast<size_t>(v)]);
          if (f >= 0) grad[static_cast<size_t>(f)] -= p;
        }
    for (int s = 0; s < ns; ++s) {
      int f = idx.transition_feature(rel, 0, tr.contexts[static_cast<size_t>(s)]);
      if (f < 0) continue;
      double a = tr.alpha_at(s, 0);
      if (a == kNegInf) continue;
      grad[static_cast<size_t>(f)] -= std::exp(a + tr.beta_at(s, 0) - tr.log_z);
    }
  }

  for (size_t k = 0; k < w.size(); ++k) {
    double v = w[k];
    obj -= l1 * std::abs(v) + l2 * v * v;
    double sign = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
    grad[k] -= l1 * sign + 2.0 * l2 * v;
  }
  return {obj, std::move(grad)};
}

}  // namespace crftk
