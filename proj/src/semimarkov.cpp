#include "crftk/semimarkov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "crftk/chain.hpp"
#include "crftk/numeric.hpp"

namespace crftk {

namespace {

// Per-instance score tables: label-wise prefix sums of the positional state
// scores so any segment score is two lookups, plus dense transition/start
// tables and the segment-length weights.
struct SmScores {
  int n = 0, ny = 0, max_len = 0;
  std::vector<double> prefix;  // [y][i+1], prefix[y][0] = 0
  std::vector<double> trans;   // [prev][next], -inf on the diagonal
  std::vector<double> bos;     // [y]
  std::vector<double> seglen;  // [y][d], 0 when the feature is absent

  SmScores(const ChainInstance& inst, const FeatureIndex& idx,
           const std::vector<double>& w, int max_seg_len)
      : n(inst.size()), ny(idx.n_labels()), max_len(max_seg_len) {
    prefix.assign(static_cast<size_t>(ny) * (n + 1), 0.0);
    for (int y = 0; y < ny; ++y) {
      uint64_t ctx = static_cast<uint64_t>(y + 1);
      double run = 0;
      for (int i = 0; i < n; ++i) {
        run += state_score(inst, idx, w, i, ctx);
        prefix[static_cast<size_t>(y) * (n + 1) + i + 1] = run;
      }
    }
    trans.assign(static_cast<size_t>(ny) * ny, kNegInf);
    for (int a = 0; a < ny; ++a)
      for (int b = 0; b < ny; ++b)
        if (a != b) trans[static_cast<size_t>(a) * ny + b] = transition_score(idx, w, a + 1, b + 1);
    bos.assign(static_cast<size_t>(ny), 0.0);
    for (int y = 0; y < ny; ++y) bos[static_cast<size_t>(y)] = transition_score(idx, w, 0, y + 1);
    seglen.assign(static_cast<size_t>(ny) * max_len, 0.0);
    for (int y = 0; y < ny; ++y)
      for (int d = 0; d < max_len; ++d) {
        int f = idx.seg_length_feature(d + 1, y);
        if (f >= 0) seglen[static_cast<size_t>(y) * max_len + d] = w[static_cast<size_t>(f)];
      }
  }

  // state score of segment [start, end] under y, length indicator included
  double seg(int y, int start, int end) const {
    const double* p = prefix.data() + static_cast<size_t>(y) * (n + 1);
    return p[end + 1] - p[start] + seglen[static_cast<size_t>(y) * max_len + (end - start)];
  }
  double t(int a, int b) const { return trans[static_cast<size_t>(a) * ny + b]; }
};

void check_sm_args(const ChainInstance& inst, const FeatureIndex& idx, int max_seg_len) {
  if (inst.size() == 0) throw Error("empty instance");
  if (max_seg_len < 1) throw Error("max segment length must be >= 1");
  if (idx.order() != 1) throw Error("segment models use an order-1 feature index");
}

}  // namespace

void validate_segmentation(const SegmentLabeling& segs, int n, int max_seg_len,
                           int n_labels) {
  if (n <= 0) throw Error("empty instance");
  if (segs.empty()) throw Error("empty segmentation");
  if (segs.front().start != 0) throw Error("segmentation does not start at token 0");
  for (size_t k = 0; k < segs.size(); ++k) {
    const Segment& s = segs[k];
    if (s.start > s.end) throw Error("segment has negative length");
    if (s.end - s.start + 1 > max_seg_len)
      throw Error("segment [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                  "] longer than the maximum of " + std::to_string(max_seg_len));
    if (s.label < 0 || s.label >= n_labels) throw Error("segment label out of range");
    if (k > 0) {
      if (s.start != segs[k - 1].end + 1) throw Error("segments do not tile the instance");
      if (s.label == segs[k - 1].label) throw Error("adjacent segments share a label");
    }
  }
  if (segs.back().end != n - 1) throw Error("segmentation does not cover the instance");
}

SegmentLabeling runs_to_segments(const std::vector<int>& tags) {
  SegmentLabeling out;
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    if (out.empty() || tags[static_cast<size_t>(i)] != out.back().label)
      out.push_back({i, i, tags[static_cast<size_t>(i)]});
    else
      out.back().end = i;
  }
  return out;
}

double segment_state_score(const ChainInstance& inst, const FeatureIndex& idx,
                           const std::vector<double>& w, int label, int start, int end) {
  if (start < 0 || end >= inst.size() || start > end)
    throw Error("segment out of range");
  double s = 0;
  uint64_t ctx = static_cast<uint64_t>(label + 1);
  for (int i = start; i <= end; ++i) s += state_score(inst, idx, w, i, ctx);
  int f = idx.seg_length_feature(end - start + 1, label);
  if (f >= 0) s += w[static_cast<size_t>(f)];
  return s;
}

double score_segmentation(const ChainInstance& inst, const SegmentLabeling& segs,
                          const FeatureIndex& idx, const std::vector<double>& w,
                          int max_seg_len) {
  check_sm_args(inst, idx, max_seg_len);
  validate_segmentation(segs, inst.size(), max_seg_len, idx.n_labels());
  double total = transition_score(idx, w, 0, segs.front().label + 1);
  for (size_t k = 0; k < segs.size(); ++k) {
    const Segment& s = segs[k];
    total += segment_state_score(inst, idx, w, s.label, s.start, s.end);
    if (k > 0) total += transition_score(idx, w, segs[k - 1].label + 1, s.label + 1);
  }
  return total;
}

SmTrellis sm_forward_backward(const ChainInstance& inst, const FeatureIndex& idx,
                              const std::vector<double>& w, int max_seg_len) {
  check_sm_args(inst, idx, max_seg_len);
  const SmScores sc(inst, idx, w, max_seg_len);
  const int n = sc.n, ny = sc.ny, L = max_seg_len;

  SmTrellis tr;
  tr.n = n;
  tr.n_labels = ny;
  tr.max_seg_len = L;
  tr.alpha.assign(static_cast<size_t>(ny) * n, kNegInf);
  tr.beta.assign(static_cast<size_t>(ny) * n, kNegInf);

  // alpha: last segment ends at i with label y
  for (int i = 0; i < n; ++i)
    for (int y = 0; y < ny; ++y) {
      double acc = kNegInf;
      for (int d = 0; d <= std::min(L - 1, i); ++d) {
        int start = i - d;
        double pred;
        if (start == 0) {
          pred = sc.bos[static_cast<size_t>(y)];
        } else {
          pred = kNegInf;
          for (int yp = 0; yp < ny; ++yp) {
            if (yp == y) continue;
            pred = log_add(pred, tr.alpha_at(yp, start - 1) + sc.t(yp, y));
          }
        }
        acc = log_add(acc, pred + sc.seg(y, start, i));
      }
      tr.alpha[static_cast<size_t>(y) * n + i] = acc;
    }

  double log_z = kNegInf;
  for (int y = 0; y < ny; ++y) log_z = log_add(log_z, tr.alpha_at(y, n - 1));
  tr.log_z = log_z;

  // beta: first segment of the suffix starts at i with label y; the segment's
  // own state score is folded in so beta[y][0] + start score closes the chain
  for (int i = n - 1; i >= 0; --i)
    for (int y = 0; y < ny; ++y) {
      double acc = kNegInf;
      for (int d = 0; d <= std::min(L - 1, n - 1 - i); ++d) {
        int end = i + d;
        double succ = 0;
        if (end < n - 1) {
          succ = kNegInf;
          for (int yn = 0; yn < ny; ++yn) {
            if (yn == y) continue;
            succ = log_add(succ, sc.t(y, yn) + tr.beta_at(yn, end + 1));
          }
        }
        acc = log_add(acc, sc.seg(y, i, end) + succ);
      }
      tr.beta[static_cast<size_t>(y) * n + i] = acc;
    }

  // segment marginals: predecessor mass * segment score * successor mass
  tr.seg_marg.assign(static_cast<size_t>(ny) * n * L, 0.0);
  tr.pos_marg.assign(static_cast<size_t>(ny) * n, 0.0);
  for (int y = 0; y < ny; ++y)
    for (int end = 0; end < n; ++end)
      for (int d = 0; d <= std::min(L - 1, end); ++d) {
        int start = end - d;
        double pred;
        if (start == 0) {
          pred = sc.bos[static_cast<size_t>(y)];
        } else {
          pred = kNegInf;
          for (int yp = 0; yp < ny; ++yp) {
            if (yp == y) continue;
            pred = log_add(pred, tr.alpha_at(yp, start - 1) + sc.t(yp, y));
          }
        }
        double succ = 0;
        if (end < n - 1) {
          succ = kNegInf;
          for (int yn = 0; yn < ny; ++yn) {
            if (yn == y) continue;
            succ = log_add(succ, sc.t(y, yn) + tr.beta_at(yn, end + 1));
          }
        }
        double p = std::exp(pred + sc.seg(y, start, end) + succ - log_z);
        tr.seg_marg[(static_cast<size_t>(y) * n + end) * L + d] = p;
        for (int i = start; i <= end; ++i)
          tr.pos_marg[static_cast<size_t>(y) * n + i] += p;
      }

  if (n > 1) {
    tr.bnd_marg.assign(static_cast<size_t>(n - 1) * ny * ny, 0.0);
    for (int b = 1; b < n; ++b)
      for (int yp = 0; yp < ny; ++yp)
        for (int yn = 0; yn < ny; ++yn) {
          if (yp == yn) continue;
          tr.bnd_marg[(static_cast<size_t>(b - 1) * ny + yp) * ny + yn] =
              std::exp(tr.alpha_at(yp, b - 1) + sc.t(yp, yn) + tr.beta_at(yn, b) - log_z);
        }
  }
  return tr;
}

SmViterbiResult sm_viterbi(const ChainInstance& inst, const FeatureIndex& idx,
                           const std::vector<double>& w, int max_seg_len) {
  check_sm_args(inst, idx, max_seg_len);
  const SmScores sc(inst, idx, w, max_seg_len);
  const int n = sc.n, ny = sc.ny, L = max_seg_len;

  std::vector<double> best(static_cast<size_t>(ny) * n, kNegInf);
  std::vector<int> back_d(static_cast<size_t>(ny) * n, -1);
  std::vector<int> back_y(static_cast<size_t>(ny) * n, -2);

  for (int i = 0; i < n; ++i)
    for (int y = 0; y < ny; ++y) {
      double hi = kNegInf;
      int hd = -1, hy = -2;
      // candidates ranked: labeled predecessors by label then by segment
      // length, with the start-of-chain segment considered last
      for (int yp = 0; yp < ny; ++yp) {
        if (yp == y) continue;
        for (int d = 0; d <= std::min(L - 1, i - 1); ++d) {
          double cand = best[static_cast<size_t>(yp) * n + (i - d - 1)] + sc.t(yp, y) +
                        sc.seg(y, i - d, i);
          if (cand > hi) { hi = cand; hd = d; hy = yp; }
        }
      }
      if (i <= L - 1) {
        double cand = sc.bos[static_cast<size_t>(y)] + sc.seg(y, 0, i);
        if (cand > hi) { hi = cand; hd = i; hy = -1; }
      }
      best[static_cast<size_t>(y) * n + i] = hi;
      back_d[static_cast<size_t>(y) * n + i] = hd;
      back_y[static_cast<size_t>(y) * n + i] = hy;
    }

  int arg = 0;
  for (int y = 1; y < ny; ++y)
    if (best[static_cast<size_t>(y) * n + (n - 1)] > best[static_cast<size_t>(arg) * n + (n - 1)])
      arg = y;

  SmViterbiResult res;
  res.score = best[static_cast<size_t>(arg) * n + (n - 1)];
  int i = n - 1, y = arg;
  while (i >= 0) {
    int d = back_d[static_cast<size_t>(y) * n + i];
    int yp = back_y[static_cast<size_t>(y) * n + i];
    res.segments.push_back({i - d, i, y});
    i -= d + 1;
    y = yp;
  }
  std::reverse(res.segments.begin(), res.segments.end());
  return res;
}

std::pair<double, std::vector<double>> sm_loglik_gradient(
    const std::vector<SegmentedInstance>& corpus, const FeatureIndex& idx,
    const std::vector<double>& w, double l1, double l2, int max_seg_len) {
  if (corpus.empty()) throw Error("empty corpus");
  const int ny = idx.n_labels();
  double obj = 0;
  std::vector<double> grad(w.size(), 0.0);

  for (const auto& si : corpus) {
    const ChainInstance& inst = si.chain;
    validate_segmentation(si.gold, inst.size(), max_seg_len, ny);
    SmTrellis tr = sm_forward_backward(inst, idx, w, max_seg_len);
    obj += score_segmentation(inst, si.gold, idx, w, max_seg_len) - tr.log_z;

    // empirical counts
    for (size_t k = 0; k < si.gold.size(); ++k) {
      const Segment& s = si.gold[k];
      uint64_t ctx = static_cast<uint64_t>(s.label + 1);
      for (int i = s.start; i <= s.end; ++i)
        for (const auto& pred : inst.obs[static_cast<size_t>(i)]) {
          int f = idx.state_feature(idx.predicate_id(pred), ctx);
          if (f >= 0) grad[static_cast<size_t>(f)] += 1.0;
        }
      int fl = idx.seg_length_feature(s.end - s.start + 1, s.label);
      if (fl >= 0) grad[static_cast<size_t>(fl)] += 1.0;
      uint64_t from = k == 0 ? 0 : static_cast<uint64_t>(si.gold[k - 1].label + 1);
      int ft = idx.transition_feature(idx.relation_id(""), from, ctx);
      if (ft >= 0) grad[static_cast<size_t>(ft)] += 1.0;
    }

    // expected counts
    const int n = inst.size();
    for (int y = 0; y < ny; ++y) {
      uint64_t ctx = static_cast<uint64_t>(y + 1);
      for (int i = 0; i < n; ++i) {
        double p = tr.pos_marginal(y, i);
        if (p == 0.0) continue;
        for (const auto& pred : inst.obs[static_cast<size_t>(i)]) {
          int f = idx.state_feature(idx.predicate_id(pred), ctx);
          if (f >= 0) grad[static_cast<size_t>(f)] -= p;
        }
      }
      for (int end = 0; end < n; ++end)
        for (int d = 0; d <= std::min(max_seg_len - 1, end); ++d) {
          double p = tr.seg_marginal(y, end, d);
          if (p == 0.0) continue;
          int fl = idx.seg_length_feature(d + 1, y);
          if (fl >= 0) grad[static_cast<size_t>(fl)] -= p;
          if (end == d) {  // segment starts the chain
            int ft = idx.transition_feature(idx.relation_id(""), 0, ctx);
            if (ft >= 0) grad[static_cast<size_t>(ft)] -= p;
          }
        }
    }
    for (int b = 1; b < n; ++b)
      for (int yp = 0; yp < ny; ++yp)
        for (int yn = 0; yn < ny; ++yn) {
          if (yp == yn) continue;
          double p = tr.bnd_marginal(b, yp, yn);
          if (p == 0.0) continue;
          int ft = idx.transition_feature(idx.relation_id(""),
                                          static_cast<uint64_t>(yp + 1),
                                          static_cast<uint64_t>(yn + 1));
          if (ft >= 0) grad[static_cast<size_t>(ft)] -= p;
        }
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
