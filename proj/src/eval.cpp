#include "crftk/eval.hpp"

#include <algorithm>

namespace crftk {

namespace {

int overlap(const Span& a, const Span& b) {
  return std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start) + 1);
}

void check_spans(const SpanSet& s, int T, const char* who) {
  for (const Span& sp : s.spans)
    if (sp.start < 0 || sp.start > sp.end || sp.end >= T)
      throw Error(std::string(who) + " span out of the token universe");
}

double safe_div(double num, double den) { return den == 0 ? 0.0 : num / den; }

}  // namespace

ConfusionCounts::ConfusionCounts(int n_labels) : n_(n_labels) {
  if (n_labels < 1) throw Error("confusion matrix needs at least one label");
  m_.assign(static_cast<size_t>(n_) * n_, 0);
}

long ConfusionCounts::total() const {
  long t = 0;
  for (long v : m_) t += v;
  return t;
}

SpanSet tags_to_spans(const std::vector<int>& tags, int background) {
  SpanSet out;
  out.universe = static_cast<int>(tags.size());
  for (int i = 0; i < out.universe; ++i) {
    int y = tags[static_cast<size_t>(i)];
    if (y == background) continue;
    if (!out.spans.empty() && out.spans.back().label == y && out.spans.back().end == i - 1)
      out.spans.back().end = i;
    else
      out.spans.push_back({i, i, y});
  }
  return out;
}

Prf span_prf(const SpanSet& gold, const SpanSet& pred, int label) {
  if (gold.universe != pred.universe)
    throw Error("span sets cover different token universes");
  check_spans(gold, gold.universe, "gold");
  check_spans(pred, pred.universe, "predicted");

  std::vector<Span> g, p;
  for (const Span& s : gold.spans)
    if (s.label == label) g.push_back(s);
  for (const Span& s : pred.spans)
    if (s.label == label) p.push_back(s);

  if (g.empty() && p.empty()) return {1.0, 1.0, 1.0};
  if (g.empty() || p.empty()) return {0.0, 0.0, 0.0};

  double psum = 0, rsum = 0;
  for (const Span& gs : g)
    for (const Span& ps : p) {
      int ov = overlap(gs, ps);
      if (ov == 0) continue;
      psum += static_cast<double>(ov) / ps.length();
      rsum += static_cast<double>(ov) / gs.length();
    }
  Prf out;
  out.precision = psum / static_cast<double>(p.size());
  out.recall = rsum / static_cast<double>(g.size());
  out.f = out.precision + out.recall == 0
              ? 0.0
              : 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

Prf class_prf(const ConfusionCounts& counts, int label) {
  const int n = counts.size();
  if (label < 0 || label >= n) throw Error("label id out of range");
  long tp = counts.at(label, label), col = 0, row = 0;
  for (int g = 0; g < n; ++g) col += counts.at(g, label);
  for (int p = 0; p < n; ++p) row += counts.at(label, p);
  Prf out;
  out.precision = safe_div(static_cast<double>(tp), static_cast<double>(col));
  out.recall = safe_div(static_cast<double>(tp), static_cast<double>(row));
  out.f = safe_div(2 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

double macro_f_posneg(const ConfusionCounts& counts, int pos, int neg) {
  if (pos == neg) throw Error("positive and negative classes must differ");
  if (counts.total() == 0) throw Error("empty confusion matrix");
  return 0.5 * (class_prf(counts, pos).f + class_prf(counts, neg).f);
}

double micro_f(const ConfusionCounts& counts) {
  long total = counts.total();
  if (total == 0) throw Error("empty confusion matrix");
  long trace = 0;
  for (int y = 0; y < counts.size(); ++y) trace += counts.at(y, y);
  return static_cast<double>(trace) / static_cast<double>(total);
}

KappaResult kappa(const SpanSet& ann1, const SpanSet& ann2, int T, KappaMode mode) {
  if (T < 1) throw Error("token universe must be non-empty");
  check_spans(ann1, T, "first annotation");
  check_spans(ann2, T, "second annotation");

  KappaResult r;
  if (mode == KappaMode::Binary) {
    // every span's tokens count, even where spans overlap; a span matches as
    // a whole once it shares a token with any span of the other annotation
    for (const Span& s : ann1.spans) {
      r.a1 += s.length();
      bool hit = std::any_of(ann2.spans.begin(), ann2.spans.end(),
                             [&](const Span& o) { return overlap(s, o) > 0; });
      if (hit) r.m1 += s.length();
    }
    for (const Span& s : ann2.spans) {
      r.a2 += s.length();
      bool hit = std::any_of(ann1.spans.begin(), ann1.spans.end(),
                             [&](const Span& o) { return overlap(s, o) > 0; });
      if (hit) r.m2 += s.length();
    }
  } else {
    std::vector<char> c1(static_cast<size_t>(T), 0), c2(static_cast<size_t>(T), 0);
    for (const Span& s : ann1.spans)
      for (int i = s.start; i <= s.end; ++i) c1[static_cast<size_t>(i)] = 1;
    for (const Span& s : ann2.spans)
      for (int i = s.start; i <= s.end; ++i) c2[static_cast<size_t>(i)] = 1;
    long both = 0;
    for (int i = 0; i < T; ++i) {
      r.a1 += c1[static_cast<size_t>(i)];
      r.a2 += c2[static_cast<size_t>(i)];
      both += c1[static_cast<size_t>(i)] && c2[static_cast<size_t>(i)];
    }
    r.m1 = r.m2 = both;
    if (r.a1 > T || r.a2 > T)
      throw Error("annotated token count exceeds the universe");
  }

  r.p_o = static_cast<double>(T - r.a1 + r.m1 - r.a2 + r.m2) / static_cast<double>(T);
  double ch1 = static_cast<double>(r.a1) / T, ch2 = static_cast<double>(r.a2) / T;
  r.p_c = ch1 * ch2 + (1 - ch1) * (1 - ch2);
  r.kappa = r.p_o == 1.0 ? 1.0 : (r.p_o - r.p_c) / (1 - r.p_c);
  return r;
}

}  // namespace crftk
