#pragma once

#include <vector>

#include "crftk/types.hpp"

namespace crftk {

// Inclusive token span [start, end] carrying a label id.
struct Span {
  int start = 0, end = 0, label = 0;
  bool operator==(const Span&) const = default;
  int length() const { return end - start + 1; }
};

// One annotation over a universe of `universe` tokens.  Spans may overlap
// (agreement counting needs the multiplicity).
struct SpanSet {
  std::vector<Span> spans;
  int universe = 0;
};

// Square gold x predicted count matrix.
class ConfusionCounts {
 public:
  explicit ConfusionCounts(int n_labels);
  long& at(int gold, int pred) { return m_[static_cast<size_t>(gold) * n_ + pred]; }
  long at(int gold, int pred) const { return m_[static_cast<size_t>(gold) * n_ + pred]; }
  int size() const { return n_; }
  long total() const;

 private:
  int n_ = 0;
  std::vector<long> m_;
};

struct Prf {
  double precision = 0, recall = 0, f = 0;
};

// Maximal runs of identical non-background labels become spans.  Pass a
// background id of -1 to keep every label.
SpanSet tags_to_spans(const std::vector<int>& tags, int background);

// Proportional span credit: precision averages each predicted span's covered
// fraction against gold, recall the reverse; only same-label pairs overlap.
// Both sides empty scores 1, exactly one side empty scores 0.
Prf span_prf(const SpanSet& gold, const SpanSet& pred, int label);

// Mean of the positive and negative class F-scores.
double macro_f_posneg(const ConfusionCounts& counts, int pos, int neg);
// Trace over total = plain accuracy.
double micro_f(const ConfusionCounts& counts);
// Per-class precision/recall/F with the 0-denominator -> 0 convention.
Prf class_prf(const ConfusionCounts& counts, int label);

enum class KappaMode { Binary, Proportional };

struct KappaResult {
  double kappa = 0, p_o = 0, p_c = 0;
  long m1 = 0, a1 = 0, m2 = 0, a2 = 0;
};

// Chance-corrected agreement between two annotations of the same T tokens.
// Binary mode counts tokens with multiplicity and credits a whole span once
// it shares at least one token with the other side; proportional mode counts
// unique tokens and credits only tokens annotated by both.  Labels on the
// spans are ignored: both sides annotate the same kind of markable.
KappaResult kappa(const SpanSet& ann1, const SpanSet& ann2, int T, KappaMode mode);

}  // namespace crftk
