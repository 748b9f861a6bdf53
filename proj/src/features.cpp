#include "crftk/features.hpp"

#include <algorithm>
#include <cmath>

namespace crftk {

uint64_t ctx_encode(const int* labels, int k, int n_labels) {
  const uint64_t base = static_cast<uint64_t>(n_labels) + 1;
  uint64_t ctx = 0;
  for (int i = 0; i < k; ++i) {
    int y = labels[i];
    if (y < kBosLabel || y >= n_labels) throw Error("label id out of range in context");
    ctx = ctx * base + static_cast<uint64_t>(y + 1);
  }
  return ctx;
}

void ctx_decode(uint64_t ctx, int k, int n_labels, int* labels_out) {
  const uint64_t base = static_cast<uint64_t>(n_labels) + 1;
  for (int i = k - 1; i >= 0; --i) {
    labels_out[i] = static_cast<int>(ctx % base) - 1;
    ctx /= base;
  }
}

uint64_t ctx_shift(uint64_t ctx, int k, int n_labels, int next_label) {
  const uint64_t base = static_cast<uint64_t>(n_labels) + 1;
  uint64_t keep = 1;
  for (int i = 0; i < k - 1; ++i) keep *= base;
  return (ctx % keep) * base + static_cast<uint64_t>(next_label + 1);
}

int ctx_last(uint64_t ctx, int n_labels) {
  const uint64_t base = static_cast<uint64_t>(n_labels) + 1;
  return static_cast<int>(ctx % base) - 1;
}

std::string ctx_to_string(uint64_t ctx, int k, const LabelAlphabet& labels) {
  std::vector<int> ys(static_cast<size_t>(k));
  ctx_decode(ctx, k, labels.size(), ys.data());
  std::string out;
  for (int i = 0; i < k; ++i) {
    if (i) out += '|';
    out += ys[static_cast<size_t>(i)] == kBosLabel
               ? kBosName
               : labels.name(ys[static_cast<size_t>(i)]);
  }
  return out;
}

uint64_t ctx_from_string(const std::string& s, int k, const LabelAlphabet& labels) {
  std::vector<int> ys;
  size_t pos = 0;
  while (true) {
    size_t bar = s.find('|', pos);
    std::string part = s.substr(pos, bar == std::string::npos ? bar : bar - pos);
    if (part == kBosName) {
      ys.push_back(kBosLabel);
    } else {
      int id = labels.id(part);
      if (id < 0) throw Error("unknown label '" + part + "' in context");
      ys.push_back(id);
    }
    if (bar == std::string::npos) break;
    pos = bar + 1;
  }
  if (static_cast<int>(ys.size()) != k)
    throw Error("context '" + s + "' does not have " + std::to_string(k) + " labels");
  return ctx_encode(ys.data(), k, labels.size());
}

std::vector<uint64_t> enumerate_contexts(int k, int n_labels) {
  std::vector<uint64_t> out;
  std::vector<int> ys(static_cast<size_t>(k));
  // pad = number of leading begin labels; the rest take every real value
  for (int pad = 0; pad < k; ++pad) {
    for (int i = 0; i < pad; ++i) ys[static_cast<size_t>(i)] = kBosLabel;
    int real = k - pad;
    std::vector<int> digits(static_cast<size_t>(real), 0);
    while (true) {
      for (int i = 0; i < real; ++i) ys[static_cast<size_t>(pad + i)] = digits[static_cast<size_t>(i)];
      out.push_back(ctx_encode(ys.data(), k, n_labels));
      int j = real - 1;
      while (j >= 0 && digits[static_cast<size_t>(j)] == n_labels - 1) {
        digits[static_cast<size_t>(j)] = 0;
        --j;
      }
      if (j < 0) break;
      ++digits[static_cast<size_t>(j)];
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int ctx_padding(uint64_t ctx, int k, int n_labels) {
  std::vector<int> ys(static_cast<size_t>(k));
  ctx_decode(ctx, k, n_labels, ys.data());
  int pad = 0;
  while (pad < k && ys[static_cast<size_t>(pad)] == kBosLabel) ++pad;
  return pad;
}

// --- FeatureIndex -------------------------------------------------------------

void FeatureIndex::init(int n_labels, int order, int dense_width) {
  if (n_labels < 1) throw Error("feature index needs at least one label");
  if (order < 1) throw Error("order must be >= 1");
  if (dense_width < 0) throw Error("dense width must be >= 0");
  double ctx_space = std::pow(static_cast<double>(n_labels) + 1, order);
  if (ctx_space >= static_cast<double>(1 << 24))
    throw Error("label alphabet too large for order " + std::to_string(order));
  n_labels_ = n_labels;
  order_ = order;
  dense_width_ = dense_width;
  preds_.clear(); pred_ids_.clear();
  rels_.clear(); rel_ids_.clear();
  state_.clear(); trans_.clear(); seglen_.clear();
  defs_.clear();
}

int FeatureIndex::intern_predicate(const std::string& pred) {
  auto it = pred_ids_.find(pred);
  if (it != pred_ids_.end()) return it->second;
  int id = static_cast<int>(preds_.size());
  preds_.push_back(pred);
  pred_ids_.emplace(pred, id);
  return id;
}

int FeatureIndex::intern_relation(const std::string& rel) {
  auto it = rel_ids_.find(rel);
  if (it != rel_ids_.end()) return it->second;
  int id = static_cast<int>(rels_.size());
  if (id >= (1 << 16)) throw Error("too many distinct relations");
  rels_.push_back(rel);
  rel_ids_.emplace(rel, id);
  return id;
}

int FeatureIndex::state_feature(int pred_id, uint64_t ctx) const {
  if (pred_id < 0) return -1;
  auto it = state_.find(state_key(pred_id, ctx));
  return it == state_.end() ? -1 : it->second;
}

int FeatureIndex::transition_feature(int rel_id, uint64_t from, uint64_t to) const {
  if (rel_id < 0) return -1;
  auto it = trans_.find(trans_key(rel_id, from, to));
  return it == trans_.end() ? -1 : it->second;
}

int FeatureIndex::seg_length_feature(int length, int label) const {
  auto it = seglen_.find(seglen_key(length, label));
  return it == seglen_.end() ? -1 : it->second;
}

int FeatureIndex::predicate_id(const std::string& pred) const {
  auto it = pred_ids_.find(pred);
  return it == pred_ids_.end() ? -1 : it->second;
}

int FeatureIndex::relation_id(const std::string& rel) const {
  auto it = rel_ids_.find(rel);
  return it == rel_ids_.end() ? -1 : it->second;
}

int FeatureIndex::add_state(const std::string& pred, uint64_t ctx) {
  int pid = intern_predicate(pred);
  int idx = n_features();
  if (!state_.emplace(state_key(pid, ctx), idx).second)
    throw Error("duplicate state feature");
  defs_.push_back({Def::Kind::State, pid, ctx, 0});
  return idx;
}

int FeatureIndex::add_transition(const std::string& rel, uint64_t from, uint64_t to) {
  int rid = intern_relation(rel);
  int idx = n_features();
  if (!trans_.emplace(trans_key(rid, from, to), idx).second)
    throw Error("duplicate transition feature");
  defs_.push_back({Def::Kind::Transition, rid, from, to});
  return idx;
}

int FeatureIndex::add_seg_length(int length, int label) {
  int idx = n_features();
  if (!seglen_.emplace(seglen_key(length, label), idx).second)
    throw Error("duplicate segment-length feature");
  defs_.push_back({Def::Kind::SegLength, length, static_cast<uint64_t>(label + 1), 0});
  return idx;
}

std::pair<std::string, std::string> FeatureIndex::render(const Def& d,
                                                         const LabelAlphabet& labels) const {
  switch (d.kind) {
    case Def::Kind::State:
      return {"s:" + predicate(d.a), ctx_to_string(d.from, order_, labels)};
    case Def::Kind::Transition: {
      const std::string& rel = relation(d.a);
      return {rel.empty() ? "t" : "t:" + rel,
              ctx_to_string(d.from, order_, labels) + ">" + ctx_to_string(d.to, order_, labels)};
    }
    case Def::Kind::SegLength:
      return {"g:" + std::to_string(d.a),
              labels.name(static_cast<int>(d.from) - 1)};
  }
  throw Error("unreachable");
}

// --- builders ----------------------------------------------------------------

namespace {

struct Pending {
  std::string key, ctx;
  FeatureIndex::Def def;
};

FeatureIndex finish(int n_labels, int order, int dense_width,
                    std::vector<Pending> pending) {
  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.key != b.key ? a.key < b.key : a.ctx < b.ctx;
  });
  FeatureIndex idx;
  idx.init(n_labels, order, dense_width);
  for (const auto& p : pending) {
    switch (p.def.kind) {
      case FeatureIndex::Def::Kind::State:
        idx.add_state(p.key.substr(2), p.def.from);
        break;
      case FeatureIndex::Def::Kind::Transition:
        idx.add_transition(p.key.size() > 1 ? p.key.substr(2) : "", p.def.from, p.def.to);
        break;
      case FeatureIndex::Def::Kind::SegLength:
        idx.add_seg_length(p.def.a, static_cast<int>(p.def.from) - 1);
        break;
    }
  }
  return idx;
}

void check_common(size_t corpus_size, const LabelAlphabet& labels, int min_count) {
  if (corpus_size == 0) throw Error("empty corpus");
  if (labels.size() == 0) throw Error("empty label alphabet");
  if (min_count < 1) throw Error("min_count must be >= 1");
}

// Reject oversized label/order combinations before enumerating contexts;
// FeatureIndex::init repeats the check but by then it would be too late.
void check_ctx_capacity(int n_labels, int order) {
  double ctx_space = std::pow(static_cast<double>(n_labels) + 1, order);
  if (ctx_space >= static_cast<double>(1 << 24))
    throw Error("label alphabet too large for order " + std::to_string(order));
}

std::string ctx_str(uint64_t ctx, int order, const LabelAlphabet& labels) {
  return ctx_to_string(ctx, order, labels);
}

}  // namespace

FeatureIndex build_feature_index(const std::vector<ChainInstance>& corpus,
                                 const LabelAlphabet& labels,
                                 const FeatureTemplates& tmpl, int min_count,
                                 int order) {
  check_common(corpus.size(), labels, min_count);
  if (order < 1) throw Error("order must be >= 1");
  check_ctx_capacity(labels.size(), order);
  const int ny = labels.size();

  std::unordered_map<std::string, long> pred_count;
  long n_boundaries = 0;
  long n_instances = static_cast<long>(corpus.size());
  for (const auto& inst : corpus) {
    n_boundaries += std::max(0, inst.size() - 1);
    for (const auto& pos : inst.obs)
      for (const auto& p : pos) ++pred_count[p];
  }

  std::vector<uint64_t> ctxs = enumerate_contexts(order, ny);
  std::vector<Pending> pending;

  if (tmpl.state) {
    for (const auto& [pred, cnt] : pred_count) {
      if (cnt < min_count) continue;
      for (uint64_t c : ctxs)
        pending.push_back({"s:" + pred, ctx_str(c, order, labels),
                           {FeatureIndex::Def::Kind::State, 0, c, 0}});
    }
  }
  if (tmpl.transition && n_boundaries >= min_count) {
    for (uint64_t u : ctxs)
      for (int y = 0; y < ny; ++y) {
        uint64_t v = ctx_shift(u, order, ny, y);
        pending.push_back({"t", ctx_str(u, order, labels) + ">" + ctx_str(v, order, labels),
                           {FeatureIndex::Def::Kind::Transition, 0, u, v}});
      }
  }
  if (tmpl.bos && n_instances >= min_count) {
    for (int y = 0; y < ny; ++y) {
      uint64_t v = ctx_shift(0, order, ny, y);
      pending.push_back({"t", ctx_str(0, order, labels) + ">" + ctx_str(v, order, labels),
                         {FeatureIndex::Def::Kind::Transition, 0, 0, v}});
    }
  }
  return finish(ny, order, 0, std::move(pending));
}

FeatureIndex build_segment_feature_index(const std::vector<ChainInstance>& corpus,
                                         const LabelAlphabet& labels,
                                         const FeatureTemplates& tmpl,
                                         int min_count, int max_seg_len) {
  check_common(corpus.size(), labels, min_count);
  if (max_seg_len < 1) throw Error("max segment length must be >= 1");
  const int ny = labels.size();

  std::unordered_map<std::string, long> pred_count;
  long n_boundaries = 0;
  long n_instances = static_cast<long>(corpus.size());
  for (const auto& inst : corpus) {
    n_boundaries += std::max(0, inst.size() - 1);
    for (const auto& pos : inst.obs)
      for (const auto& p : pos) ++pred_count[p];
  }

  std::vector<Pending> pending;
  if (tmpl.state) {
    for (const auto& [pred, cnt] : pred_count) {
      if (cnt < min_count) continue;
      for (int y = 0; y < ny; ++y)
        pending.push_back({"s:" + pred, labels.name(y),
                           {FeatureIndex::Def::Kind::State, 0, static_cast<uint64_t>(y + 1), 0}});
    }
  }
  if (tmpl.transition && n_boundaries >= min_count) {
    // adjacent segments always differ in label, so same-label pairs are omitted
    for (int a = 0; a < ny; ++a)
      for (int b = 0; b < ny; ++b) {
        if (a == b) continue;
        pending.push_back({"t", labels.name(a) + ">" + labels.name(b),
                           {FeatureIndex::Def::Kind::Transition, 0,
                            static_cast<uint64_t>(a + 1), static_cast<uint64_t>(b + 1)}});
      }
  }
  if (tmpl.bos && n_instances >= min_count) {
    for (int y = 0; y < ny; ++y)
      pending.push_back({"t", kBosName + ">" + labels.name(y),
                         {FeatureIndex::Def::Kind::Transition, 0, 0,
                          static_cast<uint64_t>(y + 1)}});
  }
  if (tmpl.seg_length) {
    for (int len = 1; len <= max_seg_len; ++len) {
      long possible = 0;
      for (const auto& inst : corpus) possible += std::max(0, inst.size() - len + 1);
      if (possible < min_count) continue;
      for (int y = 0; y < ny; ++y)
        pending.push_back({"g:" + std::to_string(len), labels.name(y),
                           {FeatureIndex::Def::Kind::SegLength, len,
                            static_cast<uint64_t>(y + 1), 0}});
    }
  }
  return finish(ny, 1, 0, std::move(pending));
}

FeatureIndex build_feature_index(const std::vector<TreeInstance>& corpus,
                                 const LabelAlphabet& labels,
                                 const FeatureTemplates& tmpl, int min_count) {
  check_common(corpus.size(), labels, min_count);
  const int ny = labels.size();

  int dense_width = corpus.front().dense_width();
  std::unordered_map<std::string, long> pred_count, rel_count;
  for (const auto& inst : corpus) {
    if (inst.dense_width() != dense_width)
      throw Error("dense feature width differs between instances");
    for (int v = 0; v < inst.size(); ++v) {
      const TreeNode& nd = inst.node(v);
      for (const auto& p : nd.obs) ++pred_count[p];
      if (nd.parent != -1) ++rel_count[nd.relation];
    }
  }

  std::vector<Pending> pending;
  if (tmpl.state) {
    for (const auto& [pred, cnt] : pred_count) {
      if (cnt < min_count) continue;
      for (int y = 0; y < ny; ++y)
        pending.push_back({"s:" + pred, labels.name(y),
                           {FeatureIndex::Def::Kind::State, 0, static_cast<uint64_t>(y + 1), 0}});
    }
  }
  if (tmpl.transition) {
    for (const auto& [rel, cnt] : rel_count) {
      if (cnt < min_count) continue;
      // context column reads parent>child
      for (int p = 0; p < ny; ++p)
        for (int c = 0; c < ny; ++c)
          pending.push_back({rel.empty() ? "t" : "t:" + rel,
                             labels.name(p) + ">" + labels.name(c),
                             {FeatureIndex::Def::Kind::Transition, 0,
                              static_cast<uint64_t>(p + 1), static_cast<uint64_t>(c + 1)}});
    }
  }
  return finish(ny, 1, dense_width, std::move(pending));
}

}  // namespace crftk
