#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "crftk/types.hpp"

namespace crftk {

// Which feature families an index generates from a corpus.
struct FeatureTemplates {
  bool state = true;        // (predicate, label context)
  bool transition = true;   // (label context, label context), or (relation, parent, child)
  bool bos = false;         // transitions out of the virtual begin context
  bool seg_length = false;  // semi-Markov only: one indicator per segment length
};

// --- label-context encoding -------------------------------------------------
//
// A context is the tuple of the K most recent labels, oldest first.  It is
// encoded as a base-(|Y|+1) number whose digits are label+1; digit 0 encodes
// the virtual begin label.  At order 1 a context is simply label+1, and 0 is
// the begin context.

uint64_t ctx_encode(const int* labels, int k, int n_labels);
void ctx_decode(uint64_t ctx, int k, int n_labels, int* labels_out);
// Drops the oldest label and appends next_label (a real label id).
uint64_t ctx_shift(uint64_t ctx, int k, int n_labels, int next_label);
// Newest label of the context; kBosLabel for the begin context.
int ctx_last(uint64_t ctx, int n_labels);
std::string ctx_to_string(uint64_t ctx, int k, const LabelAlphabet& labels);
uint64_t ctx_from_string(const std::string& s, int k, const LabelAlphabet& labels);

// Every context that can label a chain position at order k: zero or more
// leading begin paddings followed by real labels only.  Sorted ascending.
// (The all-begin context, which only precedes position 0, is not included.)
std::vector<uint64_t> enumerate_contexts(int k, int n_labels);
// Number of leading begin paddings in a context.
int ctx_padding(uint64_t ctx, int k, int n_labels);

// --- the index ---------------------------------------------------------------
//
// Maps typed features to dense parameter positions.  Dense node features (used
// by tree models) occupy a reserved leading block of n_labels * dense_width
// parameters; registered sparse features follow.

class FeatureIndex {
 public:
  struct Def {
    enum class Kind { State, Transition, SegLength };
    Kind kind;
    int a = 0;          // predicate id / relation id / segment length
    uint64_t from = 0;  // state & seg-length: the context; transition: source
    uint64_t to = 0;    // transition target
  };

  void init(int n_labels, int order, int dense_width);

  // Scoring lookups; -1 when the feature is not registered.
  int state_feature(int pred_id, uint64_t ctx) const;
  int transition_feature(int rel_id, uint64_t from, uint64_t to) const;
  int seg_length_feature(int length, int label) const;
  int dense_feature(int label, int j) const { return label * dense_width_ + j; }

  // -1 when unseen.
  int predicate_id(const std::string& pred) const;
  int relation_id(const std::string& rel) const;

  // Registration (used by the index builders and by model loading). Each call
  // appends one feature; duplicates are an error.
  int add_state(const std::string& pred, uint64_t ctx);
  int add_transition(const std::string& rel, uint64_t from, uint64_t to);
  int add_seg_length(int length, int label);

  int n_features() const { return dense_block() + static_cast<int>(defs_.size()); }
  int n_labels() const { return n_labels_; }
  int order() const { return order_; }
  int dense_width() const { return dense_width_; }
  int dense_block() const { return n_labels_ * dense_width_; }
  int n_sparse() const { return static_cast<int>(defs_.size()); }
  const Def& def(int sparse_pos) const { return defs_.at(static_cast<size_t>(sparse_pos)); }
  const std::string& predicate(int id) const { return preds_.at(static_cast<size_t>(id)); }
  const std::string& relation(int id) const { return rels_.at(static_cast<size_t>(id)); }

  // Serialized columns of one feature definition: {key, label-context}.
  std::pair<std::string, std::string> render(const Def& d, const LabelAlphabet& labels) const;

 private:
  int intern_predicate(const std::string& pred);
  int intern_relation(const std::string& rel);
  static uint64_t state_key(int pred_id, uint64_t ctx) {
    return (static_cast<uint64_t>(pred_id) << 24) | ctx;
  }
  static uint64_t trans_key(int rel_id, uint64_t from, uint64_t to) {
    return (static_cast<uint64_t>(rel_id) << 48) | (from << 24) | to;
  }
  static uint64_t seglen_key(int length, int label) {
    return (static_cast<uint64_t>(length) << 24) | static_cast<uint64_t>(label + 1);
  }

  int n_labels_ = 0, order_ = 1, dense_width_ = 0;
  std::vector<std::string> preds_;
  std::unordered_map<std::string, int> pred_ids_;
  std::vector<std::string> rels_;
  std::unordered_map<std::string, int> rel_ids_;
  std::unordered_map<uint64_t, int> state_, trans_, seglen_;
  std::vector<Def> defs_;
};

// --- corpus-driven construction ----------------------------------------------
//
// Counting rule: a predicate whose corpus occurrence count reaches min_count
// registers a state feature for every context valid at some position.
// Transition features are structural: every valid context pair registers once
// the corpus holds at least min_count boundaries (begin transitions count
// instances instead).  Indices are assigned in lexicographic order of the
// serialized (key, label-context) columns, so equal corpora produce equal
// indices regardless of iteration order.

FeatureIndex build_feature_index(const std::vector<ChainInstance>& corpus,
                                 const LabelAlphabet& labels,
                                 const FeatureTemplates& tmpl, int min_count,
                                 int order);

// Semi-Markov flavour: order 1, same-label transitions excluded, optional
// segment-length indicators for lengths 1..max_seg_len.
FeatureIndex build_segment_feature_index(const std::vector<ChainInstance>& corpus,
                                         const LabelAlphabet& labels,
                                         const FeatureTemplates& tmpl,
                                         int min_count, int max_seg_len);

// Tree flavour: state features per node predicate, transition features keyed
// by (relation, parent label, child label), dense width taken from the corpus.
FeatureIndex build_feature_index(const std::vector<TreeInstance>& corpus,
                                 const LabelAlphabet& labels,
                                 const FeatureTemplates& tmpl, int min_count);

}  // namespace crftk
