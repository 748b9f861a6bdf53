#pragma once

#include <string>
#include <vector>

#include "crftk/eval.hpp"
#include "crftk/types.hpp"

namespace crftk {

// Token files: one `token<TAB>feat1 feat2 ...<TAB>label` line per token,
// blank line between instances.  The label column may be left off on data
// meant for tagging.  Original lines are kept so taggers can echo them.
struct ChainCorpus {
  std::vector<ChainInstance> instances;
  std::vector<std::vector<std::string>> raw;  // per instance, per token
  LabelAlphabet labels;                       // in order of first appearance
};

ChainCorpus read_chain_corpus(const std::string& path, bool require_labels);

// Tree files: one `id<TAB>parent-or-0<TAB>relation<TAB>features<TAB>label`
// line per node, ids 1..n, parent 0 on the root, blank line between trees.
// The feature column is |-separated; a `dense:v1,v2,...` field carries the
// dense vector, every other field is a sparse predicate.  `_` hides a label.
struct TreeCorpus {
  std::vector<TreeInstance> instances;
  std::vector<std::vector<std::string>> raw;  // per tree, per node
  LabelAlphabet labels;
};

TreeCorpus read_tree_corpus(const std::string& path);

// Agreement files: one `start end` token-index pair per line, inclusive.
std::vector<Span> read_span_file(const std::string& path);

}  // namespace crftk
