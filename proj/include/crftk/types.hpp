#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace crftk {

// Every toolkit failure surfaces as Error; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Virtual begin-of-sequence label.  It never enters the alphabet; it only
// appears inside label contexts (and their serialized form).
inline constexpr int kBosLabel = -1;
inline const std::string kBosName = "__BOS__";

class LabelAlphabet {
 public:
  LabelAlphabet() = default;
  explicit LabelAlphabet(const std::vector<std::string>& names) {
    for (const auto& n : names) add(n);
  }

  // Idempotent; returns the label's id.
  int add(const std::string& name) {
    if (name.empty() || name == kBosName)
      throw Error("invalid label name '" + name + "'");
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    return id;
  }

  // -1 when the label is unknown.
  int id(const std::string& name) const {
    auto it = ids_.find(name);
    return it == ids_.end() ? -1 : it->second;
  }

  const std::string& name(int id) const { return names_.at(static_cast<size_t>(id)); }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

// A token sequence: per-position predicate strings, plus an optional gold
// labeling (one label id per position).
struct ChainInstance {
  std::vector<std::vector<std::string>> obs;
  std::vector<int> gold;  // empty when unlabeled

  ChainInstance() = default;
  explicit ChainInstance(std::vector<std::vector<std::string>> o,
                         std::vector<int> g = {})
      : obs(std::move(o)), gold(std::move(g)) {
    if (!gold.empty() && gold.size() != obs.size())
      throw Error("gold labeling length does not match token count");
  }

  int size() const { return static_cast<int>(obs.size()); }
  bool labeled() const { return !gold.empty(); }
};

struct TreeNode {
  int parent = -1;           // -1 marks the root
  std::string relation;      // tag of the edge to the parent; unused on the root
  std::vector<std::string> obs;
  std::vector<double> dense;  // optional; same width on every node of a corpus
  int label = -1;             // observed label id, or -1 when hidden
};

// A rooted tree over nodes 0..n-1.  Construction validates the structure so
// inference can assume a single root, no cycles and a uniform dense width.
class TreeInstance {
 public:
  explicit TreeInstance(std::vector<TreeNode> nodes);

  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int v) const { return nodes_[static_cast<size_t>(v)]; }
  int root() const { return root_; }
  int dense_width() const { return dense_width_; }
  // Children listed before their parent; the root comes last.
  const std::vector<int>& topo_order() const { return topo_; }
  const std::vector<std::vector<int>>& children() const { return children_; }
  // Replaces the observed label of one node (used to build training variants).
  void set_label(int v, int label) { nodes_.at(static_cast<size_t>(v)).label = label; }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<int>> children_;
  std::vector<int> topo_;
  int root_ = -1;
  int dense_width_ = 0;
};

}  // namespace crftk
