#include "crftk/types.hpp"

namespace crftk {

TreeInstance::TreeInstance(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  const int n = static_cast<int>(nodes_.size());
  if (n == 0) throw Error("empty tree");

  children_.assign(static_cast<size_t>(n), {});
  for (int v = 0; v < n; ++v) {
    int p = nodes_[static_cast<size_t>(v)].parent;
    if (p == -1) {
      if (root_ != -1) throw Error("tree has more than one root");
      root_ = v;
    } else if (p < 0 || p >= n || p == v) {
      throw Error("node " + std::to_string(v) + " has invalid parent " + std::to_string(p));
    } else {
      children_[static_cast<size_t>(p)].push_back(v);
    }
  }
  if (root_ == -1) throw Error("tree has no root");

  // Breadth-first walk from the root; reversing it puts children first.
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n));
  order.push_back(root_);
  for (size_t k = 0; k < order.size(); ++k)
    for (int c : children_[static_cast<size_t>(order[k])]) order.push_back(c);
  if (static_cast<int>(order.size()) != n)
    throw Error("tree is not connected (cycle or unreachable node)");
  topo_.assign(order.rbegin(), order.rend());

  dense_width_ = static_cast<int>(nodes_[0].dense.size());
  for (const auto& nd : nodes_)
    if (static_cast<int>(nd.dense.size()) != dense_width_)
      throw Error("dense feature width differs between nodes");
}

}  // namespace crftk
