#include "ibart/tree.hpp"

#include <algorithm>
#include <stdexcept>

namespace ibart {

int DecisionTree::max_depth() const {
  int d = 0;
  for (const auto& nd : nodes_) d = std::max(d, nd.depth);
  return d;
}

int DecisionTree::leaf_node_for(const double* x) const {
  int i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& r = nodes_[i].rule;
    i = (x[r.var] <= r.cut) ? nodes_[i].left : nodes_[i].right;
  }
  return i;
}

int DecisionTree::leaf_node_for(const Matrix& X, int row) const {
  return leaf_node_for(X.row_ptr(row));
}

int DecisionTree::leaf_node_for_override(const Matrix& X, int row, int var, double value) const {
  int i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& r = nodes_[i].rule;
    const double v = (r.var == var) ? value : X(row, r.var);
    i = (v <= r.cut) ? nodes_[i].left : nodes_[i].right;
  }
  return i;
}

void DecisionTree::grow(int at, const DecisionRule& rule) {
  if (!nodes_[at].is_leaf()) throw std::logic_error("grow: target is not a leaf");
  const int l = size(), r = size() + 1;
  TreeNode child;
  child.parent = at;
  child.depth = nodes_[at].depth + 1;
  nodes_.push_back(child);
  nodes_.push_back(child);
  nodes_[at].left = l;
  nodes_[at].right = r;
  nodes_[at].rule = rule;
  nodes_[at].leaf = -1;
  renumber_leaves();
}

void DecisionTree::prune(int at) {
  const TreeNode& nd = nodes_[at];
  if (nd.is_leaf()) throw std::logic_error("prune: target is a leaf");
  if (!nodes_[nd.left].is_leaf() || !nodes_[nd.right].is_leaf())
    throw std::logic_error("prune: children are not both leaves");
  // rebuild without the two children, preserving pre-order of everything else
  std::vector<TreeNode> rebuilt;
  std::vector<int> remap(nodes_.size(), -1);
  for (int i = 0; i < size(); ++i) {
    if (i == nd.left || i == nd.right) continue;
    remap[i] = static_cast<int>(rebuilt.size());
    rebuilt.push_back(nodes_[i]);
  }
  for (auto& n : rebuilt) {
    if (n.left >= 0) n.left = remap[n.left];
    if (n.right >= 0) n.right = remap[n.right];
    if (n.parent >= 0) n.parent = remap[n.parent];
  }
  const int at2 = remap[at];
  rebuilt[at2].left = rebuilt[at2].right = -1;
  rebuilt[at2].rule = DecisionRule{};
  nodes_ = std::move(rebuilt);
  renumber_leaves();
}

std::vector<int> DecisionTree::leaf_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

std::vector<int> DecisionTree::internal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

std::vector<int> DecisionTree::prunable_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const auto& nd = nodes_[i];
    if (!nd.is_leaf() && nodes_[nd.left].is_leaf() && nodes_[nd.right].is_leaf()) out.push_back(i);
  }
  return out;
}

std::vector<int> DecisionTree::swappable_parents() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const auto& nd = nodes_[i];
    if (nd.is_leaf()) continue;
    if (!nodes_[nd.left].is_leaf() || !nodes_[nd.right].is_leaf()) out.push_back(i);
  }
  return out;
}

bool DecisionTree::uses_variable(int var) const {
  for (const auto& nd : nodes_)
    if (!nd.is_leaf() && nd.rule.var == var) return true;
  return false;
}

void DecisionTree::count_splits(std::vector<int>& counts) const {
  for (const auto& nd : nodes_)
    if (!nd.is_leaf()) ++counts[nd.rule.var];
}

void DecisionTree::renumber_leaves() {
  // pre-order walk assigning contiguous leaf slots
  int next = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (nodes_[i].is_leaf()) {
      nodes_[i].leaf = next++;
    } else {
      nodes_[i].leaf = -1;
      stack.push_back(nodes_[i].right);
      stack.push_back(nodes_[i].left);
    }
  }
}

void DecisionTree::check_structure() const {
  if (nodes_.empty()) throw std::logic_error("tree: empty");
  std::vector<int> seen_leaf(leaf_count(), 0);
  int leaves = 0, internals = 0;
  for (int i = 0; i < size(); ++i) {
    const auto& nd = nodes_[i];
    if (nd.is_leaf()) {
      if (nd.right >= 0) throw std::logic_error("tree: half-split node");
      if (nd.leaf < 0 || nd.leaf >= leaf_count()) throw std::logic_error("tree: bad leaf slot");
      if (seen_leaf[nd.leaf]++) throw std::logic_error("tree: duplicate leaf slot");
      ++leaves;
    } else {
      if (nd.right < 0 || nd.left < 0) throw std::logic_error("tree: half-split node");
      if (nodes_[nd.left].parent != i || nodes_[nd.right].parent != i)
        throw std::logic_error("tree: parent link broken");
      if (nodes_[nd.left].depth != nd.depth + 1 || nodes_[nd.right].depth != nd.depth + 1)
        throw std::logic_error("tree: depth bookkeeping broken");
      ++internals;
    }
  }
  if (leaves != internals + 1) throw std::logic_error("tree: leaf/internal count mismatch");
  if (nodes_[0].parent != -1 || nodes_[0].depth != 0) throw std::logic_error("tree: bad root");
}

}  // namespace ibart
