#pragma once

#include <vector>

#include "ibart/matrix.hpp"

namespace ibart {

/// A split rule: the pair (observation, variable). The cut value is the
/// observed X(obs, var), cached at rule creation. Points with
/// x[var] <= cut go left, the rest go right.
struct DecisionRule {
  int obs = -1;
  int var = -1;
  double cut = 0.0;
};

struct TreeNode {
  int left = -1;    // node index, -1 for a leaf
  int right = -1;
  int parent = -1;  // -1 at the root
  int depth = 0;
  DecisionRule rule;  // meaningful on internal nodes only
  int leaf = -1;      // slot into the leaf-parameter vector, -1 on internal nodes

  bool is_leaf() const { return left < 0; }
};

/// Leaf values in standardized response units, indexed by TreeNode::leaf.
using LeafParams = std::vector<double>;

/// Binary rooted tree of decision rules. Node 0 is always the root. Leaf
/// slots are kept contiguous in pre-order; structural edits renumber them.
class DecisionTree {
 public:
  DecisionTree() { nodes_.push_back(TreeNode{}); nodes_[0].leaf = 0; }

  int size() const { return static_cast<int>(nodes_.size()); }
  int leaf_count() const { return (size() + 1) / 2; }
  int internal_count() const { return size() / 2; }
  int max_depth() const;

  const TreeNode& node(int i) const { return nodes_[i]; }
  TreeNode& node(int i) { return nodes_[i]; }

  /// Node index of the leaf containing x (walks from the root).
  int leaf_node_for(const double* x) const;
  int leaf_node_for(const Matrix& X, int row) const;

  /// Like leaf_node_for, but the value of one covariate is overridden.
  int leaf_node_for_override(const Matrix& X, int row, int var, double value) const;

  double evaluate(const double* x, const LeafParams& mu) const {
    return mu[nodes_[leaf_node_for(x)].leaf];
  }
  double evaluate(const Matrix& X, int row, const LeafParams& mu) const {
    return mu[nodes_[leaf_node_for(X, row)].leaf];
  }

  /// Splits the leaf at node index `at` with `rule`; children become leaves.
  void grow(int at, const DecisionRule& rule);

  /// Collapses the internal node `at` (both children must be leaves) back
  /// into a leaf, removing the two children.
  void prune(int at);

  void set_rule(int at, const DecisionRule& rule) { nodes_[at].rule = rule; }
  void swap_rules(int a, int b) { std::swap(nodes_[a].rule, nodes_[b].rule); }

  std::vector<int> leaf_nodes() const;
  std::vector<int> internal_nodes() const;
  /// Internal nodes whose children are both leaves (candidates for prune).
  std::vector<int> prunable_nodes() const;
  /// Internal nodes with at least one internal child (candidates for swap).
  std::vector<int> swappable_parents() const;

  /// True if any internal node splits on `var`.
  bool uses_variable(int var) const;

  /// Split counts per variable, accumulated into `counts` (length >= p).
  void count_splits(std::vector<int>& counts) const;

  /// Throws std::logic_error on any structural inconsistency.
  void check_structure() const;

 private:
  void renumber_leaves();
  std::vector<TreeNode> nodes_;
};

/// The regression-tree step function: the leaf value of the cell containing x.
inline double tree_regress(const double* x, const DecisionTree& tree, const LeafParams& mu) {
  return tree.evaluate(x, mu);
}

}  // namespace ibart
