#include "ibart/tree_moves.hpp"

#include <cmath>
#include <stdexcept>

namespace ibart {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Rows (subset of `rows`) whose routing passes through `target`.
std::vector<int> rows_reaching(const DecisionTree& tree, const Matrix& X,
                               std::span<const int> rows, int target) {
  // chain of (node, go_left) decisions from the root down to target
  static thread_local std::vector<std::pair<int, bool>> path;
  path.clear();
  for (int i = target; tree.node(i).parent >= 0; i = tree.node(i).parent) {
    const int par = tree.node(i).parent;
    path.push_back({par, tree.node(par).left == i});
  }
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) {
    bool reaches = true;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      const auto& rule = tree.node(it->first).rule;
      const bool left = X(r, rule.var) <= rule.cut;
      if (left != it->second) {
        reaches = false;
        break;
      }
    }
    if (reaches) out.push_back(r);
  }
  return out;
}

// Cut values admitting at least min_leaf rows on both sides lie in [lo, hi):
// lo is the min_leaf-th smallest value, hi the min_leaf-th largest.
struct CutBounds {
  double lo = 0.0;
  double hi = 0.0;
  bool valid = false;
};

CutBounds cut_bounds(const Matrix& X, const std::vector<int>& rows, int var, int min_leaf,
                     std::vector<double>& scratch) {
  CutBounds b;
  const int m = static_cast<int>(rows.size());
  if (m < 2 * min_leaf) return b;
  scratch.resize(m);
  for (int i = 0; i < m; ++i) scratch[i] = X(rows[i], var);
  std::nth_element(scratch.begin(), scratch.begin() + (min_leaf - 1), scratch.end());
  b.lo = scratch[min_leaf - 1];
  std::nth_element(scratch.begin(), scratch.begin() + (m - min_leaf), scratch.end());
  b.hi = scratch[m - min_leaf];
  b.valid = b.lo < b.hi;
  return b;
}

// Uniform draw from the variables with an admissible cut: rejection first
// (on continuous data nearly every variable qualifies), full scan as the
// fallback. Returns the variable and its bounds, or var = -1 if none.
struct VarDraw {
  int var = -1;
  CutBounds bounds;
};

VarDraw draw_splittable_var(const Matrix& X, const std::vector<int>& rows, int min_leaf,
                            std::vector<double>& scratch, Rng& rng) {
  VarDraw out;
  const int p = X.cols();
  for (int attempt = 0; attempt < 2 * p; ++attempt) {
    const int var = rng.uniform_int(p);
    const CutBounds b = cut_bounds(X, rows, var, min_leaf, scratch);
    if (b.valid) {
      out.var = var;
      out.bounds = b;
      return out;
    }
  }
  std::vector<int> valid;
  for (int j = 0; j < p; ++j)
    if (cut_bounds(X, rows, j, min_leaf, scratch).valid) valid.push_back(j);
  if (valid.empty()) return out;
  out.var = valid[rng.uniform_int(static_cast<int>(valid.size()))];
  out.bounds = cut_bounds(X, rows, out.var, min_leaf, scratch);
  return out;
}

// Uniform draw among observations whose value is an admissible cut.
int draw_splittable_obs(const Matrix& X, const std::vector<int>& rows, int var, const CutBounds& b,
                        Rng& rng) {
  int count = 0;
  for (int r : rows) {
    const double v = X(r, var);
    if (v >= b.lo && v < b.hi) ++count;
  }
  if (count == 0) return -1;
  int pick = rng.uniform_int(count);
  for (int r : rows) {
    const double v = X(r, var);
    if (v >= b.lo && v < b.hi && pick-- == 0) return r;
  }
  return -1;
}

bool obs_is_admissible(const Matrix& X, const std::vector<int>& rows, const DecisionRule& rule,
                       const CutBounds& b) {
  if (!b.valid) return false;
  const double v = X(rule.obs, rule.var);
  if (!(v >= b.lo && v < b.hi)) return false;
  for (int r : rows)
    if (r == rule.obs) return true;
  return false;
}

// Every leaf in the subtree rooted at `top` must catch at least min_leaf of
// the rows that reach `top`. Leaves outside the subtree are not revisited.
bool subtree_occupied(const DecisionTree& tree, const Matrix& X, const std::vector<int>& at,
                      int top, int min_leaf) {
  std::vector<int> counts(tree.size(), 0);
  for (int r : at) {
    int node = top;
    while (!tree.node(node).is_leaf()) {
      const auto& rule = tree.node(node).rule;
      node = X(r, rule.var) <= rule.cut ? tree.node(node).left : tree.node(node).right;
    }
    ++counts[node];
  }
  std::vector<int> stack{top};
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    if (tree.node(node).is_leaf()) {
      if (counts[node] < min_leaf) return false;
    } else {
      stack.push_back(tree.node(node).left);
      stack.push_back(tree.node(node).right);
    }
  }
  return true;
}

double log_kind_prob(const DecisionTree& tree, const MoveProbs& probs, MoveKind kind) {
  return std::log(move_kind_probs(tree, probs)[static_cast<int>(kind)]);
}

}  // namespace

std::array<double, 4> move_kind_probs(const DecisionTree& tree, const MoveProbs& probs) {
  std::array<double, 4> p{probs.grow, probs.prune, probs.change, probs.swap};
  const bool has_internal = tree.internal_count() > 0;
  const bool has_swap_pair = !tree.swappable_parents().empty();
  if (!has_internal) {
    p[0] += p[1] + p[2];
    p[1] = p[2] = 0.0;
  }
  if (!has_swap_pair) {
    p[0] += p[3];
    p[3] = 0.0;
  }
  return p;
}

MoveKind draw_move_kind(const DecisionTree& tree, const MoveProbs& probs, Rng& rng) {
  const auto p = move_kind_probs(tree, probs);
  const double total = p[0] + p[1] + p[2] + p[3];
  double u = rng.uniform() * total;
  for (int k = 0; k < 3; ++k) {
    if (u < p[k]) return static_cast<MoveKind>(k);
    u -= p[k];
  }
  return MoveKind::swap;
}

double tree_log_prior(const DecisionTree& tree, double alpha, double beta) {
  double out = 0.0;
  for (int i = 0; i < tree.size(); ++i) {
    const double p_split = alpha * std::pow(1.0 + tree.node(i).depth, -beta);
    out += tree.node(i).is_leaf() ? std::log1p(-p_split) : std::log(p_split);
  }
  return out;
}

std::vector<LeafStat> leaf_sufficient_stats(const DecisionTree& tree,
                                            std::span<const double> residuals,
                                            std::span<const int> rows, const Matrix& X) {
  if (residuals.size() != rows.size())
    throw std::invalid_argument("leaf_sufficient_stats: residuals/rows length mismatch");
  std::vector<LeafStat> stats(tree.leaf_count());
  for (size_t j = 0; j < rows.size(); ++j) {
    const int slot = tree.node(tree.leaf_node_for(X, rows[j])).leaf;
    auto& st = stats[slot];
    st.n += 1;
    st.s += residuals[j];
    st.q += residuals[j] * residuals[j];
  }
  return stats;
}

double integrated_log_lik(const std::vector<LeafStat>& stats, double sigma2, double sigma_mu2) {
  if (!(sigma2 > 0.0) || !(sigma_mu2 > 0.0))
    throw std::domain_error("integrated_log_lik: variances must be positive");
  double out = 0.0;
  for (const auto& st : stats) {
    if (st.n == 0) continue;
    const double vn = sigma2 + st.n * sigma_mu2;
    out += -0.5 * st.n * (kLog2Pi + std::log(sigma2)) + 0.5 * std::log(sigma2 / vn) -
           st.q / (2.0 * sigma2) + sigma_mu2 * st.s * st.s / (2.0 * sigma2 * vn);
  }
  return out;
}

TreeProposal propose(const DecisionTree& tree, MoveKind kind, const Matrix& X,
                     std::span<const int> rows, const MoveProbs& probs, Rng& rng) {
  TreeProposal prop;
  prop.kind = kind;
  const int min_leaf = probs.min_leaf;
  static thread_local std::vector<double> scratch;

  switch (kind) {
    case MoveKind::grow: {
      const auto leaves = tree.leaf_nodes();
      const int node = leaves[rng.uniform_int(static_cast<int>(leaves.size()))];
      const auto at = rows_reaching(tree, X, rows, node);
      if (static_cast<int>(at.size()) < 2 * min_leaf) return prop;
      const VarDraw vd = draw_splittable_var(X, at, min_leaf, scratch, rng);
      if (vd.var < 0) return prop;
      const int obs = draw_splittable_obs(X, at, vd.var, vd.bounds, rng);

      prop.node = node;
      prop.rule = DecisionRule{obs, vd.var, X(obs, vd.var)};
      prop.candidate = tree;
      prop.candidate.grow(node, prop.rule);

      // the uniform rule draw matches the rule prior at the new node, so
      // the 1/(vars * observations) factor cancels out of the ratio
      prop.forward_logprob = log_kind_prob(tree, probs, MoveKind::grow) -
                             std::log(static_cast<double>(leaves.size()));
      prop.reverse_logprob =
          log_kind_prob(prop.candidate, probs, MoveKind::prune) -
          std::log(static_cast<double>(prop.candidate.prunable_nodes().size()));
      prop.valid = true;
      return prop;
    }

    case MoveKind::prune: {
      const auto prunable = tree.prunable_nodes();
      if (prunable.empty()) return prop;
      const int node = prunable[rng.uniform_int(static_cast<int>(prunable.size()))];
      const DecisionRule old_rule = tree.node(node).rule;

      prop.node = node;
      prop.candidate = tree;
      prop.candidate.prune(node);

      // the exact old rule must be growable back at the collapsed leaf,
      // else the reverse move has probability zero
      const auto at = rows_reaching(tree, X, rows, node);
      if (static_cast<int>(at.size()) < 2 * min_leaf) return prop;
      if (!obs_is_admissible(X, at, old_rule, cut_bounds(X, at, old_rule.var, min_leaf, scratch)))
        return prop;

      prop.forward_logprob = log_kind_prob(tree, probs, MoveKind::prune) -
                             std::log(static_cast<double>(prunable.size()));
      prop.reverse_logprob = log_kind_prob(prop.candidate, probs, MoveKind::grow) -
                             std::log(static_cast<double>(prop.candidate.leaf_count()));
      prop.valid = true;
      return prop;
    }

    case MoveKind::change: {
      const auto internals = tree.internal_nodes();
      if (internals.empty()) return prop;
      const int node = internals[rng.uniform_int(static_cast<int>(internals.size()))];
      const DecisionRule old_rule = tree.node(node).rule;
      const auto at = rows_reaching(tree, X, rows, node);
      if (static_cast<int>(at.size()) < 2 * min_leaf) return prop;
      const VarDraw vd = draw_splittable_var(X, at, min_leaf, scratch, rng);
      if (vd.var < 0) return prop;
      const int obs = draw_splittable_obs(X, at, vd.var, vd.bounds, rng);

      prop.node = node;
      prop.rule = DecisionRule{obs, vd.var, X(obs, vd.var)};
      prop.candidate = tree;
      prop.candidate.set_rule(node, prop.rule);
      if (!subtree_occupied(prop.candidate, X, at, node, min_leaf)) return prop;

      // the old rule must be re-proposable from the same row set, and the
      // rule prior then cancels against the rule draw in both directions
      if (!obs_is_admissible(X, at, old_rule, cut_bounds(X, at, old_rule.var, min_leaf, scratch)))
        return prop;

      const double base = log_kind_prob(tree, probs, MoveKind::change) -
                          std::log(static_cast<double>(internals.size()));
      prop.forward_logprob = base;
      prop.reverse_logprob = base;
      prop.valid = true;
      return prop;
    }

    case MoveKind::swap: {
      const auto parents = tree.swappable_parents();
      if (parents.empty()) return prop;
      const int v = parents[rng.uniform_int(static_cast<int>(parents.size()))];
      std::vector<int> kids;
      if (!tree.node(tree.node(v).left).is_leaf()) kids.push_back(tree.node(v).left);
      if (!tree.node(tree.node(v).right).is_leaf()) kids.push_back(tree.node(v).right);
      const int u = kids[rng.uniform_int(static_cast<int>(kids.size()))];

      prop.node = v;
      prop.node2 = u;
      prop.candidate = tree;
      prop.candidate.swap_rules(v, u);
      const auto at = rows_reaching(tree, X, rows, v);
      if (!subtree_occupied(prop.candidate, X, at, v, min_leaf)) return prop;

      const double lp = log_kind_prob(tree, probs, MoveKind::swap) -
                        std::log(static_cast<double>(parents.size())) -
                        std::log(static_cast<double>(kids.size()));
      prop.forward_logprob = lp;
      prop.reverse_logprob = lp;
      prop.valid = true;
      return prop;
    }
  }
  return prop;
}

MhResult mh_update_tree(DecisionTree& tree, LeafParams& leaves, std::span<const double> residuals,
                        std::span<const int> rows, const Matrix& X, double sigma2,
                        double sigma_mu2, double alpha, double beta, const MoveProbs& probs,
                        Rng& rng) {
  MhResult res;
  res.kind = draw_move_kind(tree, probs, rng);
  TreeProposal prop = propose(tree, res.kind, X, rows, probs, rng);
  res.proposal_valid = prop.valid;
  if (!prop.valid) return res;

  const auto stats_cur = leaf_sufficient_stats(tree, residuals, rows, X);
  const auto stats_prop = leaf_sufficient_stats(prop.candidate, residuals, rows, X);
  const double log_alpha = integrated_log_lik(stats_prop, sigma2, sigma_mu2) -
                           integrated_log_lik(stats_cur, sigma2, sigma_mu2) +
                           tree_log_prior(prop.candidate, alpha, beta) -
                           tree_log_prior(tree, alpha, beta) + prop.reverse_logprob -
                           prop.forward_logprob;
  if (log_alpha >= 0.0 || std::log(rng.uniform()) < log_alpha) {
    tree = std::move(prop.candidate);
    leaves = draw_leaves(tree, stats_prop, sigma2, sigma_mu2, rng);
    res.accepted = true;
  }
  return res;
}

LeafParams draw_leaves(const DecisionTree& tree, const std::vector<LeafStat>& stats, double sigma2,
                       double sigma_mu2, Rng& rng) {
  if (static_cast<int>(stats.size()) != tree.leaf_count())
    throw std::invalid_argument("draw_leaves: stats/tree leaf count mismatch");
  LeafParams mu(stats.size());
  for (size_t l = 0; l < stats.size(); ++l) {
    const double prec = 1.0 / sigma_mu2 + stats[l].n / sigma2;
    const double mean = (stats[l].s / sigma2) / prec;
    mu[l] = rng.normal(mean, std::sqrt(1.0 / prec));
  }
  return mu;
}

}  // namespace ibart
