#pragma once

#include <array>
#include <span>
#include <vector>

#include "ibart/matrix.hpp"
#include "ibart/random.hpp"
#include "ibart/tree.hpp"

namespace ibart {

enum class MoveKind { grow = 0, prune = 1, change = 2, swap = 3 };

/// Move-kind mix plus the minimum child occupancy a proposed rule must give
/// every leaf it touches. Kinds that do not apply to the current tree fold
/// their mass into grow, so the effective distribution is tree-dependent.
struct MoveProbs {
  double grow = 0.25;
  double prune = 0.25;
  double change = 0.40;
  double swap = 0.10;
  int min_leaf = 3;
};

/// Effective kind probabilities for a given tree (inapplicable mass on grow).
std::array<double, 4> move_kind_probs(const DecisionTree& tree, const MoveProbs& probs);

MoveKind draw_move_kind(const DecisionTree& tree, const MoveProbs& probs, Rng& rng);

/// A candidate tree move with the bookkeeping needed for the MH ratio.
/// forward_logprob is log q(T -> T'), reverse_logprob is log q(T' -> T),
/// both including the kind probability of the respective state.
struct TreeProposal {
  MoveKind kind = MoveKind::grow;
  bool valid = false;
  int node = -1;      // grown leaf / pruned node / changed node / swap parent
  int node2 = -1;     // swap child
  DecisionRule rule;  // new rule for grow and change
  DecisionTree candidate;
  double forward_logprob = 0.0;
  double reverse_logprob = 0.0;
};

/// Branching-prior log mass of the tree topology:
/// sum over internal nodes of log[alpha (1+d)^-beta] plus
/// sum over leaves of log[1 - alpha (1+d)^-beta]. Rule choices are not
/// part of this term; they cancel against the proposal.
double tree_log_prior(const DecisionTree& tree, double alpha, double beta);

/// Count, sum and sum of squares of residuals per leaf slot.
struct LeafStat {
  int n = 0;
  double s = 0.0;
  double q = 0.0;
};

/// Residuals are aligned with rows: residuals[j] belongs to rows[j].
std::vector<LeafStat> leaf_sufficient_stats(const DecisionTree& tree,
                                            std::span<const double> residuals,
                                            std::span<const int> rows, const Matrix& X);

/// Log marginal likelihood of the residuals with leaf means integrated out
/// under mu ~ N(0, sigma_mu2). Empty leaves contribute zero.
double integrated_log_lik(const std::vector<LeafStat>& stats, double sigma2, double sigma_mu2);

/// Builds one proposal of the requested kind. Returns valid = false when the
/// kind cannot produce a legal tree here (no growable rule, empty cell, ...).
TreeProposal propose(const DecisionTree& tree, MoveKind kind, const Matrix& X,
                     std::span<const int> rows, const MoveProbs& probs, Rng& rng);

struct MhResult {
  bool accepted = false;
  MoveKind kind = MoveKind::grow;
  bool proposal_valid = false;
};

/// One Metropolis-Hastings update of a single tree against its residuals.
/// On acceptance the tree is replaced and its leaf vector redrawn from the
/// conjugate posterior.
MhResult mh_update_tree(DecisionTree& tree, LeafParams& leaves, std::span<const double> residuals,
                        std::span<const int> rows, const Matrix& X, double sigma2,
                        double sigma_mu2, double alpha, double beta, const MoveProbs& probs,
                        Rng& rng);

/// Independent conjugate normal draw per leaf:
/// mu_l ~ N( (s_l/sigma2) / prec_l, 1 / prec_l ), prec_l = 1/sigma_mu2 + n_l/sigma2.
LeafParams draw_leaves(const DecisionTree& tree, const std::vector<LeafStat>& stats, double sigma2,
                       double sigma_mu2, Rng& rng);

}  // namespace ibart
