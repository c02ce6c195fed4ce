#pragma once

#include <vector>

#include "ibart/dataset.hpp"
#include "ibart/hyperparams.hpp"
#include "ibart/model_state.hpp"
#include "ibart/trace.hpp"
#include "ibart/tree_moves.hpp"

namespace ibart {

struct SamplerConfig {
  HyperParams hp;
  MoveProbs move_probs;
  int k_trunc = 10;           // support cap for the new-tree count draw
  int k_init = 14;            // infinite mode: all-ones starting columns
  int warmup = -1;            // sweeps with W and (gamma, delta, eta) frozen
                              // while the trees burn in; -1 = burn_in / 2
  int alternations = 5;       // default rounds for out-of-sample prediction
  bool record_ensembles = false;
  int ensemble_thin = 1;      // keep every t-th retained draw's ensemble
  bool random_row_order = false;
  bool debug_checks = false;  // full state audit after every sweep
  bool freeze_activation = false;  // set by run_chain during warm-up

  void validate() const {
    hp.validate();
    if (k_trunc < 1) throw std::invalid_argument("k_trunc must be >= 1");
    if (k_init < 1) throw std::invalid_argument("k_init must be >= 1");
    if (alternations < 0) throw std::invalid_argument("alternations must be >= 0");
    if (ensemble_thin < 1) throw std::invalid_argument("ensemble_thin must be >= 1");
    const double t = move_probs.grow + move_probs.prune + move_probs.change + move_probs.swap;
    if (!(move_probs.grow > 0.0) || move_probs.prune < 0.0 || move_probs.change < 0.0 ||
        move_probs.swap < 0.0 || !(t > 0.0))
      throw std::invalid_argument("invalid move probabilities");
    if (move_probs.min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  }
};

/// Per-row fitted values together with each tree's contribution to every row,
/// so residuals and activation odds come out of lookups instead of traversals.
struct FitCache {
  std::vector<double> fitted;                // length n
  std::vector<std::vector<double>> contrib;  // per tree: g(X_i) for all rows i

  /// fitted_i = sum_k W(i,k) contrib[k][i], recomputed from the columns.
  void rebuild_fitted(const WeightMatrix& w);

  /// Recompute contrib[k] for all rows and patch fitted accordingly.
  void refresh_tree(int k, const DecisionTree& tree, const LeafParams& mu, const Matrix& X,
                    const WeightMatrix& w);

  /// Compare against a from-scratch evaluation; throws beyond 1e-9.
  void audit(const ModelState& state, const Matrix& X) const;
};

/// Active rows of tree k and their backfitting residuals
/// r_i = y_i - sum_{k' != k} W(i,k') g(X_i; T_k', mu_k').
struct TreeResiduals {
  std::vector<int> rows;
  std::vector<double> residuals;
};
TreeResiduals residuals_for_tree(int k, const ModelState& state, const FitCache& cache,
                                 const std::vector<double>& y);

/// Gibbs update of row i of W: drop columns owned solely by row i, resample
/// the row's entries over the remaining columns, then draw the number of
/// fresh single-member columns from the truncated birth posterior.
void update_w_row(int i, ModelState& state, FitCache& cache, const std::vector<double>& y,
                  const SamplerConfig& cfg, Rng& rng);

/// sigma^2 | rest ~ InvGamma((nu + n)/2, (nu lambda + SSR)/2).
double update_sigma2(const ModelState& state, const FitCache& cache, const std::vector<double>& y,
                     const HyperParams& hp, Rng& rng);

/// One full sweep: tree and leaf updates for every active column, the W row
/// updates (skipped in classic mode), then the hyperparameter block.
void gibbs_sweep(ModelState& state, FitCache& cache, const Dataset& data,
                 const SamplerConfig& cfg, Rng& rng);

ModelState init_state(const Dataset& data, const SamplerConfig& cfg, Rng& rng);
FitCache init_cache(const ModelState& state, const Matrix& X);

/// Burn-in plus retained sweeps, recording one TraceDraw per retained sweep.
TraceStore run_chain(const Dataset& data, const SamplerConfig& cfg, Rng& rng);

}  // namespace ibart
