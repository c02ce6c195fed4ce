#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ibart/hyperparams.hpp"
#include "ibart/model_state.hpp"

namespace ibart {

/// One retained draw: scalar parameters, split bookkeeping, the in-sample
/// fit, and (optionally) the full ensemble for out-of-sample work.
struct TraceDraw {
  int iter = 0;  // 1-based sweep index, counted after burn-in
  double sigma2 = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  int k_n = 0;
  std::vector<int> split_counts;    // per covariate, pooled over active trees
  int total_splits = 0;
  std::vector<double> z_per_tree;   // per covariate, averaged over splitting trees
  std::vector<double> fitted;       // standardized scale, length n
  std::optional<ModelState> ensemble;
};

/// Posterior sample produced by one chain, plus the metadata downstream
/// estimators need (response scaling, covariate names, fitting mode).
struct TraceStore {
  Mode mode = Mode::infinite;
  int n = 0;
  int p = 0;
  double y_shift = 0.0;
  double y_scale = 1.0;
  double sigma_mu2 = 0.0;
  std::vector<std::string> column_names;
  std::vector<TraceDraw> draws;

  int size() const { return static_cast<int>(draws.size()); }
  bool has_ensembles() const { return !draws.empty() && draws.front().ensemble.has_value(); }

  /// Pooled split proportions for draw l: counts / total, zero when no splits.
  std::vector<double> split_fractions(int l) const;
};

}  // namespace ibart
