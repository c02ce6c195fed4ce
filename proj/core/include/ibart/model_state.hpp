#pragma once

#include <cstdint>
#include <vector>

#include "ibart/ibp.hpp"
#include "ibart/tree.hpp"
#include "ibart/weight_matrix.hpp"

namespace ibart {

/// Full sampler state: one tree and one leaf vector per active column of W,
/// plus the error variance and the activation-prior parameters.
struct ModelState {
  std::vector<DecisionTree> trees;
  std::vector<LeafParams> leaves;
  WeightMatrix w;
  double sigma2 = 1.0;
  IbpParams ibp;

  int active_trees() const { return static_cast<int>(trees.size()); }

  /// Throws std::logic_error if the parallel containers or the parameter
  /// constraints are out of sync.
  void check_invariants() const;
};

/// Weighted ensemble value sum_k w_row[k] * g(x; T_k, mu_k) for one point.
/// w_row must have exactly one entry per active tree.
double ensemble_predict(const double* x, const ModelState& state,
                        const std::vector<std::uint8_t>& w_row);

/// Ensemble value for training row i using the state's own W row.
double ensemble_predict_row(const Matrix& X, int i, const ModelState& state);

}  // namespace ibart
