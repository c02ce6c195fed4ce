#include "ibart/model_state.hpp"

#include <stdexcept>

namespace ibart {

void ModelState::check_invariants() const {
  const size_t k = trees.size();
  if (leaves.size() != k || static_cast<size_t>(w.cols()) != k)
    throw std::logic_error("ModelState: trees/leaves/W column counts diverge");
  for (size_t i = 0; i < k; ++i) {
    trees[i].check_structure();
    if (static_cast<int>(leaves[i].size()) != trees[i].leaf_count())
      throw std::logic_error("ModelState: leaf vector length mismatch");
  }
  w.check_counts();
  if (!(sigma2 > 0.0)) throw std::logic_error("ModelState: sigma2 must be positive");
  ibp.validate();
}

double ensemble_predict(const double* x, const ModelState& state,
                        const std::vector<std::uint8_t>& w_row) {
  if (w_row.size() != state.trees.size())
    throw std::invalid_argument("ensemble_predict: w_row length != active tree count");
  double out = 0.0;
  for (size_t k = 0; k < w_row.size(); ++k) {
    if (w_row[k]) out += state.trees[k].evaluate(x, state.leaves[k]);
  }
  return out;
}

double ensemble_predict_row(const Matrix& X, int i, const ModelState& state) {
  double out = 0.0;
  for (int k = 0; k < state.active_trees(); ++k) {
    if (state.w.get(i, k)) out += state.trees[k].evaluate(X, i, state.leaves[k]);
  }
  return out;
}

}  // namespace ibart
