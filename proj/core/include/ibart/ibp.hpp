#pragma once

#include <functional>
#include <vector>

#include "ibart/hyperparams.hpp"
#include "ibart/random.hpp"
#include "ibart/weight_matrix.hpp"

namespace ibart {

/// The three hyperparameters of the Indian Buffet Process prior on W.
/// gamma drives the number of active columns, eta the fill of each column,
/// and delta + eta the sharing of 1s across columns.
struct IbpParams {
  double gamma = 1.0;
  double delta = 1.0;
  double eta = 0.0;

  IbpParams() = default;
  IbpParams(double g, double d, double e) : gamma(g), delta(d), eta(e) { validate(); }

  void validate() const {
    if (!(gamma > 0.0)) throw std::domain_error("IbpParams: gamma must be positive");
    if (!(eta < 1.0)) throw std::domain_error("IbpParams: eta must be < 1");
    if (!(delta + eta > 0.0)) throw std::domain_error("IbpParams: delta + eta must be positive");
  }
};

/// log of the rising factorial (x)_{n} = x (x+1) ... (x+n-1); zero for n = 0.
/// Requires every factor x + j to be positive.
double rising_factorial_log(double x, int n);

/// P(row takes an already-active column) = (m_k - eta) / (n_prev + delta),
/// where m_k counts the 1s in column k over the n_prev previous rows.
double existing_column_prob(int m_k, int n_prev, const IbpParams& params);

/// Poisson rate of brand-new columns for the row following n_prev rows:
/// gamma G(1+delta) G(n_prev+delta+eta) / (G(n_prev+1+delta) G(delta+eta)).
/// Exactly gamma when n_prev = 0.
double new_column_rate(int n_prev, const IbpParams& params);

/// sum_{i=1}^{n} (eta+delta)_{i-1} / (delta+1)_{i-1}; this is both the
/// exponent of the matrix probability and E[K_n] / gamma.
double expected_columns_sum(int n, const IbpParams& params);

/// Sequential draw of W: Poisson(gamma) ones in row 1, then each later row
/// revisits active columns and appends Poisson-many new ones.
WeightMatrix sample_prior(int n, const IbpParams& params, Rng& rng);

/// Log joint probability of an active-column configuration, as a function of
/// the column count and the column sums only. m entries must lie in [1, n].
double efpf_log(int k_n, const std::vector<int>& m, int n, const IbpParams& params);

/// Conjugate Gamma draw for gamma given the active column count.
double update_gamma(int k_n, int n, const IbpParams& params, const HyperParams& priors, Rng& rng);

/// One sweep of univariate slice sampling for eta then delta, on the scales
/// u = log(1 - eta), v = log(delta + eta) where both are unconstrained.
/// Returns the updated pair; params.gamma is held fixed.
IbpParams update_eta_delta(const WeightMatrix& w, int n, const IbpParams& params,
                           const HyperParams& priors, Rng& rng);

/// Stepping-out slice sampler for a univariate log density (Neal 2003 style):
/// initial width, bounded step-outs, shrinkage on rejection.
double slice_sample(const std::function<double(double)>& log_density, double x0, double width,
                    int max_steps, Rng& rng);

}  // namespace ibart
