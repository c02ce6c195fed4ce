#pragma once

#include <string>
#include <vector>

#include "ibart/dataset.hpp"
#include "ibart/random.hpp"

namespace ibart {

enum class DgpKind { friedman, clustered_friedman, ibp_synthetic, causal };

DgpKind dgp_from_string(const std::string& s);
std::string to_string(DgpKind k);

/// Parameters of one synthetic data-generating process.
struct DgpSpec {
  DgpKind kind = DgpKind::friedman;
  int n = 100;
  int p = 10;
  double noise_sd = 1.0;
  // ibp_synthetic only
  double gamma = 10.0, delta = 20.0, eta = -5.0;
  double leaf_sd = 1.0;
  // clustered_friedman only
  int groups = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// A generated dataset plus the latent truth kept aside for diagnostics.
struct SimulatedData {
  Dataset data;
  std::vector<double> f_true;   // noiseless regression value per row
  std::vector<int> group;       // clustered_friedman only
  std::vector<double> tau_true; // causal only: per-row treatment effect
  double ate_true = 0.0;        // causal only
};

/// y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise,
/// covariates iid Uniform(0,1). Needs p >= 5.
SimulatedData gen_friedman(int n, int p, double noise_sd, Rng& rng);

/// The same response family over Beta-distributed covariates, with group k
/// applying it to the shifted variable window k..k+4. Needs p >= 4 + groups
/// and n divisible by groups.
SimulatedData gen_clustered_friedman(int n, int p, int groups, double noise_sd, Rng& rng);

/// Draws an activation matrix from the IBP prior, a random shallow tree per
/// active column, normal leaf values, and sums the active trees per row.
/// p is fixed at 10 uniform covariates; the latent matrix and trees are
/// discarded.
SimulatedData gen_ibp_synthetic(int n, double gamma, double delta, double eta, double noise_sd,
                                double leaf_sd, Rng& rng);

/// Observational treatment-effect generator with a nonlinear outcome and
/// heterogeneous effect; the first covariate column is the binary treatment T.
/// True average effect is exactly 1.
SimulatedData gen_causal(int n, Rng& rng);

SimulatedData generate(const DgpSpec& spec);

}  // namespace ibart
