#include "ibart/data_gen.hpp"

#include <cmath>
#include <stdexcept>

#include "ibart/ibp.hpp"
#include "ibart/tree.hpp"

namespace ibart {

namespace {
constexpr double kPi = 3.14159265358979323846;

double friedman_f(const double* x, int offset) {
  return 10.0 * std::sin(kPi * x[offset] * x[offset + 1]) +
         20.0 * (x[offset + 2] - 0.5) * (x[offset + 2] - 0.5) + 10.0 * x[offset + 3] +
         5.0 * x[offset + 4];
}

double beta_draw(double a, double b, Rng& rng) {
  const double x = rng.gamma(a, 1.0);
  const double y = rng.gamma(b, 1.0);
  return x / (x + y);
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Random shallow tree from the branching prior, with rules drawn uniformly
// from the valid (observation, variable) pairs at each node.
void grow_random_tree(DecisionTree& tree, int node, const Matrix& X, std::vector<int> rows,
                      double alpha, double beta, int max_depth, Rng& rng) {
  const int depth = tree.node(node).depth;
  if (depth >= max_depth || rows.size() < 2) return;
  if (rng.uniform() >= alpha * std::pow(1.0 + depth, -beta)) return;

  std::vector<int> vars;
  for (int j = 0; j < X.cols(); ++j) {
    const double first = X(rows[0], j);
    for (int r : rows) {
      if (X(r, j) != first) {
        vars.push_back(j);
        break;
      }
    }
  }
  if (vars.empty()) return;
  const int var = vars[rng.uniform_int(static_cast<int>(vars.size()))];
  double mx = X(rows[0], var);
  for (int r : rows) mx = std::max(mx, X(r, var));
  std::vector<int> obs_set;
  for (int r : rows)
    if (X(r, var) < mx) obs_set.push_back(r);
  const int obs = obs_set[rng.uniform_int(static_cast<int>(obs_set.size()))];

  tree.grow(node, DecisionRule{obs, var, X(obs, var)});
  std::vector<int> left, right;
  for (int r : rows) (X(r, var) <= X(obs, var) ? left : right).push_back(r);
  grow_random_tree(tree, tree.node(node).left, X, std::move(left), alpha, beta, max_depth, rng);
  grow_random_tree(tree, tree.node(node).right, X, std::move(right), alpha, beta, max_depth, rng);
}

}  // namespace

DgpKind dgp_from_string(const std::string& s) {
  if (s == "friedman") return DgpKind::friedman;
  if (s == "clustered_friedman") return DgpKind::clustered_friedman;
  if (s == "ibp_synthetic") return DgpKind::ibp_synthetic;
  if (s == "causal") return DgpKind::causal;
  throw std::invalid_argument("unknown dgp: " + s);
}

std::string to_string(DgpKind k) {
  switch (k) {
    case DgpKind::friedman: return "friedman";
    case DgpKind::clustered_friedman: return "clustered_friedman";
    case DgpKind::ibp_synthetic: return "ibp_synthetic";
    case DgpKind::causal: return "causal";
  }
  return "?";
}

void DgpSpec::validate() const {
  if (n < 1) throw std::invalid_argument("dgp: n must be >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("dgp: noise_sd must be >= 0");
  switch (kind) {
    case DgpKind::friedman:
      if (p < 5) throw std::invalid_argument("friedman: p must be >= 5");
      break;
    case DgpKind::clustered_friedman:
      if (groups < 1) throw std::invalid_argument("clustered_friedman: groups must be >= 1");
      if (p < 4 + groups) throw std::invalid_argument("clustered_friedman: p must be >= groups + 4");
      if (n % groups != 0) throw std::invalid_argument("clustered_friedman: n must be divisible by groups");
      break;
    case DgpKind::ibp_synthetic:
      IbpParams{gamma, delta, eta};  // constructor validates
      if (!(leaf_sd > 0.0)) throw std::invalid_argument("ibp_synthetic: leaf_sd must be positive");
      break;
    case DgpKind::causal:
      break;
  }
}

SimulatedData gen_friedman(int n, int p, double noise_sd, Rng& rng) {
  if (p < 5) throw std::invalid_argument("gen_friedman: p must be >= 5");
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.uniform();
  SimulatedData out;
  out.f_true.resize(n);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    out.f_true[i] = friedman_f(X.row_ptr(i), 0);
    y[i] = out.f_true[i] + rng.normal(0.0, noise_sd);
  }
  out.data = make_dataset(std::move(X), y);
  return out;
}

SimulatedData gen_clustered_friedman(int n, int p, int groups, double noise_sd, Rng& rng) {
  if (groups < 1 || p < 4 + groups) throw std::invalid_argument("gen_clustered_friedman: p must be >= groups + 4");
  if (n % groups != 0) throw std::invalid_argument("gen_clustered_friedman: n must be divisible by groups");
  Matrix X(n, p);
  for (int j = 0; j < p; ++j) {
    const double frac = static_cast<double>(j + 1) / (p + 1);
    const double a = frac * frac;
    const double b = a * (1.0 / frac - 1.0);
    for (int i = 0; i < n; ++i) X(i, j) = beta_draw(a, b, rng);
  }
  SimulatedData out;
  out.f_true.resize(n);
  out.group.resize(n);
  std::vector<double> y(n);
  const int per_group = n / groups;
  for (int i = 0; i < n; ++i) {
    const int g = i / per_group;
    out.group[i] = g + 1;
    out.f_true[i] = friedman_f(X.row_ptr(i), g);
    y[i] = out.f_true[i] + rng.normal(0.0, noise_sd);
  }
  out.data = make_dataset(std::move(X), y);
  return out;
}

SimulatedData gen_ibp_synthetic(int n, double gamma, double delta, double eta, double noise_sd,
                                double leaf_sd, Rng& rng) {
  const IbpParams params{gamma, delta, eta};
  const int p = 10;
  Matrix X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.uniform();

  const WeightMatrix w = sample_prior(n, params, rng);
  std::vector<int> all_rows(n);
  for (int i = 0; i < n; ++i) all_rows[i] = i;

  SimulatedData out;
  out.f_true.assign(n, 0.0);
  for (int k = 0; k < w.cols(); ++k) {
    DecisionTree tree;
    grow_random_tree(tree, 0, X, all_rows, 0.95, 0.75, 8, rng);
    LeafParams mu(tree.leaf_count());
    for (auto& m : mu) m = rng.normal(0.0, leaf_sd);
    for (int i = 0; i < n; ++i)
      if (w.get(i, k)) out.f_true[i] += tree.evaluate(X, i, mu);
  }
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = out.f_true[i] + rng.normal(0.0, noise_sd);
  out.data = make_dataset(std::move(X), y);
  return out;
}

SimulatedData gen_causal(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("gen_causal: n must be >= 1");
  const int p = 6;  // T, X1..X5
  Matrix X(n, p);
  SimulatedData out;
  out.f_true.resize(n);
  out.tau_true.resize(n);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    const double x1 = rng.normal();
    const double x2 = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const double x3 = rng.uniform();
    const double x4 = rng.uniform();
    const double x5 = rng.uniform();
    const double t =
        rng.uniform() < expit(0.5 + x1 - 0.7 * x2 - 0.3 * std::sin(2.0 * kPi * x3)) ? 1.0 : 0.0;
    X(i, 0) = t;
    X(i, 1) = x1;
    X(i, 2) = x2;
    X(i, 3) = x3;
    X(i, 4) = x4;
    X(i, 5) = x5;
    out.tau_true[i] = 1.0 + 0.5 * x1;
    out.f_true[i] = t * out.tau_true[i] + 2.0 + 0.3 * x1 * x1 - 0.5 * x2 +
                    std::sin(2.0 * kPi * x3);
    y[i] = out.f_true[i] + rng.normal(0.0, 1.0);
  }
  out.ate_true = 1.0;
  out.data = make_dataset(std::move(X), y, {"T", "X1", "X2", "X3", "X4", "X5"});
  return out;
}

SimulatedData generate(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  switch (spec.kind) {
    case DgpKind::friedman:
      return gen_friedman(spec.n, spec.p, spec.noise_sd, rng);
    case DgpKind::clustered_friedman:
      return gen_clustered_friedman(spec.n, spec.p, spec.groups, spec.noise_sd, rng);
    case DgpKind::ibp_synthetic:
      return gen_ibp_synthetic(spec.n, spec.gamma, spec.delta, spec.eta, spec.noise_sd,
                               spec.leaf_sd, rng);
    case DgpKind::causal:
      return gen_causal(spec.n, rng);
  }
  throw std::logic_error("unreachable");
}

}  // namespace ibart
