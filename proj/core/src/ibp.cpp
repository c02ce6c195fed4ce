#include "ibart/ibp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ibart {

double rising_factorial_log(double x, int n) {
  if (n < 0) throw std::domain_error("rising_factorial_log: n must be >= 0");
  if (n == 0) return 0.0;
  if (!(x > 0.0)) throw std::domain_error("rising_factorial_log: nonpositive factor");
  return std::lgamma(x + n) - std::lgamma(x);
}

double existing_column_prob(int m_k, int n_prev, const IbpParams& params) {
  if (m_k < 1 || m_k > n_prev) throw std::domain_error("existing_column_prob: need 1 <= m_k <= n_prev");
  return (m_k - params.eta) / (n_prev + params.delta);
}

double new_column_rate(int n_prev, const IbpParams& params) {
  if (n_prev < 0) throw std::domain_error("new_column_rate: n_prev must be >= 0");
  if (n_prev == 0) return params.gamma;
  const double d = params.delta, e = params.eta;
  return params.gamma * std::exp(std::lgamma(1.0 + d) + std::lgamma(n_prev + d + e) -
                                 std::lgamma(n_prev + 1.0 + d) - std::lgamma(d + e));
}

double expected_columns_sum(int n, const IbpParams& params) {
  // term_i = (eta+delta)_{i-1} / (delta+1)_{i-1}, built incrementally
  double term = 1.0, sum = 0.0;
  for (int i = 1; i <= n; ++i) {
    sum += term;
    term *= (params.eta + params.delta + i - 1) / (params.delta + i);
  }
  return sum;
}

WeightMatrix sample_prior(int n, const IbpParams& params, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_prior: n must be >= 1");
  WeightMatrix w(n);
  const int k1 = rng.poisson(params.gamma);
  for (int k = 0; k < k1; ++k) w.append_singleton_column(0);
  for (int i = 1; i < n; ++i) {
    for (int k = 0; k < w.cols(); ++k) {
      if (rng.uniform() < existing_column_prob(w.count(k), i, params)) w.set(i, k, 1);
    }
    const int fresh = rng.poisson(new_column_rate(i, params));
    for (int k = 0; k < fresh; ++k) w.append_singleton_column(i);
  }
  return w;
}

double efpf_log(int k_n, const std::vector<int>& m, int n, const IbpParams& params) {
  if (k_n != static_cast<int>(m.size())) throw std::domain_error("efpf_log: K_n / m length mismatch");
  const double g = params.gamma, d = params.delta, e = params.eta;
  double out = -std::lgamma(k_n + 1.0) - g * expected_columns_sum(n, params);
  if (k_n > 0) out += k_n * (std::log(g) - rising_factorial_log(1.0 + d, n - 1));
  for (int mk : m) {
    if (mk < 1 || mk > n) throw std::domain_error("efpf_log: column count out of [1, n]");
    out += rising_factorial_log(1.0 - e, mk - 1) + rising_factorial_log(d + e, n - mk);
  }
  return out;
}

double update_gamma(int k_n, int n, const IbpParams& params, const HyperParams& priors, Rng& rng) {
  if (k_n < 0) throw std::domain_error("update_gamma: K_n must be >= 0");
  const double shape = k_n + priors.a_gamma;
  const double rate = expected_columns_sum(n, params) + priors.b_gamma;
  return rng.gamma(shape, rate);
}

double slice_sample(const std::function<double(double)>& log_density, double x0, double width,
                    int max_steps, Rng& rng) {
  const double f0 = log_density(x0);
  if (!std::isfinite(f0)) throw std::domain_error("slice_sample: log density not finite at start");
  const double log_y = f0 - rng.exponential();

  // stepping out
  double lo = x0 - width * rng.uniform();
  double hi = lo + width;
  for (int s = 0; s < max_steps && log_density(lo) > log_y; ++s) lo -= width;
  for (int s = 0; s < max_steps && log_density(hi) > log_y; ++s) hi += width;

  // shrinkage
  for (;;) {
    const double x = lo + rng.uniform() * (hi - lo);
    if (log_density(x) > log_y) return x;
    if (x < x0) lo = x; else hi = x;
    if (hi - lo < 1e-14) return x0;  // numerically exhausted interval
  }
}

IbpParams update_eta_delta(const WeightMatrix& w, int n, const IbpParams& params,
                           const HyperParams& priors, Rng& rng) {
  const int k_n = w.cols();
  const std::vector<int>& m = w.counts();

  // target over (u, v) with eta = 1 - e^u and delta = e^v + e^u - 1;
  // Gamma priors on 1 - eta and delta + eta with log-scale Jacobians folded in
  const auto log_target = [&](double u, double v) {
    const double eu = std::exp(u), ev = std::exp(v);
    // The hyper-prior on eta is truncated to eta <= 0 (1 - eta >= 1). As
    // eta -> 1 with delta + eta -> 0 the per-row birth rate tends to gamma
    // and the matrix degenerates into private per-row columns; no analysis
    // in this model family uses 0 < eta < 1. The upper bounds keep the
    // reconstructed parameters away from double rounding boundaries.
    if (!(eu >= 1.0) || !(ev > 1e-13) || eu > 1e13 || ev > 1e13)
      return -std::numeric_limits<double>::infinity();
    IbpParams p;  // inside the open constraint region, skip validation
    p.gamma = params.gamma;
    p.eta = 1.0 - eu;
    p.delta = ev - p.eta;
    return efpf_log(k_n, m, n, p) + priors.a_eta * u - priors.b_eta * eu + priors.a_delta * v -
           priors.b_delta * ev;
  };

  // clamp entry into the box interior: materializing (eta, delta) and
  // re-deriving the sums can drift a few ulps across the boundary
  double u = std::clamp(std::log(1.0 - params.eta), 0.0, 29.9);
  double v = std::clamp(std::log(params.delta + params.eta), -29.9, 29.9);
  u = slice_sample([&](double x) { return log_target(x, v); }, u, 1.0, 50, rng);
  v = slice_sample([&](double x) { return log_target(u, x); }, v, 1.0, 50, rng);

  const double eta = 1.0 - std::exp(u);
  double delta = std::exp(v) - eta;
  if (!(delta + eta > 0.0))  // sum lost to rounding at an extreme corner
    delta = std::nextafter(-eta, std::numeric_limits<double>::infinity());
  return IbpParams{params.gamma, delta, eta};
}

}  // namespace ibart
