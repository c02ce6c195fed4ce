#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "ibart/ibp.hpp"
#include "support.hpp"

using namespace ibart;
namespace ts = test_support;

TEST_CASE("rising factorial log") {
  CHECK(rising_factorial_log(3.0, 0) == 0.0);
  CHECK(rising_factorial_log(2.0, 3) == doctest::Approx(std::log(24.0)));
  CHECK(rising_factorial_log(0.5, 2) == doctest::Approx(std::log(0.75)));
  CHECK_THROWS_AS(rising_factorial_log(-1.0, 2), std::domain_error);
  CHECK_THROWS_AS(rising_factorial_log(0.0, 1), std::domain_error);
  CHECK_THROWS_AS(rising_factorial_log(1.0, -1), std::domain_error);
}

TEST_CASE("existing column probability") {
  CHECK(existing_column_prob(3, 4, {1.0, 2.0, -1.0}) == doctest::Approx(4.0 / 6.0));
  CHECK(existing_column_prob(1, 1, {1.0, 1.0, 0.0}) == doctest::Approx(0.5));
  // numerator m_k - eta tends to zero as eta -> 1
  CHECK(existing_column_prob(1, 3, {1.0, 2.0, 1.0 - 1e-9}) < 1e-8);
  CHECK_THROWS_AS(existing_column_prob(0, 3, IbpParams{1.0, 2.0, 0.0}), std::domain_error);

  // in (0,1) throughout the constraint region
  Rng rng(5);
  for (int rep = 0; rep < 500; ++rep) {
    const double eta = 1.0 - std::exp(rng.normal(0.0, 2.0));
    const double delta = std::exp(rng.normal(0.0, 2.0)) - eta;
    const int n_prev = 1 + rng.uniform_int(30);
    const int m = 1 + rng.uniform_int(n_prev);
    const double p = existing_column_prob(m, n_prev, {1.0, delta, eta});
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("new column rate") {
  const IbpParams p0{3.7, 2.0, -1.0};
  CHECK(new_column_rate(0, p0) == 3.7);  // exact
  CHECK(new_column_rate(1, {2.0, 1.0, 0.0}) == doctest::Approx(1.0));  // gamma / 2

  // agreement with the direct gamma-function ratio where it is finite
  for (const IbpParams p : {IbpParams{1.0, 2.0, -1.0}, IbpParams{0.5, 0.3, 0.2}}) {
    for (int n_prev = 1; n_prev <= 20; ++n_prev) {
      const double direct = p.gamma * std::tgamma(1.0 + p.delta) *
                            std::tgamma(n_prev + p.delta + p.eta) /
                            (std::tgamma(n_prev + 1.0 + p.delta) * std::tgamma(p.delta + p.eta));
      CHECK(new_column_rate(n_prev, p) == doctest::Approx(direct).epsilon(1e-10));
    }
  }

  // non-increasing in n_prev
  for (const IbpParams p : {IbpParams{2.0, 5.0, -2.0}, IbpParams{1.0, 0.5, 0.4}}) {
    double prev = new_column_rate(1, p);
    for (int n_prev = 2; n_prev <= 50; ++n_prev) {
      const double cur = new_column_rate(n_prev, p);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("prior draw: first-row count is Poisson(gamma)") {
  Rng rng(42);
  const IbpParams params{2.5, 1.0, 0.0};
  std::vector<double> k1(10000);
  for (auto& v : k1) v = sample_prior(1, params, rng).cols();
  CHECK(std::fabs(ts::mean(k1) - 2.5) < 3.0 * ts::se_mean(k1));
}

TEST_CASE("prior draw: vanishing gamma gives an empty matrix") {
  Rng rng(1);
  const IbpParams params{1e-12, 1.0, 0.0};
  for (int rep = 0; rep < 100; ++rep) CHECK(sample_prior(4, params, rng).cols() == 0);
}

TEST_CASE("prior draw: E[K_n] identity at n = 5") {
  Rng rng(9);
  const IbpParams params{2.0, 1.0, 0.0};
  const double expected = params.gamma * expected_columns_sum(5, params);
  // hand value: 2 * (1 + 1/2 + 1/3 + 1/4 + 1/5)
  CHECK(expected == doctest::Approx(2.0 * (1.0 + 0.5 + 1.0 / 3 + 0.25 + 0.2)));
  std::vector<double> kn(10000);
  for (auto& v : kn) v = sample_prior(5, params, rng).cols();
  CHECK(std::fabs(ts::mean(kn) - expected) < 3.0 * ts::se_mean(kn));
}

TEST_CASE("dense parameterisation fills the matrix") {
  Rng rng(17);
  const double k = 100.0;
  const auto w = sample_prior(100, {k, k + 1.0, -k}, rng);
  REQUIRE(w.cols() > 50);
  double ones = 0.0;
  for (int col = 0; col < w.cols(); ++col) ones += w.count(col);
  CHECK(ones / (double(w.cols()) * w.rows()) > 0.95);
}

TEST_CASE("efpf at n = 1 reduces to the Poisson pmf") {
  const IbpParams params{1.7, 2.0, -0.5};
  CHECK(efpf_log(1, {1}, 1, params) ==
        doctest::Approx(std::log(params.gamma) - params.gamma));
  CHECK(efpf_log(0, {}, 1, params) == doctest::Approx(-params.gamma));
  CHECK_THROWS_AS(efpf_log(1, {5}, 4, params), std::domain_error);
  CHECK_THROWS_AS(efpf_log(1, {0}, 4, params), std::domain_error);
}

TEST_CASE("efpf depends on rows only through the column counts") {
  Rng rng(23);
  const IbpParams params{2.0, 1.5, 0.3};
  const auto w = sample_prior(6, params, rng);
  if (w.cols() > 0) {
    std::vector<int> m = w.counts();
    // permuting rows leaves every column count unchanged
    WeightMatrix perm(6);
    const int order[6] = {3, 0, 5, 1, 4, 2};
    for (int k = 0; k < w.cols(); ++k) {
      std::vector<std::uint8_t> col(6);
      for (int i = 0; i < 6; ++i) col[i] = w.get(order[i], k);
      perm.append_column(col);
    }
    CHECK(efpf_log(w.cols(), perm.counts(), 6, params) == efpf_log(w.cols(), m, 6, params));
  }
}

namespace {

// Independent oracle for the joint law of W at small n: under the sequential
// construction, the counts of columns with each row-membership pattern are
// independent Poissons. Rates below are hand-derived from the construction.
struct PatternModel {
  std::vector<double> rates;   // per pattern
  std::vector<int> sizes;      // pattern cardinality (column count m)
};

PatternModel pattern_model(int n, const IbpParams& p) {
  const double g = p.gamma, d = p.delta, e = p.eta;
  const auto take = [&](int m, int rows_before) { return (m - e) / (rows_before + d); };
  PatternModel out;
  if (n == 2) {
    const double p2 = take(1, 1);
    const double r2 = g * (d + e) / (1.0 + d);
    out.rates = {g * (1 - p2), g * p2, r2};
    out.sizes = {1, 2, 1};  // {1}, {1,2}, {2}
  } else if (n == 3) {
    const double p2 = take(1, 1);
    const double r2 = g * (d + e) / (1.0 + d);
    const double r3 = g * (d + e) * (1.0 + d + e) / ((1.0 + d) * (2.0 + d));
    out.rates = {
        g * (1 - p2) * (1 - take(1, 2)),  // {1}
        g * p2 * (1 - take(2, 2)),        // {1,2}
        g * (1 - p2) * take(1, 2),        // {1,3}
        g * p2 * take(2, 2),              // {1,2,3}
        r2 * (1 - take(1, 2)),            // {2}
        r2 * take(1, 2),                  // {2,3}
        r3,                               // {3}
    };
    out.sizes = {1, 2, 2, 3, 1, 2, 1};
  } else {
    throw std::logic_error("pattern_model supports n = 2, 3 only");
  }
  return out;
}

using ClassKey = std::vector<int>;  // [K_n, sorted column counts...]

ClassKey class_of(const std::vector<int>& m) {
  ClassKey key;
  key.push_back(static_cast<int>(m.size()));
  std::vector<int> sorted = m;
  std::sort(sorted.begin(), sorted.end());
  key.insert(key.end(), sorted.begin(), sorted.end());
  return key;
}

// Enumerates pattern-count vectors, checks the matrix-probability formula
// against the construction on each, and accumulates per-class probabilities.
std::map<ClassKey, double> enumerate_classes(int n, const IbpParams& params, int cap,
                                             bool check_formula) {
  const PatternModel pm = pattern_model(n, params);
  const int npat = static_cast<int>(pm.rates.size());
  std::map<ClassKey, double> classes;
  std::vector<int> counts(npat, 0);

  const std::function<void(int)> walk = [&](int idx) {
    if (idx == npat) {
      double log_seq = 0.0;
      std::vector<int> m;
      double log_orderings = 0.0;
      int k_n = 0;
      for (int s = 0; s < npat; ++s) {
        log_seq += ts::log_poisson_pmf(counts[s], pm.rates[s]);
        log_orderings -= std::lgamma(counts[s] + 1.0);
        k_n += counts[s];
        for (int c = 0; c < counts[s]; ++c) m.push_back(pm.sizes[s]);
      }
      log_orderings += std::lgamma(k_n + 1.0);
      const double p_seq = std::exp(log_seq);
      if (check_formula && p_seq > 1e-280) {
        // matrix probability identity: sequential law vs ordering-counted efpf
        const double p_efpf = std::exp(efpf_log(k_n, m, n, params) + log_orderings);
        REQUIRE(p_seq == doctest::Approx(p_efpf).epsilon(1e-9));
      }
      classes[class_of(m)] += p_seq;
      return;
    }
    for (counts[idx] = 0; counts[idx] <= cap; ++counts[idx]) walk(idx + 1);
    counts[idx] = 0;
  };
  walk(0);
  return classes;
}

void run_efpf_monte_carlo(int n, const IbpParams& params, int cap, int draws) {
  auto classes = enumerate_classes(n, params, cap, true);
  double covered = 0.0;
  for (const auto& [key, prob] : classes) covered += prob;
  REQUIRE(covered > 0.9999);

  Rng rng(314159 + n);
  std::map<ClassKey, int> freq;
  for (int rep = 0; rep < draws; ++rep) {
    const auto w = sample_prior(n, params, rng);
    freq[class_of(w.counts())] += 1;
  }
  int checked = 0;
  for (const auto& [key, prob] : classes) {
    if (prob < 5e-4) continue;
    const double observed = double(freq[key]) / draws;
    const double se = std::sqrt(prob * (1.0 - prob) / draws);
    CHECK(std::fabs(observed - prob) < 3.0 * se + 2e-4);
    ++checked;
  }
  CHECK(checked >= 5);
}

}  // namespace

TEST_CASE("efpf matches the sequential construction and prior draws at n = 2") {
  run_efpf_monte_carlo(2, {1.0, 1.5, 0.3}, 8, 100000);
}

TEST_CASE("efpf matches the sequential construction and prior draws at n = 3") {
  run_efpf_monte_carlo(3, {0.8, 2.0, -0.7}, 6, 100000);
}

TEST_CASE("gamma update: no data recovers the prior") {
  Rng rng(77);
  HyperParams priors;
  const IbpParams params{1.0, 1.0, 0.0};
  std::vector<double> draws(10000);
  for (auto& v : draws) v = update_gamma(0, 0, params, priors, rng);
  CHECK(std::fabs(ts::mean(draws) - priors.a_gamma / priors.b_gamma) < 3.0 * ts::se_mean(draws));
}

TEST_CASE("gamma update: hand-evaluated full conditional at n = 1") {
  Rng rng(78);
  HyperParams priors;
  const IbpParams params{1.0, 1.0, 0.0};
  // sum over i of the factorial ratios has the single term 1
  const double shape = 5.0 + priors.a_gamma;
  const double rate = 1.0 + priors.b_gamma;
  std::vector<double> draws(10000);
  for (auto& v : draws) v = update_gamma(5, 1, params, priors, rng);
  CHECK(std::fabs(ts::mean(draws) - shape / rate) < 3.0 * ts::se_mean(draws));
}

TEST_CASE("slice sampler reproduces a standard normal") {
  Rng rng(5150);
  std::vector<double> draws;
  double x = 0.3;
  const auto target = [](double v) { return -0.5 * v * v; };
  for (int it = 0; it < 20000; ++it) {
    x = slice_sample(target, x, 1.0, 50, rng);
    if (it % 2 == 0) draws.push_back(x);
  }
  CHECK(std::fabs(ts::mean(draws)) < 4.0 * ts::se_batch_means(draws));
  CHECK(ts::variance(draws) == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("eta/delta update: finite target and constraint region") {
  Rng rng(31);
  const IbpParams params{2.0, 1.5, 0.3};
  auto w = sample_prior(8, params, rng);
  HyperParams priors;
  IbpParams cur = params;
  for (int it = 0; it < 200; ++it) {
    cur = update_eta_delta(w, 8, cur, priors, rng);
    CHECK(cur.eta < 1.0);
    CHECK(cur.delta + cur.eta > 0.0);
    CHECK(cur.gamma == params.gamma);
  }
}

TEST_CASE("eta/delta update: no active columns recovers the prior") {
  Rng rng(99);
  HyperParams priors;
  priors.a_eta = 2.0;
  priors.b_eta = 1.0;
  priors.a_delta = 2.0;
  priors.b_delta = 1.0;
  const WeightMatrix empty(5);

  IbpParams cur{1e-9, 1.0, 0.0};
  std::vector<double> chain_u, chain_v;
  for (int it = 0; it < 12000; ++it) {
    cur = update_eta_delta(empty, 5, cur, priors, rng);
    if (it >= 2000 && it % 5 == 0) {
      chain_u.push_back(std::log(1.0 - cur.eta));
      chain_v.push_back(std::log(cur.delta + cur.eta));
    }
  }
  // the sampler truncates the eta hyper-prior to 1 - eta >= 1
  std::vector<double> prior_u(10000), prior_v(10000);
  for (auto& v : prior_u) {
    double x;
    do {
      x = rng.gamma(priors.a_eta, priors.b_eta);
    } while (x < 1.0);
    v = std::log(x);
  }
  for (auto& v : prior_v) v = std::log(rng.gamma(priors.a_delta, priors.b_delta));

  const double crit = ts::ks_critical(chain_u.size(), prior_u.size(), 0.01);
  CHECK(ts::ks_statistic(chain_u, prior_u) < crit);
  CHECK(ts::ks_statistic(chain_v, prior_v) < crit);
}

TEST_CASE("eta/delta update: posterior covers the generating values") {
  HyperParams priors;
  const double eta_true = -0.5, delta_true = 2.0, gamma_fix = 5.0;
  int eta_cover = 0, delta_cover = 0;
  const int reps = 16;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(400 + rep);
    const auto w = sample_prior(50, {gamma_fix, delta_true, eta_true}, rng);
    if (w.cols() < 3) { ++eta_cover; ++delta_cover; continue; }
    IbpParams cur{gamma_fix, 1.0, 0.0};
    std::vector<double> etas, deltas;
    for (int it = 0; it < 500; ++it) {
      cur = update_eta_delta(w, 50, cur, priors, rng);
      if (it >= 100) {
        etas.push_back(cur.eta);
        deltas.push_back(cur.delta);
      }
    }
    std::sort(etas.begin(), etas.end());
    std::sort(deltas.begin(), deltas.end());
    const auto q = [](const std::vector<double>& v, double p) {
      return v[static_cast<size_t>(p * (v.size() - 1))];
    };
    if (q(etas, 0.05) <= eta_true && eta_true <= q(etas, 0.95)) ++eta_cover;
    if (q(deltas, 0.05) <= delta_true && delta_true <= q(deltas, 0.95)) ++delta_cover;
  }
  // 90% intervals over 16 replicates; allow a generous margin
  CHECK(eta_cover >= 11);
  CHECK(delta_cover >= 11);
}
