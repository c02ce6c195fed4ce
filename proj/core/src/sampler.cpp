#include "ibart/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ibart {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_pdf(double y, double mean, double sigma2) {
  const double d = y - mean;
  return -0.5 * (kLog2Pi + std::log(sigma2)) - d * d / (2.0 * sigma2);
}

void erase_column(ModelState& state, FitCache& cache, int k) {
  state.trees.erase(state.trees.begin() + k);
  state.leaves.erase(state.leaves.begin() + k);
  state.w.erase_column(k);
  cache.contrib.erase(cache.contrib.begin() + k);
}

}  // namespace

void FitCache::rebuild_fitted(const WeightMatrix& w) {
  std::fill(fitted.begin(), fitted.end(), 0.0);
  for (int k = 0; k < w.cols(); ++k) {
    const auto& col = w.column(k);
    const auto& g = contrib[k];
    for (size_t i = 0; i < fitted.size(); ++i)
      if (col[i]) fitted[i] += g[i];
  }
}

void FitCache::refresh_tree(int k, const DecisionTree& tree, const LeafParams& mu, const Matrix& X,
                            const WeightMatrix& w) {
  auto& g = contrib[k];
  for (int i = 0; i < X.rows(); ++i) {
    const double val = tree.evaluate(X, i, mu);
    if (w.get(i, k)) fitted[i] += val - g[i];
    g[i] = val;
  }
}

void FitCache::audit(const ModelState& state, const Matrix& X) const {
  for (int i = 0; i < X.rows(); ++i) {
    const double direct = ensemble_predict_row(X, i, state);
    if (std::fabs(direct - fitted[i]) > 1e-9)
      throw std::logic_error("FitCache: fitted value diverged from direct evaluation");
  }
}

TreeResiduals residuals_for_tree(int k, const ModelState& state, const FitCache& cache,
                                 const std::vector<double>& y) {
  TreeResiduals out;
  const auto& col = state.w.column(k);
  const auto& g = cache.contrib[k];
  for (size_t i = 0; i < y.size(); ++i) {
    if (col[i]) {
      out.rows.push_back(static_cast<int>(i));
      out.residuals.push_back(y[i] - cache.fitted[i] + g[i]);
    }
  }
  return out;
}

void update_w_row(int i, ModelState& state, FitCache& cache, const std::vector<double>& y,
                  const SamplerConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(y.size());
  const double sigma2 = state.sigma2;
  const double sigma_mu2 = cfg.hp.effective_sigma_mu2();
  const IbpParams& ibp = state.ibp;
  double& fit_i = cache.fitted[i];

  // stage 1: resample the row over columns active elsewhere; columns whose
  // only member is row i form the singleton block handled in stage 2
  for (int k = 0; k < state.active_trees(); ++k) {
    const int cur = state.w.get(i, k);
    const int m_mi = state.w.count(k) - cur;
    if (m_mi == 0) continue;
    const double g = cache.contrib[k][i];
    const double base = fit_i - cur * g;
    const double logit = std::log(m_mi - ibp.eta) - std::log(n - 1 + ibp.delta - m_mi + ibp.eta) +
                         log_normal_pdf(y[i], base + g, sigma2) -
                         log_normal_pdf(y[i], base, sigma2);
    const int next = rng.bernoulli_logit(logit) ? 1 : 0;
    if (next != cur) {
      state.w.set(i, k, static_cast<std::uint8_t>(next));
      fit_i = base + next * g;
    }
  }

  // stage 2: replace the row's singleton set through an independence
  // Metropolis-Hastings step whose proposal is the conditional prior
  // (truncated Poisson count, root trees with prior leaf values); the
  // likelihood enters only through the acceptance ratio
  const double rate = new_column_rate(n - 1, ibp);
  int births = 0;
  if (rate > 1e-12 || state.w.cols() > 0) {
    // truncated Poisson draw by inversion
    double term = std::exp(-rate), cum = term, z = term;
    std::vector<double> pk(cfg.k_trunc + 1);
    pk[0] = term;
    for (int k = 1; k <= cfg.k_trunc; ++k) {
      term *= rate / k;
      pk[k] = term;
      z += term;
    }
    double u = rng.uniform() * z;
    cum = 0.0;
    births = cfg.k_trunc;
    for (int k = 0; k <= cfg.k_trunc; ++k) {
      cum += pk[k];
      if (u < cum) {
        births = k;
        break;
      }
    }

    std::vector<int> current;  // row-i singleton columns
    double cur_sum = 0.0;
    for (int k = 0; k < state.active_trees(); ++k) {
      if (state.w.count(k) == 1 && state.w.get(i, k)) {
        current.push_back(k);
        cur_sum += cache.contrib[k][i];
      }
    }

    if (births > 0 || !current.empty()) {
      std::vector<double> mu_new(births);
      double new_sum = 0.0;
      for (auto& m : mu_new) {
        m = rng.normal(0.0, std::sqrt(sigma_mu2));
        new_sum += m;
      }
      const double log_alpha = log_normal_pdf(y[i], fit_i - cur_sum + new_sum, sigma2) -
                               log_normal_pdf(y[i], fit_i, sigma2);
      if (log_alpha >= 0.0 || std::log(rng.uniform()) < log_alpha) {
        for (int c = static_cast<int>(current.size()) - 1; c >= 0; --c)
          erase_column(state, cache, current[c]);
        for (double m : mu_new) {
          state.trees.emplace_back();
          state.leaves.push_back(LeafParams{m});
          state.w.append_singleton_column(i);
          cache.contrib.emplace_back(n, m);
        }
        fit_i += new_sum - cur_sum;
      }
    }
  }

  // refresh root-only row-i singleton leaves from the single-observation
  // conditional (kept or newborn alike); grown singleton trees get their
  // leaves redrawn by the next backfitting pass instead
  for (int k = 0; k < state.active_trees(); ++k) {
    if (!(state.w.count(k) == 1 && state.w.get(i, k))) continue;
    if (state.trees[k].size() != 1) continue;
    const double old_mu = cache.contrib[k][i];
    const double r = y[i] - (fit_i - old_mu);
    const double prec = 1.0 / sigma_mu2 + 1.0 / sigma2;
    const double mu = rng.normal((r / sigma2) / prec, std::sqrt(1.0 / prec));
    state.leaves[k][0] = mu;
    std::fill(cache.contrib[k].begin(), cache.contrib[k].end(), mu);
    fit_i += mu - old_mu;
  }
}

double update_sigma2(const ModelState& state, const FitCache& cache, const std::vector<double>& y,
                     const HyperParams& hp, Rng& rng) {
  (void)state;
  double ssr = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - cache.fitted[i];
    ssr += d * d;
  }
  const double shape = 0.5 * (hp.nu + static_cast<double>(y.size()));
  const double scale = 0.5 * (hp.nu * hp.lambda + ssr);
  return scale / rng.gamma(shape, 1.0);
}

void gibbs_sweep(ModelState& state, FitCache& cache, const Dataset& data,
                 const SamplerConfig& cfg, Rng& rng) {
  const double sigma_mu2 = cfg.hp.effective_sigma_mu2();
  const int n = data.n();

  // Steps 1 and 2: backfitting pass over the active trees
  for (int k = 0; k < state.active_trees(); ++k) {
    const TreeResiduals tr = residuals_for_tree(k, state, cache, data.y);
    mh_update_tree(state.trees[k], state.leaves[k], tr.residuals, tr.rows, data.X, state.sigma2,
                   sigma_mu2, cfg.hp.alpha, cfg.hp.beta, cfg.move_probs, rng);
    const auto stats = leaf_sufficient_stats(state.trees[k], tr.residuals, tr.rows, data.X);
    state.leaves[k] = draw_leaves(state.trees[k], stats, state.sigma2, sigma_mu2, rng);
    cache.refresh_tree(k, state.trees[k], state.leaves[k], data.X, state.w);
  }

  // Step 3: activation rows (infinite mode only)
  if (cfg.hp.mode == Mode::infinite && !cfg.freeze_activation) {
    if (cfg.random_row_order) {
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
      for (int i : order) update_w_row(i, state, cache, data.y, cfg, rng);
    } else {
      for (int i = 0; i < n; ++i) update_w_row(i, state, cache, data.y, cfg, rng);
    }
  }

  // Step 4: hyperparameters
  state.sigma2 = update_sigma2(state, cache, data.y, cfg.hp, rng);
  if (cfg.hp.mode == Mode::infinite && !cfg.freeze_activation) {
    state.ibp.gamma = update_gamma(state.active_trees(), n, state.ibp, cfg.hp, rng);
    state.ibp = update_eta_delta(state.w, n, state.ibp, cfg.hp, rng);
  }

  cache.rebuild_fitted(state.w);
  if (cfg.debug_checks) {
    state.check_invariants();
    cache.audit(state, data.X);
  }
}

ModelState init_state(const Dataset& data, const SamplerConfig& cfg, Rng& rng) {
  (void)rng;
  ModelState state;
  const int n = data.n();
  if (cfg.hp.mode == Mode::classic) {
    state.w = WeightMatrix::ones(n, cfg.hp.classic_k);
    state.ibp = IbpParams{1.0, 1.0, 0.0};  // untouched in classic mode
  } else {
    // dense start with a modest column count; the hyperparameters adapt
    // within the first few sweeps and births/deaths take it from there
    state.w = WeightMatrix::ones(n, cfg.k_init);
    state.ibp = IbpParams{1.0, 2.0, -1.0};
  }
  const int k = state.w.cols();
  state.trees.assign(k, DecisionTree{});
  state.leaves.assign(k, LeafParams{0.0});

  double mean = 0.0, ss = 0.0;
  for (double v : data.y) mean += v;
  mean /= data.y.size();
  for (double v : data.y) ss += (v - mean) * (v - mean);
  state.sigma2 = std::max(ss / std::max<size_t>(1, data.y.size() - 1), 1e-6);
  return state;
}

FitCache init_cache(const ModelState& state, const Matrix& X) {
  FitCache cache;
  cache.fitted.assign(X.rows(), 0.0);
  cache.contrib.resize(state.active_trees());
  for (int k = 0; k < state.active_trees(); ++k) {
    cache.contrib[k].resize(X.rows());
    for (int i = 0; i < X.rows(); ++i)
      cache.contrib[k][i] = state.trees[k].evaluate(X, i, state.leaves[k]);
  }
  cache.rebuild_fitted(state.w);
  return cache;
}

TraceStore run_chain(const Dataset& data, const SamplerConfig& cfg_in, Rng& rng) {
  cfg_in.validate();
  data.validate();

  // lambda is quoted in original response units; the chain works on the
  // standardized scale
  SamplerConfig cfg = cfg_in;
  cfg.hp.lambda /= data.y_scale * data.y_scale;

  TraceStore trace;
  trace.mode = cfg.hp.mode;
  trace.n = data.n();
  trace.p = data.p();
  trace.y_shift = data.y_shift;
  trace.y_scale = data.y_scale;
  trace.sigma_mu2 = cfg.hp.effective_sigma_mu2();
  trace.column_names = data.column_names;

  ModelState state = init_state(data, cfg, rng);
  FitCache cache = init_cache(state, data.X);

  // let the trees burn in before activation resampling starts, so the
  // first W updates see residuals at the noise scale
  const int warmup = std::min(cfg.warmup < 0 ? cfg.hp.burn_in / 2 : cfg.warmup, cfg.hp.burn_in);

  const int total = cfg.hp.burn_in + cfg.hp.iterations;
  int retained = 0;
  for (int sweep = 1; sweep <= total; ++sweep) {
    cfg.freeze_activation = sweep <= warmup;
    gibbs_sweep(state, cache, data, cfg, rng);
    const int post = sweep - cfg.hp.burn_in;
    if (post <= 0 || post % cfg.hp.thin != 0) continue;

    TraceDraw draw;
    draw.iter = post;
    draw.sigma2 = state.sigma2;
    draw.gamma = state.ibp.gamma;
    draw.delta = state.ibp.delta;
    draw.eta = state.ibp.eta;
    draw.k_n = state.active_trees();
    draw.split_counts.assign(data.p(), 0);
    draw.z_per_tree.assign(data.p(), 0.0);
    int splitting_trees = 0;
    std::vector<int> per_tree(data.p());
    for (const auto& tree : state.trees) {
      std::fill(per_tree.begin(), per_tree.end(), 0);
      tree.count_splits(per_tree);
      const int tree_total = tree.internal_count();
      if (tree_total > 0) {
        ++splitting_trees;
        for (int j = 0; j < data.p(); ++j) {
          draw.split_counts[j] += per_tree[j];
          draw.z_per_tree[j] += static_cast<double>(per_tree[j]) / tree_total;
        }
      }
    }
    draw.total_splits = std::accumulate(draw.split_counts.begin(), draw.split_counts.end(), 0);
    if (splitting_trees > 0)
      for (double& z : draw.z_per_tree) z /= splitting_trees;
    draw.fitted = cache.fitted;
    if (cfg.record_ensembles && retained % cfg.ensemble_thin == 0) draw.ensemble = state;
    trace.draws.push_back(std::move(draw));
    ++retained;
  }
  return trace;
}

}  // namespace ibart
