#include "ibart/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ibart/ibp.hpp"

namespace ibart {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_pdf(double y, double mean, double sigma2) {
  const double d = y - mean;
  return -0.5 * (kLog2Pi + std::log(sigma2)) - d * d / (2.0 * sigma2);
}

}  // namespace

double quantile_type7(std::vector<double> v, double prob) {
  if (v.empty()) throw std::invalid_argument("quantile_type7: empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

PosteriorSummary summarize(const std::vector<double>& draws) {
  PosteriorSummary s;
  double sum = 0.0;
  for (double d : draws) sum += d;
  s.mean = sum / draws.size();
  s.lower = quantile_type7(draws, 0.025);
  s.upper = quantile_type7(draws, 0.975);
  return s;
}

PosteriorSummary estimate_f_insample(const TraceStore& trace, int i) {
  if (trace.draws.empty()) throw std::invalid_argument("estimate_f_insample: empty trace");
  if (i < 0 || i >= trace.n) throw std::out_of_range("estimate_f_insample: row index");
  std::vector<double> vals;
  vals.reserve(trace.draws.size());
  for (const auto& d : trace.draws) vals.push_back(d.fitted[i]);
  return summarize(vals);
}

std::vector<double> variable_importance(const TraceStore& trace, ImportanceKind kind) {
  if (trace.draws.empty()) throw std::invalid_argument("variable_importance: empty trace");
  std::vector<double> v(trace.p, 0.0);
  for (int l = 0; l < trace.size(); ++l) {
    if (kind == ImportanceKind::pooled) {
      const auto z = trace.split_fractions(l);
      for (int j = 0; j < trace.p; ++j) v[j] += z[j];
    } else {
      for (int j = 0; j < trace.p; ++j) v[j] += trace.draws[l].z_per_tree[j];
    }
  }
  for (double& x : v) x /= trace.size();
  return v;
}

std::vector<double> pdp_default_grid(const Dataset& data, int s, int points) {
  if (points < 1) throw std::invalid_argument("pdp_default_grid: need at least one point");
  std::vector<double> col(data.n());
  for (int i = 0; i < data.n(); ++i) col[i] = data.X(i, s);
  const double lo = quantile_type7(col, 0.05);
  const double hi = quantile_type7(col, 0.95);
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = 0.5 * (lo + hi);
    return grid;
  }
  for (int g = 0; g < points; ++g) grid[g] = lo + (hi - lo) * g / (points - 1);
  return grid;
}

std::vector<PdpPoint> partial_dependence(const TraceStore& trace, const Dataset& data, int s,
                                         const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("partial_dependence: empty grid");
  if (!trace.has_ensembles())
    throw std::logic_error("partial_dependence: trace has no retained ensembles");
  if (s < 0 || s >= data.p()) throw std::out_of_range("partial_dependence: column index");

  const int n = data.n();
  std::vector<std::vector<double>> per_grid(grid.size());
  std::vector<double> base(n);

  for (const auto& draw : trace.draws) {
    if (!draw.ensemble) continue;
    const ModelState& ens = *draw.ensemble;
    std::vector<int> on_s, off_s;
    for (int k = 0; k < ens.active_trees(); ++k)
      (ens.trees[k].uses_variable(s) ? on_s : off_s).push_back(k);

    std::fill(base.begin(), base.end(), 0.0);
    for (int k : off_s) {
      for (int i = 0; i < n; ++i)
        if (ens.w.get(i, k)) base[i] += ens.trees[k].evaluate(data.X, i, ens.leaves[k]);
    }
    for (size_t g = 0; g < grid.size(); ++g) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double v = base[i];
        for (int k : on_s) {
          if (ens.w.get(i, k))
            v += ens.leaves[k][ens.trees[k]
                                   .node(ens.trees[k].leaf_node_for_override(data.X, i, s, grid[g]))
                                   .leaf];
        }
        total += v;
      }
      per_grid[g].push_back(total / n);
    }
  }
  if (per_grid[0].empty()) throw std::logic_error("partial_dependence: no ensembles in trace");

  std::vector<PdpPoint> out(grid.size());
  for (size_t g = 0; g < grid.size(); ++g) {
    out[g].x = grid[g];
    out[g].value = summarize(per_grid[g]);
  }
  return out;
}

AteResult average_treatment_effect(const TraceStore& trace, const Dataset& data,
                                   int treatment_col) {
  if (!trace.has_ensembles())
    throw std::logic_error("average_treatment_effect: trace has no retained ensembles");
  if (treatment_col < 0 || treatment_col >= data.p())
    throw std::out_of_range("average_treatment_effect: column index");
  for (int i = 0; i < data.n(); ++i) {
    const double t = data.X(i, treatment_col);
    if (t != 0.0 && t != 1.0)
      throw std::invalid_argument("average_treatment_effect: non-binary treatment column");
  }

  AteResult res;
  const int n = data.n();
  for (const auto& draw : trace.draws) {
    if (!draw.ensemble) continue;
    const ModelState& ens = *draw.ensemble;
    double tau = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < ens.active_trees(); ++k) {
        if (!ens.w.get(i, k)) continue;
        const auto& tree = ens.trees[k];
        if (!tree.uses_variable(treatment_col)) continue;  // identical on both arms
        const auto& mu = ens.leaves[k];
        tau += mu[tree.node(tree.leaf_node_for_override(data.X, i, treatment_col, 1.0)).leaf] -
               mu[tree.node(tree.leaf_node_for_override(data.X, i, treatment_col, 0.0)).leaf];
      }
    }
    res.draws.push_back(tau / n * trace.y_scale);
  }
  if (res.draws.empty()) throw std::logic_error("average_treatment_effect: no ensembles in trace");
  res.summary = summarize(res.draws);
  return res;
}

namespace {

// One column of the activation matrix during prediction: counts over the
// training rows stay frozen, entries for the new rows are resampled.
struct PredColumn {
  int m_train = 0;
  int snap_index = -1;  // >= 0: tree column of the snapshot; -1: fresh constant
  double const_mu = 0.0;
  std::vector<std::uint8_t> w;  // per new row
  int cnt = 0;                  // ones among the new rows
};

double column_value(const PredColumn& c, const Matrix& gmat, int j) {
  return c.snap_index >= 0 ? gmat(c.snap_index, j) : c.const_mu;
}

double row_fit(const std::vector<PredColumn>& cols, const Matrix& gmat, int j) {
  double v = 0.0;
  for (const auto& c : cols)
    if (c.w[j]) v += column_value(c, gmat, j);
  return v;
}

}  // namespace

PredictionResult predict_out_of_sample(const TraceStore& trace, const Matrix& x_new, Rng& rng,
                                       const PredictOptions& opts) {
  if (x_new.cols() != trace.p)
    throw std::invalid_argument("predict: new data has wrong number of columns");
  if (!trace.has_ensembles()) throw std::logic_error("predict: trace has no retained ensembles");

  const int n_new = x_new.rows();
  std::vector<std::vector<double>> draw_rows;  // per used draw: predictions

  for (const auto& draw : trace.draws) {
    if (!draw.ensemble) continue;
    const ModelState& ens = *draw.ensemble;
    const int k0 = ens.active_trees();
    Matrix gmat(k0, n_new);
    for (int k = 0; k < k0; ++k)
      for (int j = 0; j < n_new; ++j)
        gmat(k, j) = ens.trees[k].evaluate(x_new.row_ptr(j), ens.leaves[k]);

    std::vector<double> preds(n_new, 0.0);

    if (trace.mode == Mode::classic) {
      for (int j = 0; j < n_new; ++j) {
        double v = 0.0;
        for (int k = 0; k < k0; ++k) v += gmat(k, j);
        preds[j] = v;
      }
      draw_rows.push_back(std::move(preds));
      continue;
    }

    const IbpParams params{draw.gamma, draw.delta, draw.eta};
    const int n_train = trace.n;

    if (opts.method == PredictMethod::plugin) {
      for (int j = 0; j < n_new; ++j) {
        double v = 0.0;
        for (int k = 0; k < k0; ++k)
          v += existing_column_prob(ens.w.count(k), n_train, params) * gmat(k, j);
        preds[j] = v;
      }
      draw_rows.push_back(std::move(preds));
      continue;
    }

    const double sigma_mu = std::sqrt(trace.sigma_mu2);
    std::vector<PredColumn> cols(k0);
    for (int k = 0; k < k0; ++k) {
      cols[k].m_train = ens.w.count(k);
      cols[k].snap_index = k;
      cols[k].w.assign(n_new, 0);
    }

    // sequential extension from the prior conditional
    for (int j = 0; j < n_new; ++j) {
      const int n_prev = n_train + j;
      for (auto& c : cols) {
        const int m = c.m_train + c.cnt;
        if (rng.uniform() < existing_column_prob(m, n_prev, params)) {
          c.w[j] = 1;
          ++c.cnt;
        }
      }
      const int fresh = rng.poisson(new_column_rate(n_prev, params));
      for (int b = 0; b < fresh; ++b) {
        PredColumn c;
        c.const_mu = rng.normal(0.0, sigma_mu);
        c.w.assign(n_new, 0);
        c.w[j] = 1;
        c.cnt = 1;
        cols.push_back(std::move(c));
      }
    }

    // a few rounds against the Gaussian likelihood
    const int n_tot = n_train + n_new;
    for (int round = 0; round < opts.alternations; ++round) {
      std::vector<double> y_draw(n_new);
      for (int j = 0; j < n_new; ++j)
        y_draw[j] = row_fit(cols, gmat, j) + rng.normal(0.0, std::sqrt(draw.sigma2));

      for (int j = 0; j < n_new; ++j) {
        // drop prediction-born columns owned solely by row j
        for (int k = static_cast<int>(cols.size()) - 1; k >= 0; --k) {
          auto& c = cols[k];
          if (c.m_train == 0 && c.cnt - c.w[j] == 0) cols.erase(cols.begin() + k);
        }
        double fit_j = row_fit(cols, gmat, j);
        for (auto& c : cols) {
          const int cur = c.w[j];
          const double g = column_value(c, gmat, j);
          const double base = fit_j - cur * g;
          const int m_mj = c.m_train + c.cnt - cur;
          const double logit =
              std::log(m_mj - params.eta) - std::log(n_tot - 1 + params.delta - m_mj + params.eta) +
              log_normal_pdf(y_draw[j], base + g, draw.sigma2) -
              log_normal_pdf(y_draw[j], base, draw.sigma2);
          const int next = rng.bernoulli_logit(logit) ? 1 : 0;
          if (next != cur) {
            c.w[j] = static_cast<std::uint8_t>(next);
            c.cnt += next - cur;
            fit_j = base + next * g;
          }
        }
        // births from the truncated posterior with prior-drawn leaf values
        const double rate = new_column_rate(n_tot - 1, params);
        std::vector<double> mu_new(opts.k_trunc);
        for (auto& m : mu_new) m = rng.normal(0.0, sigma_mu);
        std::vector<double> logw(opts.k_trunc + 1);
        double cum = 0.0;
        for (int k = 0; k <= opts.k_trunc; ++k) {
          logw[k] = k * std::log(rate) - rate - std::lgamma(k + 1.0) +
                    log_normal_pdf(y_draw[j], fit_j + cum, draw.sigma2);
          if (k < opts.k_trunc) cum += mu_new[k];
        }
        const double mx = *std::max_element(logw.begin(), logw.end());
        double total = 0.0;
        for (double& w : logw) {
          w = std::exp(w - mx);
          total += w;
        }
        double u = rng.uniform() * total;
        int births = opts.k_trunc;
        for (int k = 0; k <= opts.k_trunc; ++k) {
          if (u < logw[k]) {
            births = k;
            break;
          }
          u -= logw[k];
        }
        for (int b = 0; b < births; ++b) {
          PredColumn c;
          c.const_mu = mu_new[b];
          c.w.assign(n_new, 0);
          c.w[j] = 1;
          c.cnt = 1;
          cols.push_back(std::move(c));
        }
      }
    }

    for (int j = 0; j < n_new; ++j) preds[j] = row_fit(cols, gmat, j);
    draw_rows.push_back(std::move(preds));
  }

  if (draw_rows.empty()) throw std::logic_error("predict: no ensembles in trace");

  PredictionResult res;
  res.draws = Matrix(static_cast<int>(draw_rows.size()), n_new);
  for (size_t l = 0; l < draw_rows.size(); ++l)
    for (int j = 0; j < n_new; ++j) res.draws(static_cast<int>(l), j) = draw_rows[l][j];
  res.rows.resize(n_new);
  std::vector<double> col(draw_rows.size());
  for (int j = 0; j < n_new; ++j) {
    for (size_t l = 0; l < draw_rows.size(); ++l) col[l] = res.draws(static_cast<int>(l), j);
    res.rows[j] = summarize(col);
  }
  return res;
}

}  // namespace ibart
