#include <benchmark/benchmark.h>

#include "ibart/data_gen.hpp"
#include "ibart/ibp.hpp"
#include "ibart/inference.hpp"
#include "ibart/sampler.hpp"

using namespace ibart;

namespace {

Dataset friedman(int n, int p) {
  Rng rng(42);
  return gen_friedman(n, p, 1.0, rng).data;
}

// state after a short burn-in so the benchmarks see realistic tree shapes
struct ChainFixture {
  Dataset data;
  SamplerConfig cfg;
  ModelState state;
  FitCache cache;
  Rng rng{7};

  ChainFixture(int n, int p, Mode mode, int sweeps) : data(friedman(n, p)) {
    cfg.hp.mode = mode;
    cfg.hp.classic_k = 200;
    cfg.hp.lambda /= data.y_scale * data.y_scale;
    Rng init_rng(1);
    state = init_state(data, cfg, init_rng);
    cache = init_cache(state, data.X);
    for (int s = 0; s < sweeps; ++s) gibbs_sweep(state, cache, data, cfg, rng);
  }
};

}  // namespace

static void BM_GibbsSweepInfinite(benchmark::State& st) {
  ChainFixture fix(300, 30, Mode::infinite, 200);
  for (auto _ : st) gibbs_sweep(fix.state, fix.cache, fix.data, fix.cfg, fix.rng);
}
BENCHMARK(BM_GibbsSweepInfinite)->Unit(benchmark::kMillisecond);

static void BM_GibbsSweepClassic200(benchmark::State& st) {
  ChainFixture fix(300, 30, Mode::classic, 50);
  for (auto _ : st) gibbs_sweep(fix.state, fix.cache, fix.data, fix.cfg, fix.rng);
}
BENCHMARK(BM_GibbsSweepClassic200)->Unit(benchmark::kMillisecond);

static void BM_TreeUpdate(benchmark::State& st) {
  ChainFixture fix(300, 30, Mode::infinite, 200);
  const double sigma_mu2 = fix.cfg.hp.effective_sigma_mu2();
  int k = 0;
  for (auto _ : st) {
    k = (k + 1) % fix.state.active_trees();
    const TreeResiduals tr = residuals_for_tree(k, fix.state, fix.cache, fix.data.y);
    mh_update_tree(fix.state.trees[k], fix.state.leaves[k], tr.residuals, tr.rows, fix.data.X,
                   fix.state.sigma2, sigma_mu2, fix.cfg.hp.alpha, fix.cfg.hp.beta,
                   fix.cfg.move_probs, fix.rng);
  }
}
BENCHMARK(BM_TreeUpdate);

static void BM_WRowUpdate(benchmark::State& st) {
  ChainFixture fix(300, 30, Mode::infinite, 200);
  int i = 0;
  for (auto _ : st) {
    i = (i + 1) % fix.data.n();
    update_w_row(i, fix.state, fix.cache, fix.data.y, fix.cfg, fix.rng);
  }
}
BENCHMARK(BM_WRowUpdate);

static void BM_EtaDeltaSlice(benchmark::State& st) {
  ChainFixture fix(300, 30, Mode::infinite, 200);
  for (auto _ : st)
    fix.state.ibp = update_eta_delta(fix.state.w, fix.data.n(), fix.state.ibp, fix.cfg.hp, fix.rng);
}
BENCHMARK(BM_EtaDeltaSlice);

static void BM_EfpfLog(benchmark::State& st) {
  Rng rng(3);
  const IbpParams params{5.0, 2.0, -1.0};
  const auto w = sample_prior(300, params, rng);
  for (auto _ : st) benchmark::DoNotOptimize(efpf_log(w.cols(), w.counts(), 300, params));
}
BENCHMARK(BM_EfpfLog);

static void BM_SamplePrior(benchmark::State& st) {
  Rng rng(3);
  const IbpParams params{5.0, 2.0, -1.0};
  for (auto _ : st) benchmark::DoNotOptimize(sample_prior(100, params, rng).cols());
}
BENCHMARK(BM_SamplePrior);

static void BM_PredictDraw(benchmark::State& st) {
  ChainFixture fix(100, 10, Mode::infinite, 150);
  TraceStore trace;
  trace.mode = Mode::infinite;
  trace.n = fix.data.n();
  trace.p = fix.data.p();
  trace.sigma_mu2 = fix.cfg.hp.effective_sigma_mu2();
  TraceDraw draw;
  draw.sigma2 = fix.state.sigma2;
  draw.gamma = fix.state.ibp.gamma;
  draw.delta = fix.state.ibp.delta;
  draw.eta = fix.state.ibp.eta;
  draw.k_n = fix.state.active_trees();
  draw.fitted = fix.cache.fitted;
  draw.ensemble = fix.state;
  trace.draws.push_back(draw);
  Matrix x_new(20, fix.data.p());
  Rng xr(9);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < x_new.cols(); ++j) x_new(i, j) = xr.uniform();
  for (auto _ : st) benchmark::DoNotOptimize(predict_out_of_sample(trace, x_new, fix.rng).rows[0].mean);
}
BENCHMARK(BM_PredictDraw);

BENCHMARK_MAIN();
