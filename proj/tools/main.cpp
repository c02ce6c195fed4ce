#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "ibart/data_gen.hpp"
#include "ibart/inference.hpp"
#include "run_io.hpp"

namespace fs = std::filesystem;
using namespace ibart;
using namespace ibart::cli;

namespace {

std::vector<std::string> g_argv;

int worker_count(int jobs) {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* env = std::getenv("IBART_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) threads = cap;
  }
  return std::min(threads, jobs);
}

void run_parallel(int jobs, const std::function<void(int)>& work) {
  const int threads = worker_count(jobs);
  if (threads <= 1) {
    for (int j = 0; j < jobs; ++j) work(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int j = next.fetch_add(1); j < jobs; j = next.fetch_add(1)) work(j);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Json dataset_info(const Dataset& data, const std::string& data_path, const std::string& target,
                  const std::string& treatment) {
  Json j;
  j["data_path"] = data_path;
  j["target"] = target;
  if (!treatment.empty()) j["treatment"] = treatment;
  j["n"] = data.n();
  j["p"] = data.p();
  j["y_shift"] = data.y_shift;
  j["y_scale"] = data.y_scale;
  j["columns"] = data.column_names;
  return j;
}

Json load_manifest(const std::string& run_dir) {
  std::ifstream in(fs::path(run_dir) / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json under " + run_dir);
  Json j;
  in >> j;
  return j;
}

// Rebuilds the trace a downstream command needs from a fit run directory.
struct LoadedRun {
  Json manifest;
  TraceStore trace;
  std::string data_path;
  std::string target;
  std::string treatment;
};

LoadedRun load_run(const std::string& run_dir) {
  LoadedRun run;
  run.manifest = load_manifest(run_dir);
  const auto ens_path = fs::path(run_dir) / "ensembles.txt";
  if (!fs::exists(ens_path))
    throw std::runtime_error("run has no ensembles.txt; refit with --retain-ensembles");
  run.trace = read_ensembles(ens_path.string());
  const auto& ds = run.manifest.at("dataset");
  run.trace.y_shift = ds.at("y_shift").get<double>();
  run.trace.y_scale = ds.at("y_scale").get<double>();
  run.trace.column_names = ds.at("columns").get<std::vector<std::string>>();
  run.data_path = ds.at("data_path").get<std::string>();
  run.target = ds.at("target").get<std::string>();
  if (ds.contains("treatment")) run.treatment = ds.at("treatment").get<std::string>();
  return run;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string dgp;
  int n = 0;
  int p = 10;
  double noise_sd = 1.0;
  double gamma = 10.0, delta = 20.0, eta = -5.0, leaf_sd = 1.0;
  int groups = 5;
  std::uint64_t seed = 1;
  std::string out = "sim_out";
};

int cmd_simulate(const SimulateArgs& a) {
  const std::string started = timestamp_utc();
  DgpSpec spec;
  spec.kind = dgp_from_string(a.dgp);
  spec.n = a.n;
  spec.p = a.p;
  spec.noise_sd = a.noise_sd;
  spec.gamma = a.gamma;
  spec.delta = a.delta;
  spec.eta = a.eta;
  spec.leaf_sd = a.leaf_sd;
  spec.groups = a.groups;
  spec.seed = a.seed;
  spec.validate();

  const auto sim = generate(spec);
  fs::create_directories(a.out);
  const auto out = fs::path(a.out);
  write_dataset_csv(sim.data, (out / "data.csv").string(), "y");

  std::ostringstream truth;
  truth << "f_true";
  if (!sim.group.empty()) truth << ",group";
  if (!sim.tau_true.empty()) truth << ",tau_true";
  truth << '\n';
  for (int i = 0; i < sim.data.n(); ++i) {
    truth << format_g17(sim.f_true[i]);
    if (!sim.group.empty()) truth << ',' << sim.group[i];
    if (!sim.tau_true.empty()) truth << ',' << format_g17(sim.tau_true[i]);
    truth << '\n';
  }
  write_text((out / "truth.csv").string(), truth.str());

  std::vector<std::string> artifacts{"data.csv", "truth.csv"};
  if (spec.kind == DgpKind::causal) {
    write_text((out / "true_ate.txt").string(), format_g17(sim.ate_true) + "\n");
    artifacts.push_back("true_ate.txt");
  }

  Json cfg;
  cfg["dgp"] = a.dgp;
  cfg["n"] = spec.n;
  cfg["p"] = spec.p;
  cfg["noise_sd"] = spec.noise_sd;
  if (spec.kind == DgpKind::ibp_synthetic) {
    cfg["gamma"] = spec.gamma;
    cfg["delta"] = spec.delta;
    cfg["eta"] = spec.eta;
    cfg["leaf_sd"] = spec.leaf_sd;
  }
  if (spec.kind == DgpKind::clustered_friedman) cfg["groups"] = spec.groups;

  const Json manifest = make_manifest("simulate", g_argv, a.seed, {}, cfg,
                                      dataset_info(sim.data, (out / "data.csv").string(), "y", ""),
                                      artifacts, started, timestamp_utc());
  write_text((out / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << (out / "data.csv").string() << " (" << sim.data.n() << " x "
            << sim.data.p() + 1 << ")\n";
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string target = "y";
  std::string treatment;
  std::string config;
  std::string mode = "infinite";
  int trees = 200;
  bool trees_given = false;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int iters = 5000;
  bool iters_given = false;
  int burnin = 1000;
  bool burnin_given = false;
  int thin = 1;
  bool thin_given = false;
  bool retain_ensembles = false;
  int ensemble_thin = 1;
  std::string out = "fit_out";
};

SamplerConfig resolve_fit_config(const FitArgs& a) {
  SamplerConfig cfg;
  if (!a.config.empty()) apply_config_file(a.config, cfg);
  // flags override the file, the file overrides defaults
  cfg.hp.mode = mode_from_string(a.mode);
  if (a.trees_given) cfg.hp.classic_k = a.trees;
  if (a.seed_given) cfg.hp.seed = a.seed;
  if (a.iters_given) cfg.hp.iterations = a.iters;
  if (a.burnin_given) cfg.hp.burn_in = a.burnin;
  if (a.thin_given) cfg.hp.thin = a.thin;
  cfg.record_ensembles = a.retain_ensembles;
  if (a.ensemble_thin > 1) cfg.ensemble_thin = a.ensemble_thin;
  cfg.validate();
  return cfg;
}

std::string fit_summary_text(const TraceStore& trace, const Dataset& data,
                             const SamplerConfig& cfg,
                             const std::vector<PosteriorSummary>& f_hat) {
  std::vector<double> s2, sig_orig, gamma, delta, eta, kn;
  for (const auto& d : trace.draws) {
    s2.push_back(d.sigma2);
    sig_orig.push_back(std::sqrt(d.sigma2) * trace.y_scale);
    gamma.push_back(d.gamma);
    delta.push_back(d.delta);
    eta.push_back(d.eta);
    kn.push_back(d.k_n);
  }
  double mse_std = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double e = data.y[i] - f_hat[i].mean;
    mse_std += e * e;
  }
  mse_std /= data.n();

  std::ostringstream out;
  const auto line = [&](const char* name, const std::vector<double>& v) {
    const auto s = summarize(v);
    out << "  " << name << ": " << format_g6(s.mean) << "  [" << format_g6(s.lower) << ", "
        << format_g6(s.upper) << "]\n";
  };
  out << "ibart fit summary\n";
  out << "mode: " << to_string(trace.mode) << "\n";
  out << "n: " << trace.n << "  p: " << trace.p << "\n";
  out << "iterations: " << cfg.hp.iterations << "  burn_in: " << cfg.hp.burn_in
      << "  thin: " << cfg.hp.thin << "  seed: " << cfg.hp.seed << "\n";
  out << "retained draws: " << trace.size() << "\n";
  out << "response: shift=" << format_g6(trace.y_shift) << " scale=" << format_g6(trace.y_scale)
      << "\n\n";
  out << "posterior means [95% interval]:\n";
  line("sigma2 (standardized)", s2);
  line("sigma  (original)    ", sig_orig);
  if (trace.mode == Mode::infinite) {
    line("gamma                ", gamma);
    line("delta                ", delta);
    line("eta                  ", eta);
  }
  line("active trees K_n     ", kn);
  out << "\nin-sample MSE (standardized): " << format_g6(mse_std) << "\n";
  out << "in-sample MSE (original):     " << format_g6(mse_std * trace.y_scale * trace.y_scale)
      << "\n";
  return out.str();
}

int cmd_fit(const FitArgs& a) {
  const std::string started = timestamp_utc();
  const SamplerConfig cfg = resolve_fit_config(a);
  const Dataset data =
      load_csv(a.data, a.target,
               a.treatment.empty() ? std::nullopt : std::optional<std::string>(a.treatment));

  Rng rng(cfg.hp.seed);
  TraceStore trace = run_chain(data, cfg, rng);

  fs::create_directories(a.out);
  const auto out = fs::path(a.out);
  std::vector<std::string> artifacts;

  write_trace_csv(trace, (out / "trace.csv").string());
  artifacts.push_back("trace.csv");

  std::vector<PosteriorSummary> f_hat(data.n());
  for (int i = 0; i < data.n(); ++i) f_hat[i] = estimate_f_insample(trace, i);
  {
    std::ostringstream fit;
    fit << "row,y_orig,f_mean_orig,f_lo_orig,f_hi_orig,f_mean_std,f_lo_std,f_hi_std\n";
    for (int i = 0; i < data.n(); ++i) {
      const auto& s = f_hat[i];
      fit << i << ',' << format_g17(data.y_original(i)) << ','
          << format_g17(unstandardize(s.mean, trace.y_shift, trace.y_scale)) << ','
          << format_g17(unstandardize(s.lower, trace.y_shift, trace.y_scale)) << ','
          << format_g17(unstandardize(s.upper, trace.y_shift, trace.y_scale)) << ','
          << format_g17(s.mean) << ',' << format_g17(s.lower) << ',' << format_g17(s.upper)
          << '\n';
    }
    write_text((out / "fit.csv").string(), fit.str());
    artifacts.push_back("fit.csv");
  }
  {
    const auto pooled = variable_importance(trace, ImportanceKind::pooled);
    const auto per_tree = variable_importance(trace, ImportanceKind::per_tree);
    std::ostringstream imp;
    imp << "variable,importance,importance_per_tree\n";
    for (int j = 0; j < trace.p; ++j)
      imp << trace.column_names[j] << ',' << format_g17(pooled[j]) << ','
          << format_g17(per_tree[j]) << '\n';
    write_text((out / "importance.csv").string(), imp.str());
    artifacts.push_back("importance.csv");
  }
  write_text((out / "summary.txt").string(), fit_summary_text(trace, data, cfg, f_hat));
  artifacts.push_back("summary.txt");
  if (cfg.record_ensembles) {
    write_ensembles(trace, (out / "ensembles.txt").string());
    artifacts.push_back("ensembles.txt");
  }

  const Json manifest =
      make_manifest("fit", g_argv, cfg.hp.seed, {{a.data, file_digest(a.data)}}, config_json(cfg),
                    dataset_info(data, a.data, a.target, a.treatment), artifacts, started,
                    timestamp_utc());
  write_text((out / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "fit complete: " << trace.size() << " retained draws, outputs under " << a.out
            << "\n";
  return 0;
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
  std::string run;
  std::string data;
  std::string target;
  int alternations = 5;
  bool plugin = false;
  std::uint64_t seed = 1;
  std::string out;
};

Matrix align_columns(const FeatureTable& table, const std::vector<std::string>& training_names) {
  std::vector<int> map(training_names.size(), -1);
  for (size_t j = 0; j < training_names.size(); ++j) {
    for (size_t c = 0; c < table.column_names.size(); ++c) {
      if (table.column_names[c] == training_names[j]) {
        map[j] = static_cast<int>(c);
        break;
      }
    }
    if (map[j] < 0)
      throw std::runtime_error("schema mismatch: new data lacks column '" + training_names[j] +
                               "'");
  }
  Matrix x(table.x.rows(), static_cast<int>(training_names.size()));
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = table.x(i, map[j]);
  return x;
}

int cmd_predict(const PredictArgs& a) {
  const std::string started = timestamp_utc();
  LoadedRun run = load_run(a.run);
  const std::string target = a.target.empty() ? run.target : a.target;
  const FeatureTable table = load_features(a.data, target);
  const Matrix x_new = align_columns(table, run.trace.column_names);

  PredictOptions opts;
  opts.alternations = a.alternations;
  opts.method = a.plugin ? PredictMethod::plugin : PredictMethod::alternation;
  Rng rng(a.seed);
  const auto res = predict_out_of_sample(run.trace, x_new, rng, opts);

  const std::string out_dir = a.out.empty() ? (fs::path(a.run) / "predict").string() : a.out;
  fs::create_directories(out_dir);

  std::ostringstream tbl;
  tbl << "row,mean_orig,lo_orig,hi_orig,mean_std,lo_std,hi_std";
  const bool have_truth = !table.target.empty();
  if (have_truth) tbl << ",y_orig";
  tbl << '\n';
  double mse_std = 0.0;
  for (int i = 0; i < x_new.rows(); ++i) {
    const auto& s = res.rows[i];
    tbl << i << ',' << format_g17(unstandardize(s.mean, run.trace.y_shift, run.trace.y_scale))
        << ',' << format_g17(unstandardize(s.lower, run.trace.y_shift, run.trace.y_scale)) << ','
        << format_g17(unstandardize(s.upper, run.trace.y_shift, run.trace.y_scale)) << ','
        << format_g17(s.mean) << ',' << format_g17(s.lower) << ',' << format_g17(s.upper);
    if (have_truth) {
      tbl << ',' << format_g17(table.target[i]);
      const double e = (table.target[i] - run.trace.y_shift) / run.trace.y_scale - s.mean;
      mse_std += e * e;
    }
    tbl << '\n';
  }
  write_text((fs::path(out_dir) / "predictions.csv").string(), tbl.str());
  std::vector<std::string> artifacts{"predictions.csv"};

  if (have_truth) {
    mse_std /= x_new.rows();
    std::ostringstream s;
    s << "test MSE (standardized): " << format_g6(mse_std) << "\n";
    s << "test MSE (original):     "
      << format_g6(mse_std * run.trace.y_scale * run.trace.y_scale) << "\n";
    write_text((fs::path(out_dir) / "predict_summary.txt").string(), s.str());
    artifacts.push_back("predict_summary.txt");
  }

  Json cfg;
  cfg["alternations"] = opts.alternations;
  cfg["method"] = a.plugin ? "plugin" : "alternation";
  const Json manifest =
      make_manifest("predict", g_argv, a.seed, {{a.data, file_digest(a.data)}}, cfg, Json(),
                    artifacts, started, timestamp_utc());
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote predictions for " << x_new.rows() << " rows under " << out_dir << "\n";
  return 0;
}

// --------------------------------------------------------------------- pdp

struct PdpArgs {
  std::string run;
  std::string vars;
  int grid_points = 20;
  std::string out;
};

int cmd_pdp(const PdpArgs& a) {
  const std::string started = timestamp_utc();
  LoadedRun run = load_run(a.run);
  const Dataset data = load_csv(run.data_path, run.target);

  std::vector<int> vars;
  std::stringstream ss(a.vars);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    int idx = data.column_index(tok);
    if (idx < 0) {
      try {
        idx = std::stoi(tok) - 1;  // 1-based index
      } catch (...) {
        idx = -1;
      }
    }
    if (idx < 0 || idx >= data.p()) throw std::runtime_error("unknown variable: " + tok);
    vars.push_back(idx);
  }
  if (vars.empty()) throw std::runtime_error("--vars is empty");

  const std::string out_dir = a.out.empty() ? (fs::path(a.run) / "pdp").string() : a.out;
  fs::create_directories(out_dir);
  std::vector<std::string> artifacts;

  for (int s : vars) {
    const auto grid = pdp_default_grid(data, s, a.grid_points);
    const auto pdp = partial_dependence(run.trace, data, s, grid);
    std::ostringstream tbl;
    tbl << "x,mean_orig,lo_orig,hi_orig,mean_std,lo_std,hi_std\n";
    for (const auto& pt : pdp) {
      tbl << format_g17(pt.x) << ','
          << format_g17(unstandardize(pt.value.mean, run.trace.y_shift, run.trace.y_scale)) << ','
          << format_g17(unstandardize(pt.value.lower, run.trace.y_shift, run.trace.y_scale)) << ','
          << format_g17(unstandardize(pt.value.upper, run.trace.y_shift, run.trace.y_scale)) << ','
          << format_g17(pt.value.mean) << ',' << format_g17(pt.value.lower) << ','
          << format_g17(pt.value.upper) << '\n';
    }
    std::string name = data.column_names[s];
    for (auto& c : name)
      if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    const std::string file = "pdp_" + name + ".csv";
    write_text((fs::path(out_dir) / file).string(), tbl.str());
    artifacts.push_back(file);
  }

  Json cfg;
  cfg["vars"] = a.vars;
  cfg["grid_points"] = a.grid_points;
  const Json manifest =
      make_manifest("pdp", g_argv, 0, {}, cfg, Json(), artifacts, started, timestamp_utc());
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote " << artifacts.size() << " partial dependence tables under " << out_dir
            << "\n";
  return 0;
}

// --------------------------------------------------------------------- ate

struct AteArgs {
  std::string run;
  std::string treatment;
  std::string out;
};

int cmd_ate(const AteArgs& a) {
  const std::string started = timestamp_utc();
  LoadedRun run = load_run(a.run);
  const std::string treatment = a.treatment.empty() ? run.treatment : a.treatment;
  if (treatment.empty())
    throw std::runtime_error("no treatment column: pass --treatment or set it at fit time");
  const Dataset data = load_csv(run.data_path, run.target);
  const int t_col = data.column_index(treatment);
  if (t_col < 0) throw std::runtime_error("treatment column '" + treatment + "' not found");

  const auto res = average_treatment_effect(run.trace, data, t_col);

  const std::string out_dir = a.out.empty() ? (fs::path(a.run) / "ate").string() : a.out;
  fs::create_directories(out_dir);

  std::ostringstream draws;
  draws << "draw,ate_orig\n";
  for (size_t l = 0; l < res.draws.size(); ++l)
    draws << l << ',' << format_g17(res.draws[l]) << '\n';
  write_text((fs::path(out_dir) / "ate_draws.csv").string(), draws.str());

  std::ostringstream s;
  s << "ATE posterior mean (original units): " << format_g6(res.summary.mean) << "\n";
  s << "95% interval: [" << format_g6(res.summary.lower) << ", " << format_g6(res.summary.upper)
    << "]\n";
  s << "draws: " << res.draws.size() << "\n";
  write_text((fs::path(out_dir) / "ate_summary.txt").string(), s.str());

  Json cfg;
  cfg["treatment"] = treatment;
  const Json manifest =
      make_manifest("ate", g_argv, 0, {}, cfg, Json(), {"ate_draws.csv", "ate_summary.txt"},
                    started, timestamp_utc());
  write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "ATE " << format_g6(res.summary.mean) << " [" << format_g6(res.summary.lower)
            << ", " << format_g6(res.summary.upper) << "]\n";
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  std::string data;
  std::string target = "y";
  std::string config;
  std::string dgp;
  int n = 100;
  int p = 10;
  double noise_sd = 1.0;
  double gamma = 10.0, delta = 20.0, eta = -5.0, leaf_sd = 1.0;
  int groups = 5;
  std::string mode = "both";
  int trees = 200;
  int replicates = 10;
  std::uint64_t seed = 1;
  int iters = 5000;
  int burnin = 1000;
  int thin = 1;
  int alternations = 5;
  std::string out = "bench_out";
};

struct BenchRow {
  double mse_std_inf = 0.0, mse_std_cls = 0.0;
};

int cmd_bench(const BenchArgs& a) {
  const std::string started = timestamp_utc();
  const bool run_inf = a.mode == "both" || a.mode == "infinite";
  const bool run_cls = a.mode == "both" || a.mode == "classic";
  if (!run_inf && !run_cls) throw std::runtime_error("--mode must be infinite, classic or both");

  std::optional<Dataset> fixed;
  if (!a.data.empty()) fixed = load_csv(a.data, a.target);

  DgpSpec spec;
  if (!a.dgp.empty()) {
    spec.kind = dgp_from_string(a.dgp);
    spec.n = a.n;
    spec.p = a.p;
    spec.noise_sd = a.noise_sd;
    spec.gamma = a.gamma;
    spec.delta = a.delta;
    spec.eta = a.eta;
    spec.leaf_sd = a.leaf_sd;
    spec.groups = a.groups;
    spec.validate();
  } else if (!fixed) {
    throw std::runtime_error("bench needs --data or --dgp");
  }

  std::vector<BenchRow> rows(a.replicates);
  std::vector<double> scales(a.replicates, 1.0);

  run_parallel(a.replicates, [&](int r) {
    Rng rng(split_seed(a.seed, r));
    Dataset base;
    if (fixed) {
      base = *fixed;
    } else {
      DgpSpec s = spec;
      s.seed = rng.raw();
      base = generate(s).data;
    }
    auto [train, test] = split(base, 0.8, rng);
    scales[r] = train.y_scale;

    const auto fit_and_score = [&](Mode mode) {
      SamplerConfig cfg;
      if (!a.config.empty()) apply_config_file(a.config, cfg);
      cfg.hp.mode = mode;
      cfg.hp.classic_k = a.trees;
      cfg.hp.iterations = a.iters;
      cfg.hp.burn_in = a.burnin;
      cfg.hp.thin = a.thin;
      cfg.record_ensembles = true;
      cfg.ensemble_thin = 5;  // prediction over every 5th retained draw
      Rng chain_rng(rng.raw());
      TraceStore trace = run_chain(train, cfg, chain_rng);
      PredictOptions opts;
      opts.alternations = a.alternations;
      Rng pred_rng(rng.raw());
      const auto pred = predict_out_of_sample(trace, test.X, pred_rng, opts);
      double mse = 0.0;
      for (int i = 0; i < test.n(); ++i) {
        const double e = test.y[i] - pred.rows[i].mean;
        mse += e * e;
      }
      return mse / test.n();
    };
    if (run_inf) rows[r].mse_std_inf = fit_and_score(Mode::infinite);
    if (run_cls) rows[r].mse_std_cls = fit_and_score(Mode::classic);
  });

  fs::create_directories(a.out);
  std::ostringstream tbl;
  tbl << "replicate";
  if (run_inf) tbl << ",mse_std_infinite,mse_orig_infinite";
  if (run_cls) tbl << ",mse_std_classic,mse_orig_classic";
  tbl << '\n';
  double sum_inf = 0.0, sum_cls = 0.0, sum_inf_o = 0.0, sum_cls_o = 0.0;
  for (int r = 0; r < a.replicates; ++r) {
    const double s2 = scales[r] * scales[r];
    tbl << r + 1;
    if (run_inf) {
      tbl << ',' << format_g17(rows[r].mse_std_inf) << ',' << format_g17(rows[r].mse_std_inf * s2);
      sum_inf += rows[r].mse_std_inf;
      sum_inf_o += rows[r].mse_std_inf * s2;
    }
    if (run_cls) {
      tbl << ',' << format_g17(rows[r].mse_std_cls) << ',' << format_g17(rows[r].mse_std_cls * s2);
      sum_cls += rows[r].mse_std_cls;
      sum_cls_o += rows[r].mse_std_cls * s2;
    }
    tbl << '\n';
  }
  if (a.replicates > 1) {
    tbl << "mean";
    if (run_inf)
      tbl << ',' << format_g17(sum_inf / a.replicates) << ','
          << format_g17(sum_inf_o / a.replicates);
    if (run_cls)
      tbl << ',' << format_g17(sum_cls / a.replicates) << ','
          << format_g17(sum_cls_o / a.replicates);
    tbl << '\n';
  }
  write_text((fs::path(a.out) / "bench.csv").string(), tbl.str());

  Json cfg;
  cfg["mode"] = a.mode;
  cfg["replicates"] = a.replicates;
  cfg["iterations"] = a.iters;
  cfg["burn_in"] = a.burnin;
  cfg["trees"] = a.trees;
  cfg["alternations"] = a.alternations;
  if (!a.dgp.empty()) {
    cfg["dgp"] = a.dgp;
    cfg["n"] = a.n;
    cfg["p"] = a.p;
  }
  std::vector<ManifestInput> inputs;
  if (!a.data.empty()) inputs.push_back({a.data, file_digest(a.data)});
  const Json manifest = make_manifest("bench", g_argv, a.seed, inputs, cfg, Json(), {"bench.csv"},
                                      started, timestamp_utc());
  write_text((fs::path(a.out) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "bench complete: " << a.replicates << " replicates, table under " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_argv.push_back(argv[i]);

  CLI::App app{"Infinite BART: Bayesian additive regression trees with an adaptive tree count"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  c_sim->add_option("--dgp", sim.dgp, "friedman | clustered_friedman | ibp_synthetic | causal")
      ->required();
  c_sim->add_option("--n", sim.n, "number of observations")->required();
  c_sim->add_option("--p", sim.p, "number of covariates (friedman family)");
  c_sim->add_option("--noise-sd", sim.noise_sd, "noise standard deviation");
  c_sim->add_option("--gamma", sim.gamma, "ibp_synthetic: gamma");
  c_sim->add_option("--delta", sim.delta, "ibp_synthetic: delta");
  c_sim->add_option("--eta", sim.eta, "ibp_synthetic: eta");
  c_sim->add_option("--leaf-sd", sim.leaf_sd, "ibp_synthetic: leaf value sd");
  c_sim->add_option("--groups", sim.groups, "clustered_friedman: group count");
  c_sim->add_option("--seed", sim.seed, "generator seed");
  c_sim->add_option("--out", sim.out, "output directory");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Run the MCMC sampler on a CSV dataset");
  c_fit->add_option("--data", fit.data, "training CSV")->required();
  c_fit->add_option("--target", fit.target, "response column name");
  c_fit->add_option("--treatment", fit.treatment, "binary treatment column (validated, recorded)");
  c_fit->add_option("--config", fit.config, "key = value config file");
  c_fit->add_option("--mode", fit.mode, "infinite | classic");
  auto* o_trees = c_fit->add_option("--trees", fit.trees, "tree count in classic mode");
  auto* o_seed = c_fit->add_option("--seed", fit.seed, "chain seed");
  auto* o_iters = c_fit->add_option("--iters", fit.iters, "retained iterations");
  auto* o_burn = c_fit->add_option("--burnin", fit.burnin, "burn-in iterations");
  auto* o_thin = c_fit->add_option("--thin", fit.thin, "thinning interval");
  c_fit->add_flag("--retain-ensembles", fit.retain_ensembles,
                  "serialize per-draw ensembles for predict/pdp/ate");
  c_fit->add_option("--ensemble-thin", fit.ensemble_thin, "keep every t-th draw's ensemble");
  c_fit->add_option("--out", fit.out, "run directory");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Out-of-sample prediction from a fit run");
  c_pred->add_option("--run", pred.run, "fit run directory")->required();
  c_pred->add_option("--data", pred.data, "CSV with new covariate rows")->required();
  c_pred->add_option("--target", pred.target, "truth column for test MSE (optional)");
  c_pred->add_option("--alternations", pred.alternations, "activation resampling rounds");
  c_pred->add_flag("--plugin-expectation", pred.plugin,
                   "use the plug-in activation expectation instead of sampling");
  c_pred->add_option("--seed", pred.seed, "prediction seed");
  c_pred->add_option("--out", pred.out, "output directory (default <run>/predict)");

  PdpArgs pdp;
  auto* c_pdp = app.add_subcommand("pdp", "Partial dependence tables from a fit run");
  c_pdp->add_option("--run", pdp.run, "fit run directory")->required();
  c_pdp->add_option("--vars", pdp.vars, "comma list of column names or 1-based indices")
      ->required();
  c_pdp->add_option("--grid-points", pdp.grid_points, "grid size per variable");
  c_pdp->add_option("--out", pdp.out, "output directory (default <run>/pdp)");

  AteArgs ate;
  auto* c_ate = app.add_subcommand("ate", "Average treatment effect from a fit run");
  c_ate->add_option("--run", ate.run, "fit run directory")->required();
  c_ate->add_option("--treatment", ate.treatment, "binary treatment column");
  c_ate->add_option("--out", ate.out, "output directory (default <run>/ate)");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Train/test MSE comparison over replicates");
  c_bench->add_option("--data", bench.data, "CSV dataset (split per replicate)");
  c_bench->add_option("--target", bench.target, "response column name");
  c_bench->add_option("--config", bench.config, "key = value config file");
  c_bench->add_option("--dgp", bench.dgp, "generator (fresh data per replicate)");
  c_bench->add_option("--n", bench.n, "generator: observations");
  c_bench->add_option("--p", bench.p, "generator: covariates");
  c_bench->add_option("--noise-sd", bench.noise_sd, "generator: noise sd");
  c_bench->add_option("--gamma", bench.gamma, "ibp_synthetic: gamma");
  c_bench->add_option("--delta", bench.delta, "ibp_synthetic: delta");
  c_bench->add_option("--eta", bench.eta, "ibp_synthetic: eta");
  c_bench->add_option("--leaf-sd", bench.leaf_sd, "ibp_synthetic: leaf value sd");
  c_bench->add_option("--groups", bench.groups, "clustered_friedman: group count");
  c_bench->add_option("--mode", bench.mode, "infinite | classic | both");
  c_bench->add_option("--trees", bench.trees, "classic-mode tree count");
  c_bench->add_option("--replicates", bench.replicates, "replicate count");
  c_bench->add_option("--seed", bench.seed, "master seed");
  c_bench->add_option("--iters", bench.iters, "retained iterations per fit");
  c_bench->add_option("--burnin", bench.burnin, "burn-in per fit");
  c_bench->add_option("--thin", bench.thin, "thinning interval per fit");
  c_bench->add_option("--alternations", bench.alternations, "prediction resampling rounds");
  c_bench->add_option("--out", bench.out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_fit) {
      fit.trees_given = o_trees->count() > 0;
      fit.seed_given = o_seed->count() > 0;
      fit.iters_given = o_iters->count() > 0;
      fit.burnin_given = o_burn->count() > 0;
      fit.thin_given = o_thin->count() > 0;
      return cmd_fit(fit);
    }
    if (*c_pred) return cmd_predict(pred);
    if (*c_pdp) return cmd_pdp(pdp);
    if (*c_ate) return cmd_ate(ate);
    if (*c_bench) return cmd_bench(bench);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
