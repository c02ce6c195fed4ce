#pragma once

#include <vector>

#include "ibart/dataset.hpp"
#include "ibart/random.hpp"
#include "ibart/trace.hpp"

namespace ibart {

/// Posterior mean with an equal-tailed 95% interval from empirical
/// order statistics (type-7 interpolation).
struct PosteriorSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Type-7 quantile (linear interpolation of order statistics) of a copy of v.
double quantile_type7(std::vector<double> v, double prob);

PosteriorSummary summarize(const std::vector<double>& draws);

/// Regression-function estimate at training row i: per-draw fitted values
/// averaged over the trace (standardized scale).
PosteriorSummary estimate_f_insample(const TraceStore& trace, int i);

enum class ImportanceKind { pooled, per_tree };

/// v_j = average over draws of the proportion of splits on variable j.
/// pooled counts every split across active trees; per_tree averages each
/// splitting tree's own proportions first.
std::vector<double> variable_importance(const TraceStore& trace,
                                        ImportanceKind kind = ImportanceKind::pooled);

struct PdpPoint {
  double x = 0.0;
  PosteriorSummary value;  // standardized scale
};

/// 20 equally spaced points between the 5th and 95th percentile of column s.
std::vector<double> pdp_default_grid(const Dataset& data, int s, int points = 20);

/// Partial dependence of column s: for each grid value and draw, the fitted
/// ensemble output averaged over all training rows with column s overridden.
/// Needs ensembles retained in the trace.
std::vector<PdpPoint> partial_dependence(const TraceStore& trace, const Dataset& data, int s,
                                         const std::vector<double>& grid);

struct AteResult {
  std::vector<double> draws;  // original response units
  PosteriorSummary summary;
};

/// Average treatment effect of a binary covariate column: per draw, the mean
/// over rows of the fitted difference between the column forced to 1 and 0.
AteResult average_treatment_effect(const TraceStore& trace, const Dataset& data,
                                   int treatment_col);

enum class PredictMethod { alternation, plugin };

struct PredictOptions {
  int alternations = 5;
  PredictMethod method = PredictMethod::alternation;
  int k_trunc = 10;
};

struct PredictionResult {
  Matrix draws;  // trace draws x new rows, standardized scale
  std::vector<PosteriorSummary> rows;
};

/// Out-of-sample prediction. In infinite mode each retained ensemble is
/// extended with activation rows for the new points (sequential prior
/// conditional, then a few likelihood-driven resampling rounds); the emitted
/// value is the final ensemble fit without noise. Classic mode sums all trees.
PredictionResult predict_out_of_sample(const TraceStore& trace, const Matrix& x_new, Rng& rng,
                                       const PredictOptions& opts = {});

}  // namespace ibart
