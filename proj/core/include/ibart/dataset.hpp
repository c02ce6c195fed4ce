#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ibart/matrix.hpp"

namespace ibart {

/// Result of min-max standardization of a response vector.
struct Standardization {
  std::vector<double> values;  // standardized, in [-0.5, 0.5]
  double shift = 0.0;          // midrange of the raw values
  double scale = 1.0;          // range of the raw values
};

/// Maps a standardized response back to original units.
inline double unstandardize(double y_std, double shift, double scale) {
  return y_std * scale + shift;
}

/// (y - midrange) / range, so the observed values span [-0.5, 0.5].
/// Throws std::invalid_argument("degenerate response") when max == min.
Standardization standardize(const std::vector<double>& y_raw);

/// Covariate ranges occupied by one original (pre-encoding) column.
/// Numeric columns map to a single index, categoricals to one index per level.
struct ColumnEncoding {
  std::string original_name;
  int first = 0;  // inclusive
  int last = 0;   // exclusive
  bool categorical = false;
};

/// Design matrix plus standardized response. X never contains missing values;
/// categorical inputs have already been dummy-coded one column per level.
struct Dataset {
  Matrix X;                    // n x p
  std::vector<double> y;       // standardized response, length n
  double y_shift = 0.0;
  double y_scale = 1.0;
  std::vector<std::string> column_names;  // length p
  std::vector<ColumnEncoding> encoding_map;

  int n() const { return X.rows(); }
  int p() const { return X.cols(); }

  double y_original(int i) const { return unstandardize(y[i], y_shift, y_scale); }

  /// Index of a covariate column by name; -1 when absent.
  int column_index(const std::string& name) const;

  /// Cheap structural sanity check (dimensions, finiteness).
  void validate() const;
};

/// Builds a Dataset from raw parts, standardizing the response.
Dataset make_dataset(Matrix X, const std::vector<double>& y_raw,
                     std::vector<std::string> column_names = {});

}  // namespace ibart
