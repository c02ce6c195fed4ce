#include "ibart/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ibart {

Standardization standardize(const std::vector<double>& y_raw) {
  if (y_raw.empty()) throw std::invalid_argument("standardize: empty response");
  const auto [lo_it, hi_it] = std::minmax_element(y_raw.begin(), y_raw.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw std::invalid_argument("degenerate response");
  Standardization out;
  out.shift = 0.5 * (lo + hi);
  out.scale = hi - lo;
  out.values.resize(y_raw.size());
  for (size_t i = 0; i < y_raw.size(); ++i) out.values[i] = (y_raw[i] - out.shift) / out.scale;
  return out;
}

int Dataset::column_index(const std::string& name) const {
  for (size_t j = 0; j < column_names.size(); ++j) {
    if (column_names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

void Dataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("Dataset: need n >= 1 and p >= 1");
  if (static_cast<int>(y.size()) != X.rows()) throw std::invalid_argument("Dataset: y length mismatch");
  if (!column_names.empty() && static_cast<int>(column_names.size()) != X.cols())
    throw std::invalid_argument("Dataset: column name count mismatch");
  if (!(y_scale > 0.0)) throw std::invalid_argument("Dataset: nonpositive y_scale");
  for (double v : X.data())
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite covariate");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite response");
}

Dataset make_dataset(Matrix X, const std::vector<double>& y_raw,
                     std::vector<std::string> column_names) {
  Dataset d;
  d.X = std::move(X);
  auto st = standardize(y_raw);
  d.y = std::move(st.values);
  d.y_shift = st.shift;
  d.y_scale = st.scale;
  if (column_names.empty()) {
    for (int j = 0; j < d.X.cols(); ++j) column_names.push_back("x" + std::to_string(j + 1));
  }
  d.column_names = std::move(column_names);
  d.encoding_map.clear();
  for (int j = 0; j < d.X.cols(); ++j)
    d.encoding_map.push_back({d.column_names[j], j, j + 1, false});
  d.validate();
  return d;
}

}  // namespace ibart
