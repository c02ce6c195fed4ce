#include "ibart/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ibart {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace and a trailing CR
    size_t b = cell.find_first_not_of(" \t\r");
    size_t e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target,
                 const std::optional<std::string>& treatment) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  const std::vector<std::string> header = split_line(line);
  if (header.empty()) throw std::runtime_error("unparseable header in " + path);

  int target_col = -1;
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] == target) target_col = static_cast<int>(j);
  if (target_col < 0) throw std::runtime_error("target column '" + target + "' not found");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("row with " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    bool missing = false;
    for (const auto& c : cells)
      if (is_missing(c)) { missing = true; break; }
    if (!missing) rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw std::runtime_error("no complete rows in " + path);

  const int n = static_cast<int>(rows.size());
  const int ncols = static_cast<int>(header.size());

  // column j is numeric iff every retained cell parses as a double
  std::vector<bool> numeric(ncols, true);
  for (int j = 0; j < ncols; ++j) {
    double v;
    for (const auto& r : rows)
      if (!parse_double(r[j], v)) { numeric[j] = false; break; }
  }
  if (!numeric[target_col]) throw std::runtime_error("target column must be numeric");

  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) parse_double(rows[i][target_col], y[i]);

  // expand covariates in original column order
  std::vector<std::string> names;
  std::vector<ColumnEncoding> encodings;
  std::vector<std::vector<double>> cols;
  for (int j = 0; j < ncols; ++j) {
    if (j == target_col) continue;
    ColumnEncoding enc;
    enc.original_name = header[j];
    enc.first = static_cast<int>(cols.size());
    if (numeric[j]) {
      std::vector<double> col(n);
      for (int i = 0; i < n; ++i) parse_double(rows[i][j], col[i]);
      cols.push_back(std::move(col));
      names.push_back(header[j]);
    } else {
      enc.categorical = true;
      std::set<std::string> levels;
      for (const auto& r : rows) levels.insert(r[j]);
      for (const auto& level : levels) {
        std::vector<double> col(n);
        for (int i = 0; i < n; ++i) col[i] = rows[i][j] == level ? 1.0 : 0.0;
        cols.push_back(std::move(col));
        names.push_back(header[j] + "_" + level);
      }
    }
    enc.last = static_cast<int>(cols.size());
    encodings.push_back(std::move(enc));
  }
  if (cols.empty()) throw std::runtime_error("no covariate columns in " + path);

  Matrix X(n, static_cast<int>(cols.size()));
  for (int j = 0; j < X.cols(); ++j)
    for (int i = 0; i < n; ++i) X(i, j) = cols[j][i];

  Dataset d = make_dataset(std::move(X), y, names);
  d.encoding_map = std::move(encodings);

  if (treatment) {
    const int t = d.column_index(*treatment);
    if (t < 0) throw std::runtime_error("treatment column '" + *treatment + "' not found");
    for (int i = 0; i < n; ++i) {
      const double v = d.X(i, t);
      if (v != 0.0 && v != 1.0) throw std::runtime_error("treatment column must be binary 0/1");
    }
  }
  return d;
}

void write_dataset_csv(const Dataset& data, const std::string& path, const std::string& target) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << target;
  for (const auto& name : data.column_names) out << ',' << name;
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    out << format_g17(data.y_original(i));
    for (int j = 0; j < data.p(); ++j) out << ',' << format_g17(data.X(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split: fraction must be in (0,1)");
  const int n = data.n();
  const int n_train = static_cast<int>(std::llround(fraction * n));
  if (n_train < 1 || n_train >= n) throw std::invalid_argument("split: a side would be empty");

  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);

  auto take = [&](int from, int count) {
    Matrix X(count, data.p());
    std::vector<double> y(count);
    for (int r = 0; r < count; ++r) {
      const int src = idx[from + r];
      for (int j = 0; j < data.p(); ++j) X(r, j) = data.X(src, j);
      y[r] = data.y_original(src);
    }
    return std::pair<Matrix, std::vector<double>>{std::move(X), std::move(y)};
  };

  auto [x_train, y_train] = take(0, n_train);
  auto [x_test, y_test] = take(n_train, n - n_train);

  Dataset train = make_dataset(std::move(x_train), y_train, data.column_names);
  train.encoding_map = data.encoding_map;

  Dataset test;
  test.X = std::move(x_test);
  test.y.resize(y_test.size());
  test.y_shift = train.y_shift;
  test.y_scale = train.y_scale;
  for (size_t i = 0; i < y_test.size(); ++i) test.y[i] = (y_test[i] - train.y_shift) / train.y_scale;
  test.column_names = data.column_names;
  test.encoding_map = data.encoding_map;
  test.validate();
  return {std::move(train), std::move(test)};
}

}  // namespace ibart
