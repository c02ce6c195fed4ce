#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ibart {

/// Binary activation matrix W, stored column-major over the active columns
/// only, with per-column counts m_k kept in sync with the entries.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  explicit WeightMatrix(int rows) : rows_(rows) {}

  static WeightMatrix ones(int rows, int cols) {
    WeightMatrix w(rows);
    for (int k = 0; k < cols; ++k) w.append_column(std::vector<std::uint8_t>(rows, 1));
    return w;
  }

  int rows() const { return rows_; }
  int cols() const { return static_cast<int>(cols_.size()); }

  std::uint8_t get(int i, int k) const { return cols_[k][i]; }

  void set(int i, int k, std::uint8_t v) {
    std::uint8_t& cell = cols_[k][i];
    counts_[k] += static_cast<int>(v) - static_cast<int>(cell);
    cell = v;
  }

  int count(int k) const { return counts_[k]; }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<std::uint8_t>& column(int k) const { return cols_[k]; }

  void append_column(std::vector<std::uint8_t> col) {
    if (static_cast<int>(col.size()) != rows_) throw std::invalid_argument("WeightMatrix: column length");
    int m = 0;
    for (auto v : col) m += v;
    cols_.push_back(std::move(col));
    counts_.push_back(m);
  }

  /// Column holding a single 1 at the given row.
  void append_singleton_column(int row) {
    std::vector<std::uint8_t> col(rows_, 0);
    col[row] = 1;
    append_column(std::move(col));
  }

  void erase_column(int k) {
    cols_.erase(cols_.begin() + k);
    counts_.erase(counts_.begin() + k);
  }

  /// Recomputed column sums must match the stored counts; all stored
  /// columns must be active (m_k >= 1).
  void check_counts() const {
    for (int k = 0; k < cols(); ++k) {
      int m = 0;
      for (auto v : cols_[k]) m += v;
      if (m != counts_[k]) throw std::logic_error("WeightMatrix: stale column count");
      if (m < 1) throw std::logic_error("WeightMatrix: inactive column retained");
    }
  }

 private:
  int rows_ = 0;
  std::vector<std::vector<std::uint8_t>> cols_;
  std::vector<int> counts_;
};

}  // namespace ibart
