#include "ibart/trace.hpp"

namespace ibart {

std::vector<double> TraceStore::split_fractions(int l) const {
  const TraceDraw& d = draws.at(l);
  std::vector<double> z(d.split_counts.size(), 0.0);
  if (d.total_splits > 0) {
    for (size_t j = 0; j < z.size(); ++j)
      z[j] = static_cast<double>(d.split_counts[j]) / d.total_splits;
  }
  return z;
}

}  // namespace ibart
