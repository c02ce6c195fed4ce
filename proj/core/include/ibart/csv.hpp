#pragma once

#include <optional>
#include <string>
#include <utility>

#include "ibart/dataset.hpp"
#include "ibart/random.hpp"

namespace ibart {

/// Reads a comma-separated file with a mandatory header row. Rows with any
/// empty or "NA" cell are dropped; non-numeric columns are dummy-coded one
/// 0/1 column per level (names suffixed "_<level>", levels in sorted order);
/// the target column becomes the standardized response.
Dataset load_csv(const std::string& path, const std::string& target,
                 const std::optional<std::string>& treatment = std::nullopt);

/// Writes "<target>,<covariates...>" with the response in original units,
/// at full double precision so a reload reproduces the data exactly.
void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::string& target = "y");

/// Uniformly random train/test partition. The response is re-standardized
/// with parameters computed on the training part and applied to both.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, Rng& rng);

}  // namespace ibart
