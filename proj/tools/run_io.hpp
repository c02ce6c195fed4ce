#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "ibart/csv.hpp"
#include "ibart/sampler.hpp"
#include "ibart/trace.hpp"

namespace ibart::cli {

using Json = nlohmann::ordered_json;

std::string format_g17(double v);
std::string format_g6(double v);

/// FNV-1a 64-bit digest of a file's bytes, as hex.
std::string file_digest(const std::string& path);

std::string timestamp_utc();

/// Flat "key = value" config file; '#' starts a comment.
/// Unknown keys are an error so typos do not silently fall back to defaults.
void apply_config_file(const std::string& path, SamplerConfig& cfg);

struct ManifestInput {
  std::string path;
  std::string digest;
};

Json make_manifest(const std::string& command, const std::vector<std::string>& argv,
                   std::uint64_t seed, const std::vector<ManifestInput>& inputs,
                   const Json& config, const Json& dataset_info,
                   const std::vector<std::string>& artifacts, const std::string& started,
                   const std::string& finished);

Json config_json(const SamplerConfig& cfg);

void write_text(const std::string& path, const std::string& content);

/// Covariate-only view of a CSV (same parsing rules as load_csv, no target).
struct FeatureTable {
  Matrix x;
  std::vector<std::string> column_names;
  std::vector<double> target;  // empty when the target column is absent
};
FeatureTable load_features(const std::string& path, const std::string& target_name);

/// Plain-text ensemble serialization: per draw the scalars, every tree as a
/// pre-order node list (split var/cut/obs or leaf value), then the
/// activation matrix as 0/1 rows.
void write_ensembles(const TraceStore& trace, const std::string& path);
TraceStore read_ensembles(const std::string& path);

void write_trace_csv(const TraceStore& trace, const std::string& path);

}  // namespace ibart::cli
