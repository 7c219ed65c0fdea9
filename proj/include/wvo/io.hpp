#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "wvo/diagnostics.hpp"
#include "wvo/model.hpp"
#include "wvo/objective.hpp"
#include "wvo/optimizer.hpp"
#include "wvo/sampler.hpp"
#include "wvo/virtual_obs.hpp"

namespace wvo {

namespace fs = std::filesystem;

inline constexpr int kWvoSchemaVersion = 1;

/// 64-bit FNV-1a, chainable through `h`.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t h);

/// Shortest round-trip decimal; "inf", "-inf" and "nan" for non-finite values.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Stamp written as the first line of every output file.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string comment() const;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // without the leading '#'

  /// Throws DataError when the column is absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Comma separated, no quoting. Lines starting with '#' are comments; blank lines are skipped.
CsvTable read_csv(const fs::path& path);

/// Flat data: column `y` plus an optional aux column (`sigma` or `n`).
ObservationSet read_observations(const fs::path& path, const ModelFamily& family);
/// Grouped data: a `group` label column, `y`, and an optional aux column. Groups keep
/// their first-appearance order. Without a `group` column every row joins one group "all".
GroupedData read_grouped(const fs::path& path, const ModelFamily& family);

void write_samples_csv(const fs::path& path, const PosteriorSamples& samples, const Provenance& prov);
PosteriorSamples read_samples_csv(const fs::path& path);

/// parameter, ess, mean, sd (natural coordinates) plus per-chain acceptance comments.
void write_ess_csv(const fs::path& path, const ModelFamily& family, const PosteriorSamples& samples,
                   const Provenance& prov);

void write_group_table_csv(const fs::path& path, const GroupLikTable& table, const std::vector<std::string>& labels,
                           const Provenance& prov);
GroupLikTable read_group_table_csv(const fs::path& path);

void write_trace_csv(const fs::path& path, const OptimizationResult& result, const Provenance& prov);

std::uint64_t context_hash(const SingleLevelContext& ctx);
std::uint64_t context_hash(const MultiLevelContext& ctx);

/// CSV matrices plus manifest.json.
void write_context(const fs::path& dir, const SingleLevelContext& ctx, const Provenance& prov);
void write_context(const fs::path& dir, const MultiLevelContext& ctx, const Provenance& prov);

/// The interchange artifact: virtual values, weights and budgets.
struct WvoFile {
  int schema_version = kWvoSchemaVersion;
  std::string model;
  VirtualObservationSet vobs;
  WeightAssignment weights;
  double budget = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string context_hash;
};

/// Near-zero weights are rounded to 0 (see round_small_weights) before writing.
nlohmann::json to_json(const WvoFile& file);
WvoFile wvo_from_json(const nlohmann::json& j);
void write_wvo(const fs::path& path, const WvoFile& file);
WvoFile read_wvo(const fs::path& path);

void write_comparison_csv(const fs::path& path, const PosteriorComparison& wvo, const PosteriorComparison* control,
                          const Thresholds& thresholds, const Provenance& prov);

/// Writes `text` to `path` atomically (temporary file + rename).
void write_text(const fs::path& path, const std::string& text);

}  // namespace wvo
