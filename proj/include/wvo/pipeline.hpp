#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wvo/diagnostics.hpp"
#include "wvo/objective.hpp"
#include "wvo/optimizer.hpp"
#include "wvo/sampler.hpp"
#include "wvo/virtual_obs.hpp"

namespace wvo {

/// Knobs shared by every pipeline stage. Zero sizes mean "use the data size".
struct PipelineConfig {
  SamplerConfig sampler;
  OptimizerConfig optimizer;
  std::size_t n_virtual = 0;  // single level, default N*
  std::size_t k_virtual = 0;  // multi level, default K*
  std::size_t m_virtual = 10;
  std::size_t forward_draws = 100;
  std::uint64_t seed = 1;
  Thresholds thresholds;

  /// Stable text form used for the config hash.
  std::string canonical() const;
  std::string hash() const;
};

/// Sub-seeds for the pipeline stages, all derived from config.seed.
enum class Stage : std::uint64_t { kFit = 1, kTable, kVirtual, kOptimize, kRefit, kControl, kFold };
std::uint64_t stage_seed(std::uint64_t seed, Stage stage, std::uint64_t index = 0);

struct Reconstruction {
  VirtualObservationSet vobs;
  WeightAssignment weights;
  double budget = 0.0;
  OptimizationResult result;
  std::string context_hash;
  std::optional<SingleLevelContext> single;
  std::optional<MultiLevelContext> multi;
  std::optional<GroupLikTable> table;
};

/// Draw a virtual set, build the context and optimize the weights.
Reconstruction reconstruct_single(const ModelFamily& family, const PosteriorSamples& samples,
                                  const ObservationSet& data, const PipelineConfig& config);
/// The group likelihood table is estimated unless `table` is given. Uses the K=1
/// objective when both the data and the virtual set have a single group.
Reconstruction reconstruct_multi(const ModelFamily& family, const PosteriorSamples& samples,
                                 const GroupedData& data, const PipelineConfig& config,
                                 const GroupLikTable* table = nullptr);

/// Uniform weights on the same virtual set (negative control).
WeightAssignment uniform_weights(const VirtualObservationSet& vobs, double budget);

struct Validation {
  PosteriorSamples reconditioned;  // natural coordinates
  PosteriorComparison comparison;
  std::optional<PosteriorComparison> control;
  bool pass = false;
};

/// Samples the reconditioned model and compares it with `reference` in natural coordinates.
Validation validate_reconstruction(std::shared_ptr<const ModelFamily> family, const PosteriorSamples& reference,
                                   const VirtualObservationSet& vobs, const WeightAssignment& weights,
                                   double budget, const PipelineConfig& config, bool with_control);

struct PosteriorSummary {
  std::vector<double> mean;  // natural coordinates
  std::vector<double> sd;
};

PosteriorSummary summarize(const ModelFamily& family, const PosteriorSamples& samples);

struct FoldRecord {
  std::string held_out;
  PosteriorSummary full;         // all K* groups
  PosteriorSummary wvo;          // WVO of the other groups + held-out group
  std::optional<PosteriorSummary> meb;
  PosteriorComparison reconstruction;  // reconditioned vs training posterior
  bool reconstruction_pass = false;
  PosteriorComparison incremental;     // WVO + held-out vs full posterior
};

/// One leave-one-out fold. MEB is run when `meb_kinds` is nonempty.
FoldRecord loo_fold(std::shared_ptr<const ModelFamily> family, const GroupedData& data, std::size_t held_out,
                    const PipelineConfig& config, const std::vector<FittedMarginal::Kind>& meb_kinds,
                    const PosteriorSamples* full_posterior = nullptr);

/// Per-fold records for the chosen folds (all folds when `folds` is empty).
std::vector<FoldRecord> loo_cross_validation(std::shared_ptr<const ModelFamily> family, const GroupedData& data,
                                             const PipelineConfig& config,
                                             const std::vector<FittedMarginal::Kind>& meb_kinds,
                                             std::vector<std::size_t> folds = {});

struct SweepRow {
  std::size_t k_virtual = 0;
  std::string held_out;
  PosteriorSummary wvo;
};

/// Subsampling study: for each fold, one training fit and table, then WVO reconstructions
/// at each K̂ followed by the incremental update with the held-out group.
std::vector<SweepRow> sweep_k(std::shared_ptr<const ModelFamily> family, const GroupedData& data,
                              const PipelineConfig& config, const std::vector<std::size_t>& k_list,
                              std::vector<std::size_t> folds = {});

/// Standard deviation across folds of each posterior mean.
std::vector<double> fold_variation(const std::vector<PosteriorSummary>& summaries);

/// `count` evenly spaced indices in [0, n).
std::vector<std::size_t> spaced_folds(std::size_t n, std::size_t count);

}  // namespace wvo
