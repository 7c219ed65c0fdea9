#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wvo/model.hpp"

namespace wvo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unnormalised log density over a flat state vector. The first exposed_dim()
/// coordinates are the ones reported in PosteriorSamples.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t exposed_dim() const { return dim(); }
  virtual std::vector<std::string> exposed_names() const = 0;
  virtual double log_density(std::span<const double> state) const = 0;
  virtual std::vector<double> initial_state() const = 0;
};

/// Log joint of a model family: prior(x) + sum of x-only evidence terms + observed data.
///
/// Multi-level groups either contribute their closed-form marginal p(y_k | x) or carry
/// explicit latents appended to the state after x. Only x is exposed.
class PosteriorTarget : public LogDensity {
 public:
  using Term = std::function<double(LatentPoint)>;

  /// `family` must outlive the target.
  explicit PosteriorTarget(const ModelFamily& family);

  /// Replaces the family prior (e.g. with a fitted parametric prior).
  void set_prior(Term prior);
  void add_evidence(Term term);
  void add_observations(ObservationSet ys);
  /// `collapse`: use group_marginal_loglik where the family provides one.
  void add_groups(const GroupedData& data, bool collapse);
  void set_initial(std::vector<double> x0);

  std::size_t dim() const override;
  std::size_t exposed_dim() const override { return family_.latent_dim(); }
  std::vector<std::string> exposed_names() const override { return family_.latent_names(); }
  double log_density(std::span<const double> state) const override;
  std::vector<double> initial_state() const override;

  const ModelFamily& family() const { return family_; }
  std::size_t latent_group_count() const { return latent_groups_.size(); }

 private:
  const ModelFamily& family_;
  Term prior_;
  std::vector<Term> evidence_;
  ObservationSet observations_;
  std::vector<ObservationSet> collapsed_groups_;
  std::vector<ObservationSet> latent_groups_;
  std::vector<double> initial_;
};

struct SamplerConfig {
  std::size_t n_samples = 5000;
  std::size_t warmup = 2000;
  std::size_t thin = 10;
  std::size_t n_chains = 4;
  /// 0 selects 0.44 for one-dimensional targets and 0.234 otherwise.
  double target_acceptance = 0.0;
  double initial_scale = 0.1;
  std::uint64_t seed = 1;
  /// Integrate group latents out where the family has a closed form.
  bool collapse_groups = true;

  /// Throws UsageError when an invariant is violated.
  void validate() const;
  double resolved_target(std::size_t dim) const;
};

/// Per-dimension proposal scales at one point of a chain.
struct ScaleSnapshot {
  std::size_t chain = 0;
  std::size_t iteration = 0;
  bool warmup = false;
  std::vector<double> scales;
};

struct PosteriorSamples {
  std::vector<std::string> names;
  RowMatrix draws;  // S x d, internal coordinates
  std::vector<std::size_t> chain_lengths;
  std::vector<double> acceptance;  // post-warmup, per chain
  std::vector<double> ess;         // per dimension
  std::vector<ScaleSnapshot> scale_trace;

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(draws.cols()); }
  std::span<const double> row(std::size_t s) const {
    return {draws.data() + s * static_cast<std::size_t>(draws.cols()), static_cast<std::size_t>(draws.cols())};
  }
  std::vector<double> column(std::size_t j) const;
};

/// Adaptive random-walk Metropolis. During warmup the proposal covariance is re-estimated
/// over successive windows and a global scale is tuned by Robbins-Monro toward the target
/// acceptance rate; both are frozen for the retained draws. Chains run in parallel with
/// streams derived from config.seed.
PosteriorSamples run_mh(const LogDensity& target, const SamplerConfig& config);
PosteriorSamples run_mh(const ModelFamily& family, const ObservationSet& data, const SamplerConfig& config);
PosteriorSamples run_mh(const ModelFamily& family, const GroupedData& data, const SamplerConfig& config);

/// S x K table of log p̂(y_k | x_s).
struct GroupLikTable {
  Eigen::MatrixXd log_lik;
  std::size_t forward_draws = 0;
};

/// Forward-sampling estimate: entry [s, k] = logsumexp_t(log p(y_k | z_t)) - log T with
/// z_t ~ p(z | x_s). The T draws for row s are shared by every group.
GroupLikTable estimate_group_logliks(const ModelFamily& family, const GroupedData& data,
                                     const PosteriorSamples& samples, std::size_t forward_draws,
                                     std::uint64_t seed);

/// Effective sample size of one chain via Geyer's initial monotone positive sequence.
/// A constant chain reports 1.
double effective_sample_size(std::span<const double> chain);

/// Per-dimension ESS, summed over chains.
std::vector<double> ess(const PosteriorSamples& samples);

/// Maps every row to natural coordinates and renames columns accordingly.
PosteriorSamples to_natural(const ModelFamily& family, const PosteriorSamples& samples);

}  // namespace wvo
