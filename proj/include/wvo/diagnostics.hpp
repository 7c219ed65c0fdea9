#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wvo/model.hpp"
#include "wvo/sampler.hpp"
#include "wvo/virtual_obs.hpp"

namespace wvo {

/// Weights attached to a virtual set. Single level: `w` sums to N*. Multi level: `v` sums
/// to K* and each `within[k]` sums to 1.
struct WeightAssignment {
  Eigen::VectorXd w;
  Eigen::VectorXd v;
  std::vector<Eigen::VectorXd> within;
};

/// A model whose evidence is the weighted virtual set instead of the original data.
///   single level: sum_i w_i log p(yhat_i | x)
///   multi level:  sum_k v_k log sum_i w_ki p(zhat_ki | x)
class ReconditionedModel {
 public:
  /// `budget` is N* or K*; throws UsageError when the weights do not respect it.
  ReconditionedModel(std::shared_ptr<const ModelFamily> family, VirtualObservationSet vobs,
                     WeightAssignment weights, double budget);

  double log_evidence(LatentPoint x) const;
  double log_joint(LatentPoint x) const { return family_->log_prior(x) + log_evidence(x); }

  /// Sampler target: prior (or `prior` when given) + weighted evidence.
  PosteriorTarget target(PosteriorTarget::Term prior = nullptr) const;

  const ModelFamily& family() const { return *family_; }
  const VirtualObservationSet& virtual_set() const { return vobs_; }
  const WeightAssignment& weights() const { return weights_; }

 private:
  std::shared_ptr<const ModelFamily> family_;
  VirtualObservationSet vobs_;
  WeightAssignment weights_;
  std::vector<std::vector<double>> log_within_;
};

/// Closed-form Beta(alpha', beta') after Bernoulli evidence with optional weights.
std::pair<double, double> conjugate_beta_bernoulli_posterior(double alpha, double beta, const ObservationSet& ys);
std::pair<double, double> conjugate_beta_bernoulli_posterior(double alpha, double beta, const ObservationSet& ys,
                                                             const Eigen::VectorXd& weights);

struct DimensionComparison {
  std::string name;
  double mean_diff = 0.0;  // |mean_a - mean_b| / std_a
  double std_ratio = 1.0;  // std_b / std_a
  double ks = 0.0;
};

struct PosteriorComparison {
  std::vector<DimensionComparison> dims;
};

struct Thresholds {
  double max_mean_diff = 0.25;
  double min_std_ratio = 0.8;
  double max_std_ratio = 1.25;
  double max_ks = 0.08;
};

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Throws UsageError when names or dimensions differ.
PosteriorComparison compare_posteriors(const PosteriorSamples& a, const PosteriorSamples& b);

bool passes(const DimensionComparison& d, const Thresholds& t = {});
bool passes(const PosteriorComparison& c, const Thresholds& t = {});

/// Moment-matched parametric marginal.
struct FittedMarginal {
  enum class Kind { kNormal, kGamma };
  Kind kind = Kind::kNormal;
  double a = 0.0;  // Normal: mean, Gamma: shape
  double b = 1.0;  // Normal: std,  Gamma: rate

  double log_density(double value) const;
};

/// Independent moment fits to each natural-coordinate column of `natural_samples`.
/// Throws DegenerateContextError on zero variance and UsageError on non-positive values
/// in a Gamma column.
std::vector<FittedMarginal> meb_fit(const PosteriorSamples& natural_samples,
                                    const std::vector<FittedMarginal::Kind>& kinds);

/// Product of fitted marginals as a prior term in the family's internal coordinates.
PosteriorTarget::Term meb_prior(std::shared_ptr<const ModelFamily> family, std::vector<FittedMarginal> fits);

/// Column means and standard deviations.
std::vector<double> column_means(const PosteriorSamples& samples);
std::vector<double> column_stds(const PosteriorSamples& samples);

}  // namespace wvo
