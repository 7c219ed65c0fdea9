#pragma once

#include "wvo/model.hpp"

namespace wvo {

/// theta ~ Beta(a, b), y ~ Bernoulli(theta). Internal coordinate: logit(theta).
class BetaBernoulli : public SingleLevelModel {
 public:
  explicit BetaBernoulli(double a = 1.0, double b = 1.0);

  std::string_view name() const override { return "beta-bernoulli"; }
  std::size_t latent_dim() const override { return 1; }
  std::vector<std::string> latent_names() const override { return {"logit_theta"}; }
  std::vector<std::string> natural_names() const override { return {"theta"}; }
  std::vector<double> to_natural(LatentPoint x) const override;
  std::vector<double> from_natural(std::span<const double> natural) const override;
  double log_jacobian(LatentPoint x) const override;
  double log_prior_natural(std::span<const double> natural) const override;
  void check_observation(const Observation& y) const override;

  double obs_loglik(const Observation& y, LatentPoint x) const override;
  Observation sample_obs(LatentPoint x, Rng& rng, const Observation& like = {}) const override;

  double prior_a() const { return a_; }
  double prior_b() const { return b_; }

 private:
  double a_;
  double b_;
};

/// p(mu, log sigma) ∝ 1, y ~ Normal(mu, sigma). Internal coordinates: (mu, log sigma).
class NormalNoninformative : public SingleLevelModel {
 public:
  std::string_view name() const override { return "normal-noninformative"; }
  std::size_t latent_dim() const override { return 2; }
  std::vector<std::string> latent_names() const override { return {"mu", "log_sigma"}; }
  std::vector<std::string> natural_names() const override { return {"mu", "sigma"}; }
  std::vector<double> to_natural(LatentPoint x) const override;
  std::vector<double> from_natural(std::span<const double> natural) const override;
  double log_jacobian(LatentPoint x) const override;
  double log_prior_natural(std::span<const double> natural) const override;
  void check_observation(const Observation& y) const override;

  double obs_loglik(const Observation& y, LatentPoint x) const override;
  Observation sample_obs(LatentPoint x, Rng& rng, const Observation& like = {}) const override;
};

/// Normal model with a hyperprior on the mean:
///   nu ~ Normal(0, 1), log tau ~ Normal(0, 1)
///   mu ~ Normal(nu, tau), log sigma ~ flat
///   y ~ Normal(mu, sigma)
/// The group latent is mu. The flat log sigma is integrated out analytically, so
/// group_loglik(y, mu) = log ∫ prod_i Normal(y_i; mu, sigma) d log sigma. Because that
/// scale is improper, sample_obs is undefined for this family and throws.
class NormalHyperprior : public MultiLevelModel {
 public:
  std::string_view name() const override { return "normal-hyperprior"; }
  std::size_t latent_dim() const override { return 2; }
  std::vector<std::string> latent_names() const override { return {"nu", "log_tau"}; }
  std::vector<std::string> natural_names() const override { return {"nu", "tau"}; }
  std::vector<double> to_natural(LatentPoint x) const override;
  std::vector<double> from_natural(std::span<const double> natural) const override;
  double log_jacobian(LatentPoint x) const override;
  double log_prior_natural(std::span<const double> natural) const override;
  void check_observation(const Observation& y) const override;

  std::size_t group_dim() const override { return 1; }
  std::vector<std::string> group_names() const override { return {"mu"}; }
  double group_log_density(GroupLatent z, LatentPoint x) const override;
  bool in_group_support(GroupLatent z) const override;
  std::vector<double> sample_group(LatentPoint x, Rng& rng) const override;
  double obs_loglik(const Observation& y, GroupLatent z) const override;
  Observation sample_obs(GroupLatent z, Rng& rng, const Observation& like = {}) const override;
  double group_loglik(const ObservationSet& ys, GroupLatent z) const override;
  std::vector<double> group_from_internal(std::span<const double> u, LatentPoint x) const override;
  std::vector<double> group_to_internal(GroupLatent z, LatentPoint x) const override;
  double group_internal_log_jacobian(std::span<const double> u, LatentPoint x) const override;
  std::vector<double> initial_group_internal(const ObservationSet& ys, LatentPoint x) const override;
};

/// mu ~ Normal(0, 5), tau ~ HalfCauchy(0, 5), nu_k ~ Normal(mu, tau), y ~ Normal(nu_k, sigma)
/// with sigma the known per-observation aux field. Internal coordinates: (mu, log tau);
/// group latents are sampled non-centred, nu = mu + tau * u.
class EightSchools : public MultiLevelModel {
 public:
  std::string_view name() const override { return "eight-schools"; }
  std::size_t latent_dim() const override { return 2; }
  std::vector<std::string> latent_names() const override { return {"mu", "log_tau"}; }
  std::vector<std::string> natural_names() const override { return {"mu", "tau"}; }
  std::vector<double> to_natural(LatentPoint x) const override;
  std::vector<double> from_natural(std::span<const double> natural) const override;
  double log_jacobian(LatentPoint x) const override;
  double log_prior_natural(std::span<const double> natural) const override;
  void check_observation(const Observation& y) const override;
  std::vector<double> initial_point() const override { return {0.0, 1.0}; }

  std::size_t group_dim() const override { return 1; }
  std::vector<std::string> group_names() const override { return {"nu"}; }
  double group_log_density(GroupLatent z, LatentPoint x) const override;
  bool in_group_support(GroupLatent z) const override;
  std::vector<double> sample_group(LatentPoint x, Rng& rng) const override;
  double obs_loglik(const Observation& y, GroupLatent z) const override;
  Observation sample_obs(GroupLatent z, Rng& rng, const Observation& like = {}) const override;
  std::optional<double> group_marginal_loglik(const ObservationSet& ys, LatentPoint x) const override;
  std::vector<double> group_from_internal(std::span<const double> u, LatentPoint x) const override;
  std::vector<double> group_to_internal(GroupLatent z, LatentPoint x) const override;
  double group_internal_log_jacobian(std::span<const double> u, LatentPoint x) const override;
};

/// p(alpha, beta) ∝ (alpha + beta)^(-5/2), eta_k ~ Beta(alpha, beta), y ~ Binomial(n, eta_k)
/// with n the aux field. Internal coordinates: (log(alpha / beta), log(alpha + beta));
/// group latents are sampled as logit(eta).
class RatsBinomial : public MultiLevelModel {
 public:
  std::string_view name() const override { return "rats-binomial"; }
  std::size_t latent_dim() const override { return 2; }
  std::vector<std::string> latent_names() const override { return {"log_alpha_over_beta", "log_alpha_plus_beta"}; }
  std::vector<std::string> natural_names() const override { return {"alpha", "beta"}; }
  std::vector<double> to_natural(LatentPoint x) const override;
  std::vector<double> from_natural(std::span<const double> natural) const override;
  double log_jacobian(LatentPoint x) const override;
  double log_prior_natural(std::span<const double> natural) const override;
  void check_observation(const Observation& y) const override;
  std::vector<double> initial_point() const override { return {-1.8, 2.7}; }

  std::size_t group_dim() const override { return 1; }
  std::vector<std::string> group_names() const override { return {"eta"}; }
  double group_log_density(GroupLatent z, LatentPoint x) const override;
  bool in_group_support(GroupLatent z) const override;
  std::vector<double> sample_group(LatentPoint x, Rng& rng) const override;
  double obs_loglik(const Observation& y, GroupLatent z) const override;
  Observation sample_obs(GroupLatent z, Rng& rng, const Observation& like = {}) const override;
  void group_loglik_batch(const ObservationSet& ys, std::span<const double> zs,
                          std::span<double> out) const override;
  std::optional<double> group_marginal_loglik(const ObservationSet& ys, LatentPoint x) const override;
  std::vector<double> group_from_internal(std::span<const double> u, LatentPoint x) const override;
  std::vector<double> group_to_internal(GroupLatent z, LatentPoint x) const override;
  double group_internal_log_jacobian(std::span<const double> u, LatentPoint x) const override;
  std::vector<double> initial_group_internal(const ObservationSet& ys, LatentPoint x) const override;
};

}  // namespace wvo
