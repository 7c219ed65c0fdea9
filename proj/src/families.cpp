#include "wvo/families.hpp"

#include <cmath>
#include <numbers>

#include "wvo/errors.hpp"
#include "wvo/numeric.hpp"

namespace wvo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_size(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) throw UsageError(std::string(what) + ": wrong dimension");
}

double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

bool is_count(double v) { return std::isfinite(v) && v >= 0.0 && std::floor(v) == v; }

}  // namespace

// ---------------------------------------------------------------- BetaBernoulli

BetaBernoulli::BetaBernoulli(double a, double b) : a_(a), b_(b) {
  if (!(a > 0.0) || !(b > 0.0)) throw UsageError("beta-bernoulli: prior parameters must be positive");
}

std::vector<double> BetaBernoulli::to_natural(LatentPoint x) const {
  check_dim(x);
  return {logistic(x[0])};
}

std::vector<double> BetaBernoulli::from_natural(std::span<const double> natural) const {
  require_size(natural, 1, "beta-bernoulli");
  const double theta = natural[0];
  if (!(theta > 0.0 && theta < 1.0)) throw DataError("beta-bernoulli: theta outside (0, 1)");
  return {std::log(theta) - std::log1p(-theta)};
}

double BetaBernoulli::log_jacobian(LatentPoint x) const {
  check_dim(x);
  return log_logistic(x[0]) + log_logistic(-x[0]);
}

double BetaBernoulli::log_prior_natural(std::span<const double> natural) const {
  require_size(natural, 1, "beta-bernoulli");
  const double theta = natural[0];
  if (!(theta > 0.0 && theta < 1.0)) throw DataError("beta-bernoulli: theta outside (0, 1)");
  return (a_ - 1.0) * std::log(theta) + (b_ - 1.0) * std::log1p(-theta) - log_beta_fn(a_, b_);
}

void BetaBernoulli::check_observation(const Observation& y) const {
  if (y.value != 0.0 && y.value != 1.0) {
    throw DataError("beta-bernoulli: observation " + std::to_string(y.value) + " is not 0 or 1");
  }
}

double BetaBernoulli::obs_loglik(const Observation& y, LatentPoint x) const {
  check_observation(y);
  check_dim(x);
  return y.value == 1.0 ? log_logistic(x[0]) : log_logistic(-x[0]);
}

Observation BetaBernoulli::sample_obs(LatentPoint x, Rng& rng, const Observation& like) const {
  check_dim(x);
  const double theta = logistic(x[0]);
  Observation y = like;
  y.value = draw_uniform(rng) < theta ? 1.0 : 0.0;
  return y;
}

// ---------------------------------------------------------------- NormalNoninformative

std::vector<double> NormalNoninformative::to_natural(LatentPoint x) const {
  check_dim(x);
  return {x[0], std::exp(x[1])};
}

std::vector<double> NormalNoninformative::from_natural(std::span<const double> natural) const {
  require_size(natural, 2, "normal-noninformative");
  if (!(natural[1] > 0.0)) throw DataError("normal-noninformative: sigma must be positive");
  return {natural[0], std::log(natural[1])};
}

double NormalNoninformative::log_jacobian(LatentPoint x) const {
  check_dim(x);
  return x[1];
}

double NormalNoninformative::log_prior_natural(std::span<const double> natural) const {
  require_size(natural, 2, "normal-noninformative");
  if (!(natural[1] > 0.0)) throw DataError("normal-noninformative: sigma must be positive");
  return -std::log(natural[1]);
}

void NormalNoninformative::check_observation(const Observation& y) const {
  if (!std::isfinite(y.value)) throw DataError("normal-noninformative: non-finite observation");
}

double NormalNoninformative::obs_loglik(const Observation& y, LatentPoint x) const {
  check_observation(y);
  check_dim(x);
  return log_normal_pdf(y.value, x[0], std::exp(x[1]));
}

Observation NormalNoninformative::sample_obs(LatentPoint x, Rng& rng, const Observation& like) const {
  check_dim(x);
  Observation y = like;
  y.value = draw_normal(rng, x[0], std::exp(x[1]));
  return y;
}

// ---------------------------------------------------------------- NormalHyperprior

std::vector<double> NormalHyperprior::to_natural(LatentPoint x) const {
  check_dim(x);
  return {x[0], std::exp(x[1])};
}

std::vector<double> NormalHyperprior::from_natural(std::span<const double> natural) const {
  require_size(natural, 2, "normal-hyperprior");
  if (!(natural[1] > 0.0)) throw DataError("normal-hyperprior: tau must be positive");
  return {natural[0], std::log(natural[1])};
}

double NormalHyperprior::log_jacobian(LatentPoint x) const {
  check_dim(x);
  return x[1];
}

double NormalHyperprior::log_prior_natural(std::span<const double> natural) const {
  require_size(natural, 2, "normal-hyperprior");
  if (!(natural[1] > 0.0)) throw DataError("normal-hyperprior: tau must be positive");
  const double log_tau = std::log(natural[1]);
  return log_normal_pdf(natural[0], 0.0, 1.0) + log_normal_pdf(log_tau, 0.0, 1.0) - log_tau;
}

void NormalHyperprior::check_observation(const Observation& y) const {
  if (!std::isfinite(y.value)) throw DataError("normal-hyperprior: non-finite observation");
}

double NormalHyperprior::group_log_density(GroupLatent z, LatentPoint x) const {
  check_dim(x);
  require_size(z, 1, "normal-hyperprior group latent");
  return log_normal_pdf(z[0], x[0], std::exp(x[1]));
}

bool NormalHyperprior::in_group_support(GroupLatent z) const { return z.size() == 1 && std::isfinite(z[0]); }

std::vector<double> NormalHyperprior::sample_group(LatentPoint x, Rng& rng) const {
  check_dim(x);
  return {draw_normal(rng, x[0], std::exp(x[1]))};
}

double NormalHyperprior::obs_loglik(const Observation& y, GroupLatent z) const {
  return group_loglik(ObservationSet{y}, z);
}

Observation NormalHyperprior::sample_obs(GroupLatent, Rng&, const Observation&) const {
  throw UsageError("normal-hyperprior: observation scale has an improper prior; y cannot be forward sampled");
}

double NormalHyperprior::group_loglik(const ObservationSet& ys, GroupLatent z) const {
  require_size(z, 1, "normal-hyperprior group latent");
  if (ys.empty()) return 0.0;
  double ss = 0.0;
  for (const auto& y : ys) {
    check_observation(y);
    const double d = y.value - z[0];
    ss += d * d;
  }
  const double n = static_cast<double>(ys.size());
  // ∫ prod_i Normal(y_i; mu, sigma) d log sigma = Γ(n/2) (ss/2)^(-n/2) / (2 (2π)^(n/2))
  return -std::log(2.0) - 0.5 * n * kLog2Pi + std::lgamma(0.5 * n) - 0.5 * n * std::log(0.5 * ss);
}

std::vector<double> NormalHyperprior::group_from_internal(std::span<const double> u, LatentPoint) const {
  require_size(u, 1, "normal-hyperprior group coordinate");
  return {u[0]};
}

std::vector<double> NormalHyperprior::group_to_internal(GroupLatent z, LatentPoint) const {
  require_size(z, 1, "normal-hyperprior group latent");
  return {z[0]};
}

double NormalHyperprior::group_internal_log_jacobian(std::span<const double>, LatentPoint) const { return 0.0; }

std::vector<double> NormalHyperprior::initial_group_internal(const ObservationSet& ys, LatentPoint) const {
  double mean = 0.0;
  for (const auto& y : ys) mean += y.value;
  return {ys.empty() ? 0.0 : mean / static_cast<double>(ys.size())};
}

// ---------------------------------------------------------------- EightSchools

std::vector<double> EightSchools::to_natural(LatentPoint x) const {
  check_dim(x);
  return {x[0], std::exp(x[1])};
}

std::vector<double> EightSchools::from_natural(std::span<const double> natural) const {
  require_size(natural, 2, "eight-schools");
  if (!(natural[1] > 0.0)) throw DataError("eight-schools: tau must be positive");
  return {natural[0], std::log(natural[1])};
}

double EightSchools::log_jacobian(LatentPoint x) const {
  check_dim(x);
  return x[1];
}

double EightSchools::log_prior_natural(std::span<const double> natural) const {
  require_size(natural, 2, "eight-schools");
  const double tau = natural[1];
  if (!(tau > 0.0)) throw DataError("eight-schools: tau must be positive");
  constexpr double scale = 5.0;
  const double half_cauchy = std::log(2.0 / (std::numbers::pi * scale)) - std::log1p((tau / scale) * (tau / scale));
  return log_normal_pdf(natural[0], 0.0, 5.0) + half_cauchy;
}

void EightSchools::check_observation(const Observation& y) const {
  if (!std::isfinite(y.value)) throw DataError("eight-schools: non-finite observation");
  if (!(y.aux > 0.0) || !std::isfinite(y.aux)) throw DataError("eight-schools: sigma must be positive");
}

double EightSchools::group_log_density(GroupLatent z, LatentPoint x) const {
  check_dim(x);
  require_size(z, 1, "eight-schools group latent");
  return log_normal_pdf(z[0], x[0], std::exp(x[1]));
}

bool EightSchools::in_group_support(GroupLatent z) const { return z.size() == 1 && std::isfinite(z[0]); }

std::vector<double> EightSchools::sample_group(LatentPoint x, Rng& rng) const {
  check_dim(x);
  return {x[0] + std::exp(x[1]) * draw_normal(rng)};
}

double EightSchools::obs_loglik(const Observation& y, GroupLatent z) const {
  check_observation(y);
  require_size(z, 1, "eight-schools group latent");
  return log_normal_pdf(y.value, z[0], y.aux);
}

Observation EightSchools::sample_obs(GroupLatent z, Rng& rng, const Observation& like) const {
  require_size(z, 1, "eight-schools group latent");
  if (!(like.aux > 0.0)) throw UsageError("eight-schools: sample_obs needs a positive sigma in the aux field");
  Observation y = like;
  y.value = draw_normal(rng, z[0], like.aux);
  return y;
}

std::optional<double> EightSchools::group_marginal_loglik(const ObservationSet& ys, LatentPoint x) const {
  check_dim(x);
  // Collapse the group's observations into one Gaussian factor in nu, then convolve with
  // Normal(nu; mu, tau). Stable as tau -> 0.
  double precision = 0.0;
  double weighted = 0.0;
  for (const auto& y : ys) {
    check_observation(y);
    precision += 1.0 / (y.aux * y.aux);
    weighted += y.value / (y.aux * y.aux);
  }
  const double s2 = 1.0 / precision;
  const double pooled = weighted * s2;
  double residual = -log_normal_pdf(pooled, pooled, std::sqrt(s2));
  for (const auto& y : ys) residual += log_normal_pdf(y.value, pooled, y.aux);
  const double tau = std::exp(x[1]);
  return residual + log_normal_pdf(pooled, x[0], std::sqrt(tau * tau + s2));
}

std::vector<double> EightSchools::group_from_internal(std::span<const double> u, LatentPoint x) const {
  require_size(u, 1, "eight-schools group coordinate");
  return {x[0] + std::exp(x[1]) * u[0]};
}

std::vector<double> EightSchools::group_to_internal(GroupLatent z, LatentPoint x) const {
  require_size(z, 1, "eight-schools group latent");
  return {(z[0] - x[0]) / std::exp(x[1])};
}

double EightSchools::group_internal_log_jacobian(std::span<const double>, LatentPoint x) const { return x[1]; }

// ---------------------------------------------------------------- RatsBinomial

std::vector<double> RatsBinomial::to_natural(LatentPoint x) const {
  check_dim(x);
  const double total = std::exp(x[1]);
  return {total * logistic(x[0]), total * logistic(-x[0])};
}

std::vector<double> RatsBinomial::from_natural(std::span<const double> natural) const {
  require_size(natural, 2, "rats-binomial");
  if (!(natural[0] > 0.0) || !(natural[1] > 0.0)) throw DataError("rats-binomial: alpha, beta must be positive");
  return {std::log(natural[0] / natural[1]), std::log(natural[0] + natural[1])};
}

double RatsBinomial::log_jacobian(LatentPoint x) const {
  check_dim(x);
  // |d(alpha, beta) / d(log(alpha/beta), log(alpha+beta))| = alpha * beta
  return 2.0 * x[1] + log_logistic(x[0]) + log_logistic(-x[0]);
}

double RatsBinomial::log_prior_natural(std::span<const double> natural) const {
  require_size(natural, 2, "rats-binomial");
  if (!(natural[0] > 0.0) || !(natural[1] > 0.0)) throw DataError("rats-binomial: alpha, beta must be positive");
  return -2.5 * std::log(natural[0] + natural[1]);
}

void RatsBinomial::check_observation(const Observation& y) const {
  if (!is_count(y.aux) || y.aux < 1.0) throw DataError("rats-binomial: n must be an integer >= 1");
  if (!is_count(y.value) || y.value > y.aux) throw DataError("rats-binomial: y must be an integer in [0, n]");
}

double RatsBinomial::group_log_density(GroupLatent z, LatentPoint x) const {
  require_size(z, 1, "rats-binomial group latent");
  if (!in_group_support(z)) throw DataError("rats-binomial: eta outside (0, 1)");
  const auto ab = to_natural(x);
  return (ab[0] - 1.0) * std::log(z[0]) + (ab[1] - 1.0) * std::log1p(-z[0]) - log_beta_fn(ab[0], ab[1]);
}

bool RatsBinomial::in_group_support(GroupLatent z) const { return z.size() == 1 && z[0] > 0.0 && z[0] < 1.0; }

std::vector<double> RatsBinomial::sample_group(LatentPoint x, Rng& rng) const {
  const auto ab = to_natural(x);
  return {draw_beta(rng, ab[0], ab[1])};
}

double RatsBinomial::obs_loglik(const Observation& y, GroupLatent z) const {
  check_observation(y);
  require_size(z, 1, "rats-binomial group latent");
  if (!in_group_support(z)) throw DataError("rats-binomial: eta outside (0, 1)");
  return log_choose(y.aux, y.value) + y.value * std::log(z[0]) + (y.aux - y.value) * std::log1p(-z[0]);
}

Observation RatsBinomial::sample_obs(GroupLatent z, Rng& rng, const Observation& like) const {
  require_size(z, 1, "rats-binomial group latent");
  if (!is_count(like.aux) || like.aux < 1.0) throw UsageError("rats-binomial: sample_obs needs n >= 1 in the aux field");
  std::binomial_distribution<long> dist(static_cast<long>(like.aux), z[0]);
  Observation y = like;
  y.value = static_cast<double>(dist(rng));
  return y;
}

void RatsBinomial::group_loglik_batch(const ObservationSet& ys, std::span<const double> zs,
                                      std::span<double> out) const {
  if (zs.size() != out.size()) throw UsageError("group_loglik_batch: size mismatch");
  double constant = 0.0;
  double successes = 0.0;
  double failures = 0.0;
  for (const auto& y : ys) {
    check_observation(y);
    constant += log_choose(y.aux, y.value);
    successes += y.value;
    failures += y.aux - y.value;
  }
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (!(zs[t] > 0.0 && zs[t] < 1.0)) throw DataError("rats-binomial: eta outside (0, 1)");
    out[t] = constant + successes * std::log(zs[t]) + failures * std::log1p(-zs[t]);
  }
}

std::optional<double> RatsBinomial::group_marginal_loglik(const ObservationSet& ys, LatentPoint x) const {
  const auto ab = to_natural(x);
  double constant = 0.0;
  double successes = 0.0;
  double failures = 0.0;
  for (const auto& y : ys) {
    check_observation(y);
    constant += log_choose(y.aux, y.value);
    successes += y.value;
    failures += y.aux - y.value;
  }
  return constant + log_beta_fn(ab[0] + successes, ab[1] + failures) - log_beta_fn(ab[0], ab[1]);
}

std::vector<double> RatsBinomial::group_from_internal(std::span<const double> u, LatentPoint) const {
  require_size(u, 1, "rats-binomial group coordinate");
  return {logistic(u[0])};
}

std::vector<double> RatsBinomial::group_to_internal(GroupLatent z, LatentPoint) const {
  require_size(z, 1, "rats-binomial group latent");
  return {std::log(z[0]) - std::log1p(-z[0])};
}

double RatsBinomial::group_internal_log_jacobian(std::span<const double> u, LatentPoint) const {
  return log_logistic(u[0]) + log_logistic(-u[0]);
}

std::vector<double> RatsBinomial::initial_group_internal(const ObservationSet& ys, LatentPoint) const {
  double successes = 0.5;
  double trials = 1.0;
  for (const auto& y : ys) {
    successes += y.value;
    trials += y.aux;
  }
  const double rate = successes / trials;
  return {std::log(rate) - std::log1p(-rate)};
}

}  // namespace wvo
