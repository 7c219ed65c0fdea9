#include "wvo/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <Eigen/Cholesky>

#include "wvo/errors.hpp"
#include "wvo/numeric.hpp"
#include "wvo/parallel.hpp"
#include "wvo/random.hpp"

namespace wvo {

namespace {

constexpr std::uint64_t kChainStream = 0x6368'6169'6eULL;
constexpr std::uint64_t kForwardStream = 0x666f'7277'6172'64ULL;

}  // namespace

// ---------------------------------------------------------------- PosteriorTarget

PosteriorTarget::PosteriorTarget(const ModelFamily& family)
    : family_(family), prior_([&family](LatentPoint x) { return family.log_prior(x); }) {}

void PosteriorTarget::set_prior(Term prior) { prior_ = std::move(prior); }

void PosteriorTarget::add_evidence(Term term) { evidence_.push_back(std::move(term)); }

void PosteriorTarget::add_observations(ObservationSet ys) {
  const auto& model = require_single_level(family_);
  for (const auto& y : ys) model.check_observation(y);
  observations_.insert(observations_.end(), ys.begin(), ys.end());
}

void PosteriorTarget::add_groups(const GroupedData& data, bool collapse) {
  const auto& model = require_multi_level(family_);
  check_grouped(data);
  const auto probe = family_.initial_point();
  for (const auto& group : data.groups) {
    for (const auto& y : group) model.check_observation(y);
    if (collapse && model.group_marginal_loglik(group, probe).has_value()) {
      collapsed_groups_.push_back(group);
    } else {
      latent_groups_.push_back(group);
    }
  }
}

void PosteriorTarget::set_initial(std::vector<double> x0) {
  if (x0.size() != family_.latent_dim()) throw UsageError("initial point has the wrong dimension");
  initial_ = std::move(x0);
}

std::size_t PosteriorTarget::dim() const {
  const std::size_t dz = latent_groups_.empty() ? 0 : require_multi_level(family_).group_dim();
  return family_.latent_dim() + dz * latent_groups_.size();
}

double PosteriorTarget::log_density(std::span<const double> state) const {
  const std::size_t dx = family_.latent_dim();
  for (double v : state) {
    if (!std::isfinite(v)) return kNegInf;
  }
  const LatentPoint x = state.first(dx);
  double total = prior_(x);
  if (!std::isfinite(total)) return kNegInf;
  for (const auto& term : evidence_) total += term(x);
  if (!observations_.empty()) total += require_single_level(family_).total_obs_loglik(observations_, x);
  if (collapsed_groups_.empty() && latent_groups_.empty()) return std::isnan(total) ? kNegInf : total;

  const auto& model = require_multi_level(family_);
  for (const auto& group : collapsed_groups_) total += *model.group_marginal_loglik(group, x);
  const std::size_t dz = model.group_dim();
  for (std::size_t k = 0; k < latent_groups_.size(); ++k) {
    const auto u = state.subspan(dx + k * dz, dz);
    const auto z = model.group_from_internal(u, x);
    if (!model.in_group_support(z)) return kNegInf;
    total += model.group_log_density(z, x) + model.group_internal_log_jacobian(u, x) +
             model.group_loglik(latent_groups_[k], z);
  }
  return std::isnan(total) ? kNegInf : total;
}

std::vector<double> PosteriorTarget::initial_state() const {
  std::vector<double> state = initial_.empty() ? family_.initial_point() : initial_;
  if (latent_groups_.empty()) return state;
  const auto& model = require_multi_level(family_);
  const std::vector<double> x(state.begin(), state.end());
  for (const auto& group : latent_groups_) {
    const auto u = model.initial_group_internal(group, x);
    state.insert(state.end(), u.begin(), u.end());
  }
  return state;
}

// ---------------------------------------------------------------- config

void SamplerConfig::validate() const {
  if (n_samples < 100) throw UsageError("sampler: n_samples must be at least 100");
  if (thin < 1) throw UsageError("sampler: thin must be at least 1");
  if (n_chains < 1) throw UsageError("sampler: n_chains must be at least 1");
  if (n_chains > n_samples) throw UsageError("sampler: more chains than samples");
  if (target_acceptance != 0.0 && !(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw UsageError("sampler: target acceptance must lie in (0, 1)");
  }
  if (!(initial_scale > 0.0)) throw UsageError("sampler: initial scale must be positive");
}

double SamplerConfig::resolved_target(std::size_t dim) const {
  if (target_acceptance > 0.0) return target_acceptance;
  return dim == 1 ? 0.44 : 0.234;
}

std::vector<double> PosteriorSamples::column(std::size_t j) const {
  std::vector<double> out(size());
  for (std::size_t s = 0; s < size(); ++s) out[s] = draws(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
  return out;
}

// ---------------------------------------------------------------- chain

namespace {

struct ChainResult {
  RowMatrix draws;
  double acceptance = 0.0;
  std::vector<ScaleSnapshot> trace;
};

/// Running mean and scatter matrix (Welford).
class RunningCovariance {
 public:
  explicit RunningCovariance(std::size_t d) : mean_(Eigen::VectorXd::Zero(d)), scatter_(Eigen::MatrixXd::Zero(d, d)) {}

  void add(const Eigen::VectorXd& x) {
    ++n_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    scatter_ += delta * (x - mean_).transpose();
  }
  std::size_t count() const { return n_; }
  Eigen::MatrixXd covariance() const { return scatter_ / static_cast<double>(n_ - 1); }
  void reset() {
    n_ = 0;
    mean_.setZero();
    scatter_.setZero();
  }

 private:
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scatter_;
};

std::vector<double> proposal_scales(const Eigen::MatrixXd& chol, double log_lambda) {
  std::vector<double> out(static_cast<std::size_t>(chol.rows()));
  for (Eigen::Index j = 0; j < chol.rows(); ++j) {
    out[static_cast<std::size_t>(j)] = std::exp(log_lambda) * chol.row(j).norm();
  }
  return out;
}

ChainResult run_chain(const LogDensity& target, const SamplerConfig& config, std::size_t chain,
                      std::size_t n_keep) {
  const std::size_t d = target.dim();
  const std::size_t exposed = target.exposed_dim();
  const double accept_target = config.resolved_target(d);
  Rng rng = make_rng(config.seed, kChainStream, chain);

  const std::vector<double> init = target.initial_state();
  if (init.size() != d) throw UsageError("sampler: initial state has the wrong dimension");
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(d));
  double lp = kNegInf;
  if (chain > 0) {
    Eigen::VectorXd jittered = x;
    for (Eigen::Index j = 0; j < jittered.size(); ++j) jittered[j] += draw_normal(rng, 0.0, config.initial_scale);
    lp = target.log_density({jittered.data(), d});
    if (std::isfinite(lp)) x = jittered;
  }
  if (!std::isfinite(lp)) lp = target.log_density({x.data(), d});
  if (!std::isfinite(lp)) {
    throw InitializationError("sampler: log density is not finite at the initial point (chain " +
                              std::to_string(chain) + ")");
  }

  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) *
                         config.initial_scale;
  double log_lambda = 0.0;
  bool covariance_adapted = false;

  ChainResult result;
  Eigen::VectorXd eps(static_cast<Eigen::Index>(d));
  Eigen::VectorXd proposal(static_cast<Eigen::Index>(d));

  auto step = [&](double& accept_prob) {
    for (Eigen::Index j = 0; j < eps.size(); ++j) eps[j] = draw_normal(rng);
    proposal = x + std::exp(log_lambda) * (chol * eps);
    const double lq = target.log_density({proposal.data(), d});
    const double log_ratio = std::isfinite(lq) ? lq - lp : kNegInf;
    accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    if (std::log(draw_uniform(rng)) < log_ratio) {
      x = proposal;
      lp = lq;
      return true;
    }
    return false;
  };

  // Covariance windows end at these fractions of warmup; the tail only tunes the global scale.
  const std::size_t W = config.warmup;
  const std::vector<std::size_t> window_ends = {W / 10, W / 4, (W * 9) / 20, (W * 3) / 4};
  std::size_t next_window = 0;
  RunningCovariance window(d);
  std::size_t accepted_warmup = 0;
  std::size_t since_reset = 0;

  for (std::size_t t = 1; t <= W; ++t) {
    double alpha = 0.0;
    if (step(alpha)) ++accepted_warmup;
    window.add(x);
    ++since_reset;
    log_lambda += (alpha - accept_target) / std::pow(static_cast<double>(since_reset) + 1.0, 0.6);

    while (next_window < window_ends.size() && t == window_ends[next_window]) {
      ++next_window;
      if (window.count() < 2 * d + 10) continue;
      Eigen::MatrixXd cov = window.covariance();
      const double ridge = 1e-8 * std::max(cov.diagonal().mean(), 1e-12);
      cov.diagonal().array() += ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() == Eigen::Success) {
        chol = llt.matrixL();
        if (!covariance_adapted) log_lambda = std::log(2.38 / std::sqrt(static_cast<double>(d)));
        covariance_adapted = true;
        since_reset = 0;
      }
      window.reset();
      result.trace.push_back({chain, t, true, proposal_scales(chol, log_lambda)});
    }
  }
  if (W > 0 && accepted_warmup == 0) {
    throw DivergenceError("sampler: no proposal accepted during warmup (chain " + std::to_string(chain) +
                          ", log density at start " + std::to_string(lp) + ")");
  }

  result.trace.push_back({chain, W, false, proposal_scales(chol, log_lambda)});
  result.draws.resize(static_cast<Eigen::Index>(n_keep), static_cast<Eigen::Index>(exposed));
  std::size_t accepted = 0;
  const std::size_t iterations = n_keep * config.thin;
  for (std::size_t t = 1; t <= iterations; ++t) {
    double alpha = 0.0;
    if (step(alpha)) ++accepted;
    if (t % config.thin == 0) {
      result.draws.row(static_cast<Eigen::Index>(t / config.thin - 1)) = x.head(static_cast<Eigen::Index>(exposed));
    }
  }
  result.trace.push_back({chain, W + iterations, false, proposal_scales(chol, log_lambda)});
  result.acceptance = iterations > 0 ? static_cast<double>(accepted) / static_cast<double>(iterations) : 0.0;
  return result;
}

}  // namespace

PosteriorSamples run_mh(const LogDensity& target, const SamplerConfig& config) {
  config.validate();
  const std::size_t chains = config.n_chains;
  std::vector<std::size_t> lengths(chains, config.n_samples / chains);
  for (std::size_t c = 0; c < config.n_samples % chains; ++c) ++lengths[c];

  std::vector<ChainResult> results(chains);
  parallel_for(chains, [&](std::size_t c) { results[c] = run_chain(target, config, c, lengths[c]); });

  PosteriorSamples out;
  out.names = target.exposed_names();
  out.chain_lengths = lengths;
  out.draws.resize(static_cast<Eigen::Index>(config.n_samples), static_cast<Eigen::Index>(target.exposed_dim()));
  Eigen::Index offset = 0;
  for (auto& r : results) {
    out.draws.middleRows(offset, r.draws.rows()) = r.draws;
    offset += r.draws.rows();
    out.acceptance.push_back(r.acceptance);
    out.scale_trace.insert(out.scale_trace.end(), r.trace.begin(), r.trace.end());
  }
  for (std::size_t s = 0; s < out.size(); ++s) {
    for (double v : out.row(s)) {
      if (!std::isfinite(v)) throw NumericalError("sampler: non-finite draw");
    }
  }
  out.ess = ess(out);
  return out;
}

PosteriorSamples run_mh(const ModelFamily& family, const ObservationSet& data, const SamplerConfig& config) {
  if (data.empty()) throw DataError("sampler: observation set is empty");
  PosteriorTarget target(family);
  target.add_observations(data);
  return run_mh(target, config);
}

PosteriorSamples run_mh(const ModelFamily& family, const GroupedData& data, const SamplerConfig& config) {
  PosteriorTarget target(family);
  target.add_groups(data, config.collapse_groups);
  return run_mh(target, config);
}

// ---------------------------------------------------------------- group likelihoods

GroupLikTable estimate_group_logliks(const ModelFamily& family, const GroupedData& data,
                                     const PosteriorSamples& samples, std::size_t forward_draws,
                                     std::uint64_t seed) {
  const auto& model = require_multi_level(family);
  check_grouped(data);
  if (forward_draws < 1) throw UsageError("group likelihood estimate needs at least one forward draw");
  if (samples.dim() != family.latent_dim()) throw UsageError("samples do not match the family's latent dimension");

  const std::size_t S = samples.size();
  const std::size_t K = data.size();
  const std::size_t dz = model.group_dim();
  const double log_T = std::log(static_cast<double>(forward_draws));
  GroupLikTable table;
  table.forward_draws = forward_draws;
  table.log_lik.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(K));

  parallel_for(S, [&](std::size_t s) {
    Rng rng = make_rng(seed, kForwardStream, s);
    const auto x = samples.row(s);
    std::vector<double> zs(forward_draws * dz);
    for (std::size_t t = 0; t < forward_draws; ++t) {
      const auto z = model.sample_group(x, rng);
      std::copy(z.begin(), z.end(), zs.begin() + static_cast<std::ptrdiff_t>(t * dz));
    }
    std::vector<double> ll(forward_draws);
    for (std::size_t k = 0; k < K; ++k) {
      model.group_loglik_batch(data.groups[k], zs, ll);
      table.log_lik(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = logsumexp(ll) - log_T;
    }
  });

  std::size_t degenerate = 0;
  for (Eigen::Index s = 0; s < table.log_lik.rows(); ++s) {
    for (Eigen::Index k = 0; k < table.log_lik.cols(); ++k) {
      if (table.log_lik(s, k) == kNegInf) ++degenerate;
    }
  }
  if (degenerate > 0) {
    std::cerr << "warning: " << degenerate << " group likelihood estimates are zero with T=" << forward_draws
              << "; consider raising the number of forward draws\n";
  }
  return table;
}

// ---------------------------------------------------------------- ESS

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> centred(n);
  double c0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centred[i] = chain[i] - mean;
    c0 += centred[i] * centred[i];
  }
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) return 1.0;

  auto rho = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += centred[i] * centred[i + lag];
    return acc / static_cast<double>(n) / c0;
  };

  double tau = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double gamma = rho(2 * m) + rho(2 * m + 1);
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, previous);
    previous = gamma;
    tau += 2.0 * gamma;
  }
  return static_cast<double>(n) / std::max(tau, 1.0 / static_cast<double>(n));
}

std::vector<double> ess(const PosteriorSamples& samples) {
  std::vector<double> out(samples.dim(), 0.0);
  std::vector<std::size_t> lengths = samples.chain_lengths;
  if (lengths.empty()) lengths = {samples.size()};
  for (std::size_t j = 0; j < samples.dim(); ++j) {
    const auto column = samples.column(j);
    std::size_t offset = 0;
    for (std::size_t len : lengths) {
      out[j] += effective_sample_size(std::span<const double>(column).subspan(offset, len));
      offset += len;
    }
  }
  return out;
}

PosteriorSamples to_natural(const ModelFamily& family, const PosteriorSamples& samples) {
  if (samples.dim() != family.latent_dim()) throw UsageError("samples do not match the family's latent dimension");
  PosteriorSamples out = samples;
  out.names = family.natural_names();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto natural = family.to_natural(samples.row(s));
    for (std::size_t j = 0; j < natural.size(); ++j) {
      out.draws(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = natural[j];
    }
  }
  out.ess = ess(out);
  return out;
}

}  // namespace wvo
