#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "wvo/model.hpp"
#include "wvo/sampler.hpp"

namespace wvo {

/// Objective value split into its two Monte Carlo terms; value = fit - normaliser.
struct ObjectiveTerms {
  double value = 0.0;
  double fit = 0.0;         // average weighted log evidence over samples
  double normaliser = 0.0;  // logsumexp_s(weighted evidence - base)
};

/// L[s, i] = log p(yhat_i | x_s), base[s] = log p(y* | x_s), budget = N*.
/// Immutable; rebuild when the virtual set changes.
class SingleLevelContext {
 public:
  SingleLevelContext(Eigen::MatrixXd L, Eigen::VectorXd base, double budget);

  const Eigen::MatrixXd& L() const { return L_; }
  const Eigen::VectorXd& base() const { return base_; }
  double budget() const { return budget_; }
  std::size_t samples() const { return static_cast<std::size_t>(L_.rows()); }
  std::size_t virtual_count() const { return static_cast<std::size_t>(L_.cols()); }

 private:
  Eigen::MatrixXd L_;
  Eigen::VectorXd base_;
  double budget_;
};

/// Lz[k](s, i) = log p(zhat_ki | x_s), base[s] = sum_k log p(y*_k | x_s), budget = K*.
/// Row maxima and shifted exponentials are cached so the mixture terms need no exp per call.
class MultiLevelContext {
 public:
  MultiLevelContext(std::vector<Eigen::MatrixXd> Lz, Eigen::VectorXd base, double budget);

  const std::vector<Eigen::MatrixXd>& Lz() const { return Lz_; }
  const Eigen::VectorXd& base() const { return base_; }
  double budget() const { return budget_; }
  std::size_t samples() const { return static_cast<std::size_t>(base_.size()); }
  std::size_t groups() const { return Lz_.size(); }
  std::size_t per_group() const { return static_cast<std::size_t>(Lz_.front().cols()); }

  /// m_k(s) = log sum_i w_i exp(Lz_k[s, i]) for every s.
  Eigen::VectorXd mixture(std::size_t k, const Eigen::VectorXd& w) const;
  /// exp(Lz_k[s, i] - m_k(s)), the derivative of m_k(s) with respect to w_i.
  Eigen::MatrixXd mixture_responsibility(std::size_t k, const Eigen::VectorXd& w) const;

 private:
  std::vector<Eigen::MatrixXd> Lz_;
  Eigen::VectorXd base_;
  double budget_;
  std::vector<Eigen::VectorXd> row_max_;
  std::vector<Eigen::MatrixXd> shifted_;
};

SingleLevelContext build_single_context(const ModelFamily& family, const PosteriorSamples& samples,
                                        const ObservationSet& observed, const ObservationSet& virtual_obs);

/// `virtual_groups[k][i]` is the group latent zhat_ki in natural coordinates.
MultiLevelContext build_multi_context(const ModelFamily& family, const PosteriorSamples& samples,
                                      const GroupLikTable& table,
                                      const std::vector<std::vector<std::vector<double>>>& virtual_groups,
                                      double budget);

ObjectiveTerms objective_single(const SingleLevelContext& ctx, const Eigen::VectorXd& w);
Eigen::VectorXd grad_single(const SingleLevelContext& ctx, const Eigen::VectorXd& w);

/// Requires a context with exactly one group.
ObjectiveTerms objective_k1(const MultiLevelContext& ctx, const Eigen::VectorXd& w);
Eigen::VectorXd grad_k1(const MultiLevelContext& ctx, const Eigen::VectorXd& w);

struct MultiGradient {
  Eigen::VectorXd v;
  std::vector<Eigen::VectorXd> w;
};

ObjectiveTerms objective_multi(const MultiLevelContext& ctx, const Eigen::VectorXd& v,
                               const std::vector<Eigen::VectorXd>& w);
MultiGradient grad_multi(const MultiLevelContext& ctx, const Eigen::VectorXd& v,
                         const std::vector<Eigen::VectorXd>& w);

}  // namespace wvo
