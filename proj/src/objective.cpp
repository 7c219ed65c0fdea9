#include "wvo/objective.hpp"

#include <cmath>
#include <string>

#include "wvo/errors.hpp"
#include "wvo/numeric.hpp"
#include "wvo/parallel.hpp"

namespace wvo {

namespace {

void check_entries(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw UsageError(std::string(what) + " has a NaN or +inf entry");
      }
    }
  }
}

void check_weights(const Eigen::VectorXd& w, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(w.size()) != n) {
    throw UsageError(std::string(what) + ": expected " + std::to_string(n) + " weights, got " +
                     std::to_string(w.size()));
  }
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw UsageError(std::string(what) + ": weights must be finite and nonnegative");
  }
}

/// w * l with 0 * -inf taken as 0.
inline double weighted(double w, double l) { return w == 0.0 ? 0.0 : w * l; }

ObjectiveTerms terms(const std::vector<double>& f, const Eigen::VectorXd& base) {
  const std::size_t S = f.size();
  double sum = 0.0;
  std::vector<double> shifted(S);
  for (std::size_t s = 0; s < S; ++s) {
    sum += f[s];
    shifted[s] = f[s] - base[static_cast<Eigen::Index>(s)];
  }
  ObjectiveTerms out;
  out.fit = sum / static_cast<double>(S);
  out.normaliser = logsumexp(shifted);
  if (out.normaliser == kNegInf) throw DegenerateContextError("objective: every sample has zero weighted evidence");
  out.value = out.fit - out.normaliser;
  return out;
}

/// 1/S - softmax_s(f_s - base_s).
std::vector<double> sample_coefficients(const std::vector<double>& f, const Eigen::VectorXd& base) {
  const std::size_t S = f.size();
  std::vector<double> shifted(S);
  for (std::size_t s = 0; s < S; ++s) shifted[s] = f[s] - base[static_cast<Eigen::Index>(s)];
  const double norm = logsumexp(shifted);
  if (norm == kNegInf) throw DegenerateContextError("gradient: every sample has zero weighted evidence");
  std::vector<double> c(S);
  for (std::size_t s = 0; s < S; ++s) c[s] = 1.0 / static_cast<double>(S) - std::exp(shifted[s] - norm);
  return c;
}

std::vector<double> single_evidence(const SingleLevelContext& ctx, const Eigen::VectorXd& w) {
  check_weights(w, ctx.virtual_count(), "single-level objective");
  const auto& L = ctx.L();
  std::vector<double> f(ctx.samples(), 0.0);
  for (std::size_t s = 0; s < f.size(); ++s) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < L.cols(); ++i) acc += weighted(w[i], L(static_cast<Eigen::Index>(s), i));
    f[s] = acc;
  }
  return f;
}

struct MultiState {
  std::vector<Eigen::VectorXd> m;  // per group, length S
  std::vector<double> f;
};

MultiState multi_evidence(const MultiLevelContext& ctx, const Eigen::VectorXd& v,
                          const std::vector<Eigen::VectorXd>& w) {
  check_weights(v, ctx.groups(), "multi-level objective (group weights)");
  if (w.size() != ctx.groups()) throw UsageError("multi-level objective: one weight vector per group is required");
  MultiState st;
  st.f.assign(ctx.samples(), 0.0);
  for (std::size_t k = 0; k < ctx.groups(); ++k) {
    check_weights(w[k], ctx.per_group(), "multi-level objective (within-group weights)");
    if (w[k].sum() <= 0.0) throw UsageError("multi-level objective: a group has all weights zero");
    st.m.push_back(ctx.mixture(k, w[k]));
  }
  for (std::size_t s = 0; s < ctx.samples(); ++s) {
    double acc = 0.0;
    for (std::size_t k = 0; k < ctx.groups(); ++k) {
      acc += weighted(v[static_cast<Eigen::Index>(k)], st.m[k][static_cast<Eigen::Index>(s)]);
    }
    st.f[s] = acc;
  }
  return st;
}

}  // namespace

SingleLevelContext::SingleLevelContext(Eigen::MatrixXd L, Eigen::VectorXd base, double budget)
    : L_(std::move(L)), base_(std::move(base)), budget_(budget) {
  if (L_.rows() < 1 || L_.cols() < 1) throw UsageError("single-level context needs S >= 1 and at least one virtual observation");
  if (base_.size() != L_.rows()) throw UsageError("single-level context: base length does not match sample count");
  if (!(budget_ > 0.0) || !std::isfinite(budget_)) throw UsageError("single-level context: budget must be positive");
  check_entries(L_, "log-likelihood matrix");
  check_entries(base_, "base log-likelihood");
}

MultiLevelContext::MultiLevelContext(std::vector<Eigen::MatrixXd> Lz, Eigen::VectorXd base, double budget)
    : Lz_(std::move(Lz)), base_(std::move(base)), budget_(budget) {
  if (Lz_.empty()) throw UsageError("multi-level context needs at least one virtual group");
  if (base_.size() < 1) throw UsageError("multi-level context needs S >= 1");
  if (!(budget_ > 0.0) || !std::isfinite(budget_)) throw UsageError("multi-level context: budget must be positive");
  check_entries(base_, "base log-likelihood");
  for (const auto& m : Lz_) {
    if (m.rows() != base_.size()) throw UsageError("multi-level context: group matrix rows do not match sample count");
    if (m.cols() < 1 || m.cols() != Lz_.front().cols()) {
      throw UsageError("multi-level context: every group needs the same positive number of virtual values");
    }
    check_entries(m, "group log-density matrix");
    Eigen::VectorXd rmax = m.rowwise().maxCoeff();
    Eigen::MatrixXd shifted(m.rows(), m.cols());
    for (Eigen::Index s = 0; s < m.rows(); ++s) {
      for (Eigen::Index i = 0; i < m.cols(); ++i) {
        shifted(s, i) = rmax[s] == kNegInf ? 0.0 : std::exp(m(s, i) - rmax[s]);
      }
    }
    row_max_.push_back(std::move(rmax));
    shifted_.push_back(std::move(shifted));
  }
}

Eigen::VectorXd MultiLevelContext::mixture(std::size_t k, const Eigen::VectorXd& w) const {
  const Eigen::VectorXd dot = shifted_[k] * w;
  Eigen::VectorXd out(dot.size());
  for (Eigen::Index s = 0; s < dot.size(); ++s) {
    out[s] = (row_max_[k][s] == kNegInf || dot[s] <= 0.0) ? kNegInf : row_max_[k][s] + std::log(dot[s]);
  }
  return out;
}

Eigen::MatrixXd MultiLevelContext::mixture_responsibility(std::size_t k, const Eigen::VectorXd& w) const {
  const Eigen::VectorXd dot = shifted_[k] * w;
  Eigen::MatrixXd out = shifted_[k];
  for (Eigen::Index s = 0; s < dot.size(); ++s) {
    if (dot[s] > 0.0) {
      out.row(s) /= dot[s];
    } else {
      out.row(s).setZero();
    }
  }
  return out;
}

SingleLevelContext build_single_context(const ModelFamily& family, const PosteriorSamples& samples,
                                        const ObservationSet& observed, const ObservationSet& virtual_obs) {
  const auto& model = require_single_level(family);
  if (samples.dim() != family.latent_dim()) throw UsageError("samples do not match the family's latent dimension");
  if (observed.empty()) throw DataError("observed set is empty");
  if (virtual_obs.empty()) throw UsageError("virtual set is empty");
  for (const auto& y : observed) model.check_observation(y);
  for (const auto& y : virtual_obs) model.check_observation(y);

  const std::size_t S = samples.size();
  Eigen::MatrixXd L(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(virtual_obs.size()));
  Eigen::VectorXd base(static_cast<Eigen::Index>(S));
  parallel_for(S, [&](std::size_t s) {
    const auto x = samples.row(s);
    for (std::size_t i = 0; i < virtual_obs.size(); ++i) {
      L(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = model.obs_loglik(virtual_obs[i], x);
    }
    base[static_cast<Eigen::Index>(s)] = model.total_obs_loglik(observed, x);
  });
  return SingleLevelContext(std::move(L), std::move(base), static_cast<double>(observed.size()));
}

MultiLevelContext build_multi_context(const ModelFamily& family, const PosteriorSamples& samples,
                                      const GroupLikTable& table,
                                      const std::vector<std::vector<std::vector<double>>>& virtual_groups,
                                      double budget) {
  const auto& model = require_multi_level(family);
  if (samples.dim() != family.latent_dim()) throw UsageError("samples do not match the family's latent dimension");
  const std::size_t S = samples.size();
  if (static_cast<std::size_t>(table.log_lik.rows()) != S) throw UsageError("group likelihood table does not match samples");
  if (virtual_groups.empty()) throw UsageError("virtual group set is empty");
  for (const auto& group : virtual_groups) {
    if (group.empty()) throw UsageError("virtual group is empty");
    for (const auto& z : group) {
      if (z.size() != model.group_dim() || !model.in_group_support(z)) {
        throw UsageError("virtual group value outside the group support");
      }
    }
  }

  Eigen::VectorXd base(static_cast<Eigen::Index>(S));
  for (Eigen::Index s = 0; s < base.size(); ++s) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < table.log_lik.cols(); ++k) acc += table.log_lik(s, k);
    base[s] = acc;
  }
  std::vector<Eigen::MatrixXd> Lz;
  for (const auto& group : virtual_groups) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(group.size()));
    parallel_for(S, [&](std::size_t s) {
      const auto x = samples.row(s);
      for (std::size_t i = 0; i < group.size(); ++i) {
        m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = model.group_log_density(group[i], x);
      }
    });
    Lz.push_back(std::move(m));
  }
  return MultiLevelContext(std::move(Lz), std::move(base), budget);
}

ObjectiveTerms objective_single(const SingleLevelContext& ctx, const Eigen::VectorXd& w) {
  return terms(single_evidence(ctx, w), ctx.base());
}

Eigen::VectorXd grad_single(const SingleLevelContext& ctx, const Eigen::VectorXd& w) {
  const auto f = single_evidence(ctx, w);
  const auto c = sample_coefficients(f, ctx.base());
  const auto& L = ctx.L();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(L.cols());
  for (Eigen::Index i = 0; i < L.cols(); ++i) {
    double acc = 0.0;
    for (Eigen::Index s = 0; s < L.rows(); ++s) acc += c[static_cast<std::size_t>(s)] * L(s, i);
    g[i] = acc;
  }
  return g;
}

ObjectiveTerms objective_multi(const MultiLevelContext& ctx, const Eigen::VectorXd& v,
                               const std::vector<Eigen::VectorXd>& w) {
  return terms(multi_evidence(ctx, v, w).f, ctx.base());
}

MultiGradient grad_multi(const MultiLevelContext& ctx, const Eigen::VectorXd& v,
                         const std::vector<Eigen::VectorXd>& w) {
  const auto st = multi_evidence(ctx, v, w);
  const auto c = sample_coefficients(st.f, ctx.base());
  const Eigen::Map<const Eigen::VectorXd> cv(c.data(), static_cast<Eigen::Index>(c.size()));
  MultiGradient g;
  g.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ctx.groups()));
  for (std::size_t k = 0; k < ctx.groups(); ++k) {
    double acc = 0.0;
    for (std::size_t s = 0; s < c.size(); ++s) acc += c[s] * st.m[k][static_cast<Eigen::Index>(s)];
    g.v[static_cast<Eigen::Index>(k)] = acc;
    const Eigen::MatrixXd resp = ctx.mixture_responsibility(k, w[k]);
    g.w.push_back(v[static_cast<Eigen::Index>(k)] * (resp.transpose() * cv));
  }
  return g;
}

ObjectiveTerms objective_k1(const MultiLevelContext& ctx, const Eigen::VectorXd& w) {
  if (ctx.groups() != 1) throw UsageError("K=1 objective needs a context with exactly one virtual group");
  return objective_multi(ctx, Eigen::VectorXd::Ones(1), {w});
}

Eigen::VectorXd grad_k1(const MultiLevelContext& ctx, const Eigen::VectorXd& w) {
  if (ctx.groups() != 1) throw UsageError("K=1 objective needs a context with exactly one virtual group");
  return grad_multi(ctx, Eigen::VectorXd::Ones(1), {w}).w.front();
}

}  // namespace wvo
