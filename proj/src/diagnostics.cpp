#include "wvo/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "wvo/errors.hpp"
#include "wvo/numeric.hpp"

namespace wvo {

namespace {

void check_budget(const Eigen::VectorXd& w, double budget, const char* what) {
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw UsageError(std::string(what) + ": weights must be finite and nonnegative");
  }
  if (std::abs(w.sum() - budget) > 1e-9 * std::max(1.0, budget)) {
    throw UsageError(std::string(what) + ": weights sum to " + std::to_string(w.sum()) + ", expected " +
                     std::to_string(budget));
  }
}

double sample_mean(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double v : xs) acc += v;
  return acc / static_cast<double>(xs.size());
}

double sample_var(const std::vector<double>& xs) {
  const double m = sample_mean(xs);
  double acc = 0.0;
  for (double v : xs) acc += (v - m) * (v - m);
  return acc / static_cast<double>(xs.size() - 1);
}

}  // namespace

ReconditionedModel::ReconditionedModel(std::shared_ptr<const ModelFamily> family, VirtualObservationSet vobs,
                                       WeightAssignment weights, double budget)
    : family_(std::move(family)), vobs_(std::move(vobs)), weights_(std::move(weights)) {
  if (vobs_.level == VirtualObservationSet::Level::kSingle) {
    const auto& model = require_single_level(*family_);
    if (static_cast<std::size_t>(weights_.w.size()) != vobs_.observations.size()) {
      throw UsageError("reconditioning: one weight per virtual observation is required");
    }
    for (const auto& y : vobs_.observations) model.check_observation(y);
    check_budget(weights_.w, budget, "reconditioning");
    return;
  }
  const auto& model = require_multi_level(*family_);
  if (static_cast<std::size_t>(weights_.v.size()) != vobs_.groups.size() || weights_.within.size() != vobs_.groups.size()) {
    throw UsageError("reconditioning: one group weight and one weight vector per virtual group are required");
  }
  check_budget(weights_.v, budget, "reconditioning (group weights)");
  for (std::size_t k = 0; k < vobs_.groups.size(); ++k) {
    if (static_cast<std::size_t>(weights_.within[k].size()) != vobs_.groups[k].size()) {
      throw UsageError("reconditioning: within-group weights do not match the group size");
    }
    check_budget(weights_.within[k], 1.0, "reconditioning (within-group weights)");
    std::vector<double> logs;
    for (std::size_t i = 0; i < vobs_.groups[k].size(); ++i) {
      if (!model.in_group_support(vobs_.groups[k][i])) throw UsageError("reconditioning: group value outside support");
      logs.push_back(std::log(weights_.within[k][static_cast<Eigen::Index>(i)]));
    }
    log_within_.push_back(std::move(logs));
  }
}

double ReconditionedModel::log_evidence(LatentPoint x) const {
  if (vobs_.level == VirtualObservationSet::Level::kSingle) {
    const auto& model = *family_->single_level();
    double acc = 0.0;
    for (std::size_t i = 0; i < vobs_.observations.size(); ++i) {
      const double w = weights_.w[static_cast<Eigen::Index>(i)];
      if (w == 0.0) continue;
      acc += w * model.obs_loglik(vobs_.observations[i], x);
    }
    return acc;
  }
  const auto& model = *family_->multi_level();
  double acc = 0.0;
  std::vector<double> terms;
  for (std::size_t k = 0; k < vobs_.groups.size(); ++k) {
    const double v = weights_.v[static_cast<Eigen::Index>(k)];
    if (v == 0.0) continue;
    terms.clear();
    for (std::size_t i = 0; i < vobs_.groups[k].size(); ++i) {
      terms.push_back(log_within_[k][i] + model.group_log_density(vobs_.groups[k][i], x));
    }
    acc += v * logsumexp(terms);
  }
  return acc;
}

PosteriorTarget ReconditionedModel::target(PosteriorTarget::Term prior) const {
  PosteriorTarget t(*family_);
  if (prior) t.set_prior(std::move(prior));
  t.add_evidence([this](LatentPoint x) { return log_evidence(x); });
  return t;
}

std::pair<double, double> conjugate_beta_bernoulli_posterior(double alpha, double beta, const ObservationSet& ys) {
  return conjugate_beta_bernoulli_posterior(alpha, beta, ys, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ys.size())));
}

std::pair<double, double> conjugate_beta_bernoulli_posterior(double alpha, double beta, const ObservationSet& ys,
                                                             const Eigen::VectorXd& weights) {
  if (static_cast<std::size_t>(weights.size()) != ys.size()) throw UsageError("one weight per observation is required");
  double succ = 0.0;
  double fail = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double y = ys[i].value;
    if (y != 0.0 && y != 1.0) throw DataError("Bernoulli observation must be 0 or 1");
    const double w = weights[static_cast<Eigen::Index>(i)];
    succ += w * y;
    fail += w * (1.0 - y);
  }
  if (succ < 0.0 || fail < 0.0) throw UsageError("negative effective counts");
  return {alpha + succ, beta + fail};
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("KS statistic needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

std::vector<double> column_means(const PosteriorSamples& samples) {
  std::vector<double> out;
  for (std::size_t j = 0; j < samples.dim(); ++j) out.push_back(sample_mean(samples.column(j)));
  return out;
}

std::vector<double> column_stds(const PosteriorSamples& samples) {
  std::vector<double> out;
  for (std::size_t j = 0; j < samples.dim(); ++j) out.push_back(std::sqrt(sample_var(samples.column(j))));
  return out;
}

PosteriorComparison compare_posteriors(const PosteriorSamples& a, const PosteriorSamples& b) {
  if (a.names != b.names || a.dim() != b.dim()) throw UsageError("compared posteriors have different parameters");
  if (a.size() < 2 || b.size() < 2) throw UsageError("compared posteriors need at least two draws");
  PosteriorComparison out;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    const auto ca = a.column(j);
    const auto cb = b.column(j);
    const double sa = std::sqrt(sample_var(ca));
    const double sb = std::sqrt(sample_var(cb));
    if (!(sa > 0.0)) throw DegenerateContextError("reference posterior has zero spread in " + a.names[j]);
    DimensionComparison d;
    d.name = a.names[j];
    d.mean_diff = std::abs(sample_mean(ca) - sample_mean(cb)) / sa;
    d.std_ratio = sb / sa;
    d.ks = ks_statistic(ca, cb);
    out.dims.push_back(d);
  }
  return out;
}

bool passes(const DimensionComparison& d, const Thresholds& t) {
  return d.mean_diff < t.max_mean_diff && d.std_ratio >= t.min_std_ratio && d.std_ratio <= t.max_std_ratio &&
         d.ks < t.max_ks;
}

bool passes(const PosteriorComparison& c, const Thresholds& t) {
  return std::all_of(c.dims.begin(), c.dims.end(), [&](const auto& d) { return passes(d, t); });
}

double FittedMarginal::log_density(double value) const {
  if (kind == Kind::kNormal) return log_normal_pdf(value, a, b);
  if (!(value > 0.0)) return kNegInf;
  return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(value) - b * value;
}

std::vector<FittedMarginal> meb_fit(const PosteriorSamples& natural_samples,
                                    const std::vector<FittedMarginal::Kind>& kinds) {
  if (kinds.size() != natural_samples.dim()) throw UsageError("MEB fit needs one distribution kind per dimension");
  if (natural_samples.size() < 2) throw UsageError("MEB fit needs at least two draws");
  std::vector<FittedMarginal> out;
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    const auto col = natural_samples.column(j);
    const double m = sample_mean(col);
    const double var = sample_var(col);
    if (!(var > 0.0)) throw DegenerateContextError("MEB fit: zero variance in dimension " + std::to_string(j));
    FittedMarginal f;
    f.kind = kinds[j];
    if (f.kind == FittedMarginal::Kind::kNormal) {
      f.a = m;
      f.b = std::sqrt(var);
    } else {
      if (std::any_of(col.begin(), col.end(), [](double v) { return !(v > 0.0); })) {
        throw UsageError("MEB fit: Gamma requested for a dimension with non-positive values");
      }
      f.a = m * m / var;
      f.b = m / var;
    }
    out.push_back(f);
  }
  return out;
}

PosteriorTarget::Term meb_prior(std::shared_ptr<const ModelFamily> family, std::vector<FittedMarginal> fits) {
  if (fits.size() != family->latent_dim()) throw UsageError("MEB prior needs one fitted marginal per dimension");
  return [family = std::move(family), fits = std::move(fits)](LatentPoint x) {
    const auto natural = family->to_natural(x);
    double acc = family->log_jacobian(x);
    for (std::size_t j = 0; j < fits.size(); ++j) acc += fits[j].log_density(natural[j]);
    return acc;
  };
}

}  // namespace wvo
