#include "wvo/model.hpp"

#include <cmath>

#include "wvo/errors.hpp"
#include "wvo/families.hpp"

namespace wvo {

GroupedData GroupedData::without(std::size_t k) const {
  if (k >= groups.size()) throw UsageError("group index out of range");
  GroupedData out;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (j == k) continue;
    out.labels.push_back(labels[j]);
    out.groups.push_back(groups[j]);
  }
  return out;
}

GroupedData GroupedData::only(std::size_t k) const {
  if (k >= groups.size()) throw UsageError("group index out of range");
  return GroupedData{{labels[k]}, {groups[k]}};
}

void check_grouped(const GroupedData& data) {
  if (data.groups.empty()) throw DataError("grouped data has no groups");
  if (data.labels.size() != data.groups.size()) throw DataError("group labels do not match groups");
  for (std::size_t k = 0; k < data.groups.size(); ++k) {
    if (data.groups[k].empty()) throw DataError("group '" + data.labels[k] + "' is empty");
  }
}

void ModelFamily::check_dim(LatentPoint x) const {
  if (x.size() != latent_dim()) {
    throw UsageError(std::string(name()) + ": latent point has dimension " + std::to_string(x.size()) +
                     ", expected " + std::to_string(latent_dim()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw UsageError(std::string(name()) + ": non-finite latent point");
  }
}

double ModelFamily::log_prior(LatentPoint x) const {
  check_dim(x);
  const auto natural = to_natural(x);
  return log_prior_natural(natural) + log_jacobian(x);
}

std::vector<double> ModelFamily::initial_point() const { return std::vector<double>(latent_dim(), 0.0); }

double SingleLevelModel::total_obs_loglik(const ObservationSet& ys, LatentPoint x) const {
  double total = 0.0;
  for (const auto& y : ys) total += obs_loglik(y, x);
  return total;
}

double MultiLevelModel::group_loglik(const ObservationSet& ys, GroupLatent z) const {
  double total = 0.0;
  for (const auto& y : ys) total += obs_loglik(y, z);
  return total;
}

void MultiLevelModel::group_loglik_batch(const ObservationSet& ys, std::span<const double> zs,
                                         std::span<double> out) const {
  const std::size_t dz = group_dim();
  if (zs.size() != out.size() * dz) throw UsageError("group_loglik_batch: size mismatch");
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = group_loglik(ys, zs.subspan(t * dz, dz));
}

std::optional<double> MultiLevelModel::group_marginal_loglik(const ObservationSet&, LatentPoint) const {
  return std::nullopt;
}

std::vector<double> MultiLevelModel::initial_group_internal(const ObservationSet&, LatentPoint) const {
  return std::vector<double>(group_dim(), 0.0);
}

const SingleLevelModel& require_single_level(const ModelFamily& family) {
  if (const auto* m = family.single_level()) return *m;
  throw UsageError(std::string(family.name()) + " is a multi-level family; a single-level family is required");
}

const MultiLevelModel& require_multi_level(const ModelFamily& family) {
  if (const auto* m = family.multi_level()) return *m;
  throw UsageError(std::string(family.name()) + " is a single-level family; a multi-level family is required");
}

std::vector<std::string> family_names() {
  return {"beta-bernoulli", "normal-noninformative", "normal-hyperprior", "eight-schools", "rats-binomial"};
}

std::shared_ptr<const ModelFamily> make_family(std::string_view name) {
  if (name == "beta-bernoulli") return std::make_shared<BetaBernoulli>();
  if (name == "normal-noninformative") return std::make_shared<NormalNoninformative>();
  if (name == "normal-hyperprior") return std::make_shared<NormalHyperprior>();
  if (name == "eight-schools") return std::make_shared<EightSchools>();
  if (name == "rats-binomial") return std::make_shared<RatsBinomial>();
  throw UsageError("unknown model family '" + std::string(name) + "'");
}

}  // namespace wvo
