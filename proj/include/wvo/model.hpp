#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wvo/random.hpp"

namespace wvo {

/// Latent (hyper)parameter vector in the family's internal, unconstrained coordinates.
using LatentPoint = std::span<const double>;

/// Group parameter z in natural coordinates (e.g. a success probability in (0, 1)).
using GroupLatent = std::span<const double>;

/// One observed value. `aux` carries a known per-observation constant whose meaning is
/// family specific: the noise scale sigma for eight-schools, the trial count n for rats.
struct Observation {
  double value = 0.0;
  double aux = 0.0;
};

using ObservationSet = std::vector<Observation>;

struct GroupedData {
  std::vector<std::string> labels;
  std::vector<ObservationSet> groups;

  std::size_t size() const { return groups.size(); }
  /// Copy without group `k`.
  GroupedData without(std::size_t k) const;
  GroupedData only(std::size_t k) const;
};

/// Throws DataError unless `groups` is nonempty, labelled, and every group is nonempty.
void check_grouped(const GroupedData& data);

enum class Structure { kSingleLevel, kMultiLevel };

class SingleLevelModel;
class MultiLevelModel;

/// Common surface of every model family: the prior over the latent point x and the
/// transform between internal and natural coordinates.
///
/// Families are immutable once constructed and may be shared across threads.
class ModelFamily {
 public:
  virtual ~ModelFamily() = default;

  virtual std::string_view name() const = 0;
  virtual Structure structure() const = 0;
  virtual std::size_t latent_dim() const = 0;

  /// Column names for internal coordinates, e.g. {"mu", "log_sigma"}.
  virtual std::vector<std::string> latent_names() const = 0;
  /// Column names for natural coordinates, e.g. {"mu", "sigma"}.
  virtual std::vector<std::string> natural_names() const = 0;

  virtual std::vector<double> to_natural(LatentPoint x) const = 0;
  virtual std::vector<double> from_natural(std::span<const double> natural) const = 0;

  /// log |d natural / d internal| at x.
  virtual double log_jacobian(LatentPoint x) const = 0;

  /// Prior log density in natural coordinates, up to an additive constant when improper.
  virtual double log_prior_natural(std::span<const double> natural) const = 0;

  /// Prior log density in internal coordinates, Jacobian included.
  double log_prior(LatentPoint x) const;

  /// Starting point for samplers.
  virtual std::vector<double> initial_point() const;

  virtual const SingleLevelModel* single_level() const { return nullptr; }
  virtual const MultiLevelModel* multi_level() const { return nullptr; }

  /// Throws DataError when `y` is outside the observation support.
  virtual void check_observation(const Observation& y) const = 0;

 protected:
  void check_dim(LatentPoint x) const;
};

/// p(x) p(y | x).
class SingleLevelModel : public ModelFamily {
 public:
  Structure structure() const final { return Structure::kSingleLevel; }
  const SingleLevelModel* single_level() const final { return this; }

  virtual double obs_loglik(const Observation& y, LatentPoint x) const = 0;

  /// Draw y ~ p(y | x). Aux fields are copied from `like` (only the value is random).
  virtual Observation sample_obs(LatentPoint x, Rng& rng, const Observation& like = {}) const = 0;

  double total_obs_loglik(const ObservationSet& ys, LatentPoint x) const;
};

/// p(x) p(z_k | x) p(y_k | z_k).
class MultiLevelModel : public ModelFamily {
 public:
  Structure structure() const final { return Structure::kMultiLevel; }
  const MultiLevelModel* multi_level() const final { return this; }

  virtual std::size_t group_dim() const = 0;
  virtual std::vector<std::string> group_names() const = 0;

  /// log p(z | x).
  virtual double group_log_density(GroupLatent z, LatentPoint x) const = 0;
  virtual bool in_group_support(GroupLatent z) const = 0;
  virtual std::vector<double> sample_group(LatentPoint x, Rng& rng) const = 0;

  virtual double obs_loglik(const Observation& y, GroupLatent z) const = 0;
  virtual Observation sample_obs(GroupLatent z, Rng& rng, const Observation& like = {}) const = 0;

  /// log p(y_k | z). Defaults to the sum of obs_loglik.
  virtual double group_loglik(const ObservationSet& ys, GroupLatent z) const;

  /// group_loglik for `out.size()` draws stored row-major in `zs`.
  virtual void group_loglik_batch(const ObservationSet& ys, std::span<const double> zs,
                                  std::span<double> out) const;

  /// Exact log p(y_k | x) when the group integral has a closed form.
  virtual std::optional<double> group_marginal_loglik(const ObservationSet& ys,
                                                      LatentPoint x) const;

  /// Sampler coordinates for a group latent. `u` is unconstrained; the mapping may
  /// depend on x (non-centred parameterisations).
  virtual std::vector<double> group_from_internal(std::span<const double> u, LatentPoint x) const = 0;
  virtual std::vector<double> group_to_internal(GroupLatent z, LatentPoint x) const = 0;
  /// log |d z / d u|.
  virtual double group_internal_log_jacobian(std::span<const double> u, LatentPoint x) const = 0;
  /// Sampler starting coordinates for a group with data `ys`. Defaults to zeros.
  virtual std::vector<double> initial_group_internal(const ObservationSet& ys, LatentPoint x) const;
};

const SingleLevelModel& require_single_level(const ModelFamily& family);
const MultiLevelModel& require_multi_level(const ModelFamily& family);

/// Names accepted by make_family.
std::vector<std::string> family_names();

/// Throws UsageError for unknown names.
std::shared_ptr<const ModelFamily> make_family(std::string_view name);

}  // namespace wvo
