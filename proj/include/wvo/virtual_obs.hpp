#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wvo/model.hpp"
#include "wvo/sampler.hpp"

namespace wvo {

/// Virtual observations drawn from the posterior predictive, with the posterior-sample
/// index each value came from.
struct VirtualObservationSet {
  enum class Level { kSingle, kMulti };
  Level level = Level::kSingle;
  std::uint64_t seed = 0;

  /// Single level: N̂ observations.
  ObservationSet observations;
  std::vector<std::size_t> sources;

  /// Multi level: groups[k][i] is a group latent (natural coordinates).
  std::vector<std::vector<std::vector<double>>> groups;
  std::vector<std::vector<std::size_t>> group_sources;

  std::size_t size() const { return level == Level::kSingle ? observations.size() : groups.size(); }
};

/// yhat_i ~ p(y | x_s) with s uniform. Aux fields are taken from `like`, cycling, when given.
VirtualObservationSet draw_virtual_obs_single(const ModelFamily& family, const PosteriorSamples& samples,
                                              std::size_t n_virtual, std::uint64_t seed,
                                              const ObservationSet& like = {});

/// zhat_ki ~ p(z | x_s) with s uniform, K̂ groups of M̂ values.
VirtualObservationSet draw_virtual_groups(const ModelFamily& family, const PosteriorSamples& samples,
                                          std::size_t k_virtual, std::size_t m_virtual, std::uint64_t seed);

}  // namespace wvo
