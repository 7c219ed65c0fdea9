#include "wvo/virtual_obs.hpp"

#include "wvo/errors.hpp"
#include "wvo/random.hpp"

namespace wvo {

namespace {

constexpr std::uint64_t kVirtualStream = 0x7669'7274'7561'6cULL;

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

VirtualObservationSet draw_virtual_obs_single(const ModelFamily& family, const PosteriorSamples& samples,
                                              std::size_t n_virtual, std::uint64_t seed,
                                              const ObservationSet& like) {
  const auto& model = require_single_level(family);
  if (n_virtual < 1) throw UsageError("virtual set size must be at least 1");
  if (samples.size() < 1 || samples.dim() != family.latent_dim()) throw UsageError("samples do not match the family");
  Rng rng = make_rng(seed, kVirtualStream, 0);
  VirtualObservationSet out;
  out.level = VirtualObservationSet::Level::kSingle;
  out.seed = seed;
  for (std::size_t i = 0; i < n_virtual; ++i) {
    const std::size_t s = uniform_index(rng, samples.size());
    const Observation tmpl = like.empty() ? Observation{} : like[i % like.size()];
    Observation y = model.sample_obs(samples.row(s), rng, tmpl);
    model.check_observation(y);
    out.observations.push_back(y);
    out.sources.push_back(s);
  }
  return out;
}

VirtualObservationSet draw_virtual_groups(const ModelFamily& family, const PosteriorSamples& samples,
                                          std::size_t k_virtual, std::size_t m_virtual, std::uint64_t seed) {
  const auto& model = require_multi_level(family);
  if (k_virtual < 1 || m_virtual < 1) throw UsageError("virtual group sizes must be at least 1");
  if (samples.size() < 1 || samples.dim() != family.latent_dim()) throw UsageError("samples do not match the family");
  Rng rng = make_rng(seed, kVirtualStream, 1);
  VirtualObservationSet out;
  out.level = VirtualObservationSet::Level::kMulti;
  out.seed = seed;
  for (std::size_t k = 0; k < k_virtual; ++k) {
    std::vector<std::vector<double>> group;
    std::vector<std::size_t> sources;
    for (std::size_t i = 0; i < m_virtual; ++i) {
      const std::size_t s = uniform_index(rng, samples.size());
      auto z = model.sample_group(samples.row(s), rng);
      if (!model.in_group_support(z)) throw NumericalError("group draw fell outside its support");
      group.push_back(std::move(z));
      sources.push_back(s);
    }
    out.groups.push_back(std::move(group));
    out.group_sources.push_back(std::move(sources));
  }
  return out;
}

}  // namespace wvo
