#pragma once

#include <cstdint>
#include <random>

namespace wvo {

using Rng = std::mt19937_64;

/// Independent stream derived from a base seed, a stream tag and an index.
/// Identical arguments always give identical streams.
Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

double draw_normal(Rng& rng, double mean = 0.0, double sd = 1.0);
double draw_uniform(Rng& rng);

/// Beta draw through two gamma variates; clamped into the open interval (0, 1).
double draw_beta(Rng& rng, double a, double b);

}  // namespace wvo
