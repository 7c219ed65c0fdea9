#include "wvo/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wvo {

Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

double draw_normal(Rng& rng, double mean, double sd) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return mean + sd * dist(rng);
}

double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_beta(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  double eta = x / (x + y);
  if (!(eta > 0.0)) eta = std::numeric_limits<double>::min();
  if (!(eta < 1.0)) eta = std::nextafter(1.0, 0.0);
  return eta;
}

}  // namespace wvo
