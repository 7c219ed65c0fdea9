#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wvo/model.hpp"
#include "wvo/objective.hpp"
#include "wvo/random.hpp"
#include "wvo/sampler.hpp"

namespace wvo::testing {

inline std::string data_path(const std::string& name) { return std::string(WVO_DATA_DIR) + "/" + name; }

inline ObservationSet values(std::initializer_list<double> ys) {
  ObservationSet out;
  for (double y : ys) out.push_back({y, 0.0});
  return out;
}

inline ObservationSet binary(const std::vector<int>& ys) {
  ObservationSet out;
  for (int y : ys) out.push_back({static_cast<double>(y), 0.0});
  return out;
}

/// Exact Beta(a, b) draws, stored as logit(theta) like the sampler output.
inline PosteriorSamples beta_samples(double a, double b, std::size_t S, std::uint64_t seed) {
  Rng rng = make_rng(seed, 99);
  PosteriorSamples out;
  out.names = {"logit_theta"};
  out.draws.resize(static_cast<Eigen::Index>(S), 1);
  for (std::size_t s = 0; s < S; ++s) {
    const double t = draw_beta(rng, a, b);
    out.draws(static_cast<Eigen::Index>(s), 0) = std::log(t) - std::log1p(-t);
  }
  out.chain_lengths = {S};
  return out;
}

inline PosteriorSamples from_rows(const std::vector<std::vector<double>>& rows, std::vector<std::string> names) {
  PosteriorSamples out;
  out.names = std::move(names);
  out.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    for (std::size_t j = 0; j < rows[s].size(); ++j) {
      out.draws(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = rows[s][j];
    }
  }
  out.chain_lengths = {rows.size()};
  return out;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double mean, double sd) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = draw_normal(rng, mean, sd);
  }
  return m;
}

inline Eigen::VectorXd random_weights(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = lo + (hi - lo) * draw_uniform(rng);
  return w;
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero components from turning
/// rounding noise into a large relative error.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central finite difference of f along coordinate i.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                  Eigen::Index i, double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

inline double var_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

}  // namespace wvo::testing
