#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "wvo/objective.hpp"

namespace wvo {

struct OptimizerConfig {
  std::size_t max_iterations = 5000;
  double step_size = 0.05;
  /// Converged when the objective moved less than this over the last `window` iterations.
  double tolerance = 1e-6;
  std::size_t window = 20;
  std::size_t restarts = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RestartRecord {
  std::size_t iterations = 0;
  double objective = 0.0;
  bool converged = false;
};

struct OptimizationResult {
  /// Single-level and K=1: `weights` only. Multi-level: `group_weights` (v) and one
  /// simplex vector per group in `within`.
  Eigen::VectorXd weights;
  Eigen::VectorXd group_weights;
  std::vector<Eigen::VectorXd> within;

  double objective = 0.0;
  ObjectiveTerms terms;
  /// Objective per iteration of the best restart.
  std::vector<double> trace;
  bool converged = false;
  std::size_t best_restart = 0;
  std::vector<RestartRecord> restarts;
};

/// budget * softmax(theta), max-shifted.
Eigen::VectorXd reparam_scaled_softmax(const Eigen::VectorXd& theta, double budget);

/// Gradient ascent (Adam) over theta with w = reparam_scaled_softmax(theta, budget); the
/// first restart starts from theta = 0 and the rest from standard normal draws.
OptimizationResult optimize_single(const SingleLevelContext& ctx, const OptimizerConfig& config);
OptimizationResult optimize_k1(const MultiLevelContext& ctx, const OptimizerConfig& config);
OptimizationResult optimize_multi(const MultiLevelContext& ctx, const OptimizerConfig& config);

/// Zeroes entries below rel * budget and rescales the rest back to `budget`.
Eigen::VectorXd round_small_weights(const Eigen::VectorXd& w, double budget, double rel = 1e-8);

}  // namespace wvo
