#include "wvo/optimizer.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "wvo/errors.hpp"
#include "wvo/parallel.hpp"
#include "wvo/random.hpp"

namespace wvo {

namespace {

constexpr std::uint64_t kRestartStream = 0x7265'7374'6172'74ULL;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

/// A weight problem made of simplex blocks, each with its own budget.
struct Problem {
  std::vector<std::size_t> sizes;
  std::vector<double> budgets;
  std::function<ObjectiveTerms(const std::vector<Eigen::VectorXd>&)> objective;
  std::function<std::vector<Eigen::VectorXd>(const std::vector<Eigen::VectorXd>&)> gradient;
};

struct RunOutcome {
  std::vector<Eigen::VectorXd> weights;
  ObjectiveTerms terms;
  std::vector<double> trace;
  RestartRecord record;
};

std::vector<Eigen::VectorXd> to_weights(const Problem& p, const std::vector<Eigen::VectorXd>& theta) {
  std::vector<Eigen::VectorXd> w;
  w.reserve(theta.size());
  for (std::size_t b = 0; b < theta.size(); ++b) w.push_back(reparam_scaled_softmax(theta[b], p.budgets[b]));
  return w;
}

RunOutcome run_restart(const Problem& p, const OptimizerConfig& config, std::size_t restart) {
  std::vector<Eigen::VectorXd> theta;
  Rng rng = make_rng(config.seed, kRestartStream, restart);
  for (std::size_t size : p.sizes) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
    if (restart > 0) {
      for (Eigen::Index j = 0; j < t.size(); ++j) t[j] = draw_normal(rng);
    }
    theta.push_back(std::move(t));
  }
  std::vector<Eigen::VectorXd> m1, m2;
  for (const auto& t : theta) {
    m1.push_back(Eigen::VectorXd::Zero(t.size()));
    m2.push_back(Eigen::VectorXd::Zero(t.size()));
  }

  RunOutcome out;
  out.terms.value = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const auto w = to_weights(p, theta);
    const ObjectiveTerms current = p.objective(w);
    if (!std::isfinite(current.value)) {
      if (it == 0 && restart == 0) throw DegenerateContextError("optimizer: objective is not finite at uniform weights");
      break;
    }
    out.trace.push_back(current.value);
    out.record.iterations = it + 1;
    if (current.value > out.terms.value) {
      out.terms = current;
      out.weights = w;
    }
    const std::size_t n = out.trace.size();
    if (n > config.window && std::abs(out.trace[n - 1] - out.trace[n - 1 - config.window]) < config.tolerance) {
      out.record.converged = true;
      break;
    }

    const auto g = p.gradient(w);
    double gmax = 0.0;
    std::vector<Eigen::VectorXd> gtheta(theta.size());
    for (std::size_t b = 0; b < theta.size(); ++b) {
      // d/dtheta_j of a function of w = budget * softmax(theta): w_j * (g_j - sum_i p_i g_i)
      const double mean = w[b].dot(g[b]) / p.budgets[b];
      gtheta[b] = w[b].array() * (g[b].array() - mean);
      gmax = std::max(gmax, gtheta[b].cwiseAbs().maxCoeff());
    }
    if (!std::isfinite(gmax)) break;
    if (gmax == 0.0) {
      out.record.converged = true;
      break;
    }
    const double t = static_cast<double>(it + 1);
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t b = 0; b < theta.size(); ++b) {
      m1[b] = kBeta1 * m1[b] + (1.0 - kBeta1) * gtheta[b];
      m2[b] = kBeta2 * m2[b] + (1.0 - kBeta2) * gtheta[b].cwiseProduct(gtheta[b]);
      theta[b].array() +=
          config.step_size * (m1[b].array() / c1) / ((m2[b].array() / c2).sqrt() + kAdamEps);
    }
  }
  out.record.objective = out.terms.value;
  return out;
}

OptimizationResult solve(const Problem& p, const OptimizerConfig& config) {
  config.validate();
  std::vector<RunOutcome> runs(config.restarts);
  parallel_for(config.restarts, [&](std::size_t r) { runs[r] = run_restart(p, config, r); });

  OptimizationResult result;
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    result.restarts.push_back(runs[r].record);
    if (!runs[r].weights.empty() && (runs[best].weights.empty() || runs[r].terms.value > runs[best].terms.value)) {
      best = r;
    }
  }
  if (runs[best].weights.empty()) throw DegenerateContextError("optimizer: no restart produced a finite objective");
  result.best_restart = best;
  result.objective = runs[best].terms.value;
  result.terms = runs[best].terms;
  result.trace = std::move(runs[best].trace);
  result.converged = runs[best].record.converged;
  auto& w = runs[best].weights;
  if (w.size() == 1) {
    result.weights = std::move(w.front());
  } else {
    result.group_weights = std::move(w.front());
    result.within.assign(std::make_move_iterator(w.begin() + 1), std::make_move_iterator(w.end()));
  }
  return result;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (max_iterations < 1) throw UsageError("optimizer: max iterations must be at least 1");
  if (!(step_size > 0.0)) throw UsageError("optimizer: step size must be positive");
  if (!(tolerance > 0.0)) throw UsageError("optimizer: tolerance must be positive");
  if (window < 1) throw UsageError("optimizer: window must be at least 1");
  if (restarts < 1) throw UsageError("optimizer: restarts must be at least 1");
}

Eigen::VectorXd reparam_scaled_softmax(const Eigen::VectorXd& theta, double budget) {
  if (theta.size() == 0) throw UsageError("softmax of an empty vector");
  const double top = theta.maxCoeff();
  Eigen::VectorXd e = (theta.array() - top).exp();
  return budget * e / e.sum();
}

OptimizationResult optimize_single(const SingleLevelContext& ctx, const OptimizerConfig& config) {
  Problem p;
  p.sizes = {ctx.virtual_count()};
  p.budgets = {ctx.budget()};
  p.objective = [&ctx](const std::vector<Eigen::VectorXd>& w) { return objective_single(ctx, w[0]); };
  p.gradient = [&ctx](const std::vector<Eigen::VectorXd>& w) {
    return std::vector<Eigen::VectorXd>{grad_single(ctx, w[0])};
  };
  return solve(p, config);
}

OptimizationResult optimize_k1(const MultiLevelContext& ctx, const OptimizerConfig& config) {
  if (ctx.groups() != 1) throw UsageError("K=1 optimizer needs a context with exactly one virtual group");
  Problem p;
  p.sizes = {ctx.per_group()};
  p.budgets = {1.0};
  p.objective = [&ctx](const std::vector<Eigen::VectorXd>& w) { return objective_k1(ctx, w[0]); };
  p.gradient = [&ctx](const std::vector<Eigen::VectorXd>& w) {
    return std::vector<Eigen::VectorXd>{grad_k1(ctx, w[0])};
  };
  return solve(p, config);
}

OptimizationResult optimize_multi(const MultiLevelContext& ctx, const OptimizerConfig& config) {
  Problem p;
  p.sizes.push_back(ctx.groups());
  p.budgets.push_back(ctx.budget());
  for (std::size_t k = 0; k < ctx.groups(); ++k) {
    p.sizes.push_back(ctx.per_group());
    p.budgets.push_back(1.0);
  }
  p.objective = [&ctx](const std::vector<Eigen::VectorXd>& w) {
    return objective_multi(ctx, w[0], std::vector<Eigen::VectorXd>(w.begin() + 1, w.end()));
  };
  p.gradient = [&ctx](const std::vector<Eigen::VectorXd>& w) {
    auto g = grad_multi(ctx, w[0], std::vector<Eigen::VectorXd>(w.begin() + 1, w.end()));
    std::vector<Eigen::VectorXd> out{std::move(g.v)};
    for (auto& gw : g.w) out.push_back(std::move(gw));
    return out;
  };
  return solve(p, config);
}

Eigen::VectorXd round_small_weights(const Eigen::VectorXd& w, double budget, double rel) {
  Eigen::VectorXd out = w;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out[i] < rel * budget) out[i] = 0.0;
  }
  const double total = out.sum();
  if (!(total > 0.0)) throw NumericalError("every weight fell below the rounding threshold");
  out *= budget / total;
  return out;
}

}  // namespace wvo
