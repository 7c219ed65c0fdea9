#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace wvo {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Max-shifted log(sum(exp(xs))). Returns -inf iff every entry is -inf.
/// Throws UsageError on an empty input or a NaN entry.
double logsumexp(std::span<const double> xs);

/// Streaming accumulator for logsumexp; order of `add` calls fixes the result bit for bit.
class LogSumExp {
 public:
  void add(double x);
  double value() const;

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

inline double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// log of the logistic function, stable for large |u|.
inline double log_logistic(double u) {
  return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u));
}

inline double logistic(double u) {
  return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

}  // namespace wvo
