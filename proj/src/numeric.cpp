#include "wvo/numeric.hpp"

#include <algorithm>

#include "wvo/errors.hpp"

namespace wvo {

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("logsumexp of an empty vector");
  double max = kNegInf;
  for (double x : xs) {
    if (std::isnan(x)) throw UsageError("logsumexp: NaN input");
    max = std::max(max, x);
  }
  if (max == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - max);
  return max + std::log(sum);
}

void LogSumExp::add(double x) {
  if (x == kNegInf) return;
  if (x <= max_) {
    sum_ += std::exp(x - max_);
  } else {
    sum_ = sum_ * std::exp(max_ - x) + 1.0;
    max_ = x;
  }
}

double LogSumExp::value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

}  // namespace wvo
