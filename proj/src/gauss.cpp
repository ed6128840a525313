#include "smallball/gauss.hpp"

#include <cmath>
#include <stdexcept>

namespace smallball {
namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kHalfLogTwoOverPi = -0.2257913526447274324;  // 0.5 * log(2/pi)

void check_arg(double z) {
  if (std::isnan(z) || z < 0.0) {
    throw std::domain_error("std_normal_interval: z must be a nonnegative real (or +inf)");
  }
}

}  // namespace

double std_normal_interval(double z) {
  check_arg(z);
  if (std::isinf(z)) return 1.0;
  return std::erf(z * kInvSqrt2);
}

double log_erfc(double x) {
  // erfc underflows near x ~ 26.6; switch to the asymptotic series well before.
  if (x < 25.0) return std::log(std::erfc(x));
  const double x2 = x * x;
  // erfc(x) = exp(-x^2) / (x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - 15/(8x^6) + ...)
  const double inv = 1.0 / (2.0 * x2);
  const double series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv));
  return -x2 - std::log(x * std::sqrt(M_PI)) + std::log(series);
}

double log_std_normal_interval(double z) {
  check_arg(z);
  if (std::isinf(z)) return 0.0;
  if (z == 0.0) return kNegInf;
  if (z < 1e-8) {
    // P = z*sqrt(2/pi) * (1 - z^2/6 + O(z^4))
    return std::log(z) + kHalfLogTwoOverPi + std::log1p(-z * z / 6.0);
  }
  const double x = z * kInvSqrt2;
  if (x < 0.5) return std::log(std::erf(x));
  const double tail = std::erfc(x);
  if (tail > 1e-300) return std::log1p(-tail);
  // P{|g| <= z} is 1 minus a tail too small for log1p's argument; the log of
  // the interval probability is then -tail to machine precision.
  return -std::exp(log_erfc(x));
}

double log_std_normal_two_tail(double z) {
  check_arg(z);
  if (std::isinf(z)) return kNegInf;
  return log_erfc(z * kInvSqrt2);
}

}  // namespace smallball
