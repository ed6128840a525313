#pragma once
// Scalar Gaussian probability helpers, with log-domain variants that stay
// accurate far into the tails where the plain CDF underflows.

#include <limits>

namespace smallball {

// P{|g| <= z} for a standard Gaussian g. Accepts z in [0, +inf]; absolute error
// <= 1e-14. Throws std::domain_error for negative or NaN input.
double std_normal_interval(double z);

// log P{|g| <= z}. Relative error <= 1e-10 for z >= 1e-12; returns -inf at 0.
// For tiny z it switches to the density expansion log(z * sqrt(2/pi)) + O(z^2).
double log_std_normal_interval(double z);

// log P{|g| > z}. Finite for all finite z (asymptotic expansion past the point
// where erfc underflows), -inf at +inf. Used for product tail certificates.
double log_std_normal_two_tail(double z);

// log(erfc(x)) for x >= 0, finite for all finite x.
double log_erfc(double x);

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace smallball
