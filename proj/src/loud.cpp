#include "smallball/loud.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace smallball {
namespace {

// p^m as int64 if it fits below 2^61 (so 2*p^m cannot overflow), else 0.
std::int64_t checked_pow(std::int64_t p, int m) {
  std::int64_t v = 1;
  const std::int64_t limit = std::int64_t{1} << 61;
  for (int i = 0; i < m; ++i) {
    if (v > limit / p) return 0;
    v *= p;
  }
  return v;
}

inline double tooth_shape(double u) {  // u in [0,2): distance profile of one tooth
  return u <= 1.0 ? u : 2.0 - u;
}

}  // namespace

double sawtooth_eval(const SawtoothSpec& spec, double t) {
  if (!(spec.h > 0.0)) throw std::domain_error("sawtooth_eval: half-period h must be positive");
  double u = std::fabs(t / spec.h);
  u = std::fmod(u, 2.0);
  return tooth_shape(u);
}

LoudFamily::LoudFamily(int p, int A, double alpha, double tail_tol)
    : p_(p), A_(A), alpha_(alpha), tail_tol_(tail_tol) {
  if (p < 2) throw std::invalid_argument("LoudFamily: base p must be an integer >= 2");
  if (A < 1) throw std::invalid_argument("LoudFamily: scale exponent A must be a positive integer");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("LoudFamily: alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  if (!(tail_tol > 0.0)) throw std::invalid_argument("LoudFamily: tail_tol must be positive");
  if (!(std::pow(double(p), 2.0 * (1.0 - alpha) * A) > 2.0)) {
    throw std::invalid_argument(
        "LoudFamily: lacunarity condition p^(2*(1-alpha)*A) > 2 violated for p=" +
        std::to_string(p) + ", A=" + std::to_string(A) + ", alpha=" + std::to_string(alpha));
  }
  r_amp_ = std::pow(double(p), -2.0 * alpha * A);
  r_per_ = std::pow(double(p), -2.0 * A);

  // Smallest K whose dropped amplitude tail r^(K+1)/(1-r) is below tail_tol.
  K_ = 1;
  double tail = r_amp_ * r_amp_ / (1.0 - r_amp_);
  while (tail >= tail_tol_ && K_ < 10000) {
    tail *= r_amp_;
    ++K_;
  }
  amp_.assign(static_cast<std::size_t>(K_) + 1, 0.0);
  double a = 1.0;
  for (int k = 1; k <= K_; ++k) {
    a *= r_amp_;
    amp_[static_cast<std::size_t>(k)] = a;
  }
}

double LoudFamily::basis(int k, double t) const {
  if (k < 1) throw std::domain_error("LoudFamily::basis: tooth index k must be >= 1");
  const double h = std::pow(r_per_, k);
  const double a = k <= K_ ? amp_[static_cast<std::size_t>(k)] : std::pow(r_amp_, k);
  return a * sawtooth_eval({h}, t);
}

double LoudFamily::f(double t) const {
  // Reduce t through the nested periods 2h_1 > 2h_2 > ... so every tooth sees a
  // small, well conditioned argument even at deep levels.
  double tau = std::fabs(t);
  double h = 1.0;
  double acc = 0.0;
  for (int k = 1; k <= K_; ++k) {
    h *= r_per_;
    tau = std::fmod(tau, 2.0 * h);
    acc += amp_[static_cast<std::size_t>(k)] * tooth_shape(tau / h);
  }
  return acc;
}

double LoudFamily::l2_increment(double s, double t) const {
  double tau_s = std::fabs(s);
  double tau_t = std::fabs(t);
  double h = 1.0;
  double acc = 0.0;
  for (int k = 1; k <= K_; ++k) {
    h *= r_per_;
    tau_s = std::fmod(tau_s, 2.0 * h);
    tau_t = std::fmod(tau_t, 2.0 * h);
    const double diff =
        amp_[static_cast<std::size_t>(k)] * (tooth_shape(tau_s / h) - tooth_shape(tau_t / h));
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

double LoudFamily::basis_at_padic(int k, std::int64_t j, int e) const {
  if (k < 1) throw std::domain_error("LoudFamily::basis_at_padic: tooth index k must be >= 1");
  if (j < 0 || e < 0) throw std::domain_error("LoudFamily::basis_at_padic: j and e must be >= 0");
  const double a = k <= K_ ? amp_[static_cast<std::size_t>(k)] : std::pow(r_amp_, k);
  const int d = 2 * A_ * k - e;
  if (d >= 0) {
    // t / h_k = j * p^d is an integer: the tooth value is its parity.
    if (p_ % 2 == 0 && d >= 1) return 0.0;
    return a * double((j & 1) != 0);
  }
  const std::int64_t P = checked_pow(p_, -d);
  if (P == 0) {
    // Period far below representable resolution; fall back to a rounded ratio
    // (always < 2 here since j < 2^63 <= 2P).
    const double u = double(j) / std::pow(double(p_), double(-d));
    return a * tooth_shape(u);
  }
  std::int64_t jr = j % (2 * P);
  if (jr > P) jr = 2 * P - jr;
  return a * (double(jr) / double(P));
}

double LoudFamily::f_at_padic(std::int64_t j, int e) const {
  double acc = 0.0;
  for (int k = 1; k <= K_; ++k) acc += basis_at_padic(k, j, e);
  return acc;
}

double LoudFamily::l2_increment_padic(std::int64_t j1, std::int64_t j2, int e) const {
  double acc = 0.0;
  for (int k = 1; k <= K_; ++k) {
    const double diff = basis_at_padic(k, j1, e) - basis_at_padic(k, j2, e);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

LoudFamily::Constants LoudFamily::constants() const {
  const double pd = double(p_);
  const double c1 = r_per_;
  const double c2_sq = std::pow(pd, 4.0 * A_ * alpha_) / (1.0 - std::pow(pd, -4.0 * (1.0 - alpha_) * A_)) +
                       1.0 / (1.0 - std::pow(pd, -4.0 * alpha_ * A_));
  const double q = std::pow(pd, -2.0 * (1.0 - alpha_) * A_);
  const double kappa = q * (1.0 - 2.0 * q) / (1.0 - q);
  return {c1, std::sqrt(c2_sq), kappa, c2_sq};
}

}  // namespace smallball
