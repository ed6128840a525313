#pragma once
// Saw-tooth waves and the lacunary saw-tooth ("Loud") family: a geometric stack
// of teeth phi_k(t) = p^(-2*alpha*A*k) * saw(t, p^(-2*A*k)) whose sum f has
// Hoelder-type increment bounds with fully explicit constants.

#include <cstdint>
#include <vector>

namespace smallball {

// Triangular wave with half-period h: 0 at even multiples of h, 1 at odd
// multiples, linear in between; range [0,1], period 2h, even and 2h-periodic.
struct SawtoothSpec {
  double h = 1.0;
};

double sawtooth_eval(const SawtoothSpec& spec, double t);

class LoudFamily {
 public:
  // Requires p >= 2, A >= 1, alpha in (0,1), and the lacunarity condition
  // p^(2*(1-alpha)*A) > 2; throws std::invalid_argument naming the violated
  // constraint otherwise. tail_tol controls series truncation: the dropped
  // geometric tail of the amplitudes is below tail_tol.
  LoudFamily(int p, int A, double alpha, double tail_tol = 1e-12);

  int p() const { return p_; }
  int A() const { return A_; }
  double alpha() const { return alpha_; }
  double tail_tol() const { return tail_tol_; }
  int truncation_level() const { return K_; }

  double amplitude_ratio() const { return r_amp_; }  // p^(-2*alpha*A)
  double period_ratio() const { return r_per_; }     // p^(-2*A)
  // The sum f repeats with this period (and is mirror-symmetric about every
  // multiple of half of it).
  double period() const { return 2.0 * r_per_; }

  // k-th tooth, k >= 1: amplitude p^(-2*alpha*A*k), half-period p^(-2*A*k).
  double basis(int k, double t) const;
  // Truncated sum of the teeth; absolute error < tail_tol.
  double f(double t) const;
  // L2 increment of the independent-coefficient series built on the teeth:
  // sqrt(sum_k (phi_k(s) - phi_k(t))^2), same truncation guarantee.
  double l2_increment(double s, double t) const;

  // Exact-arithmetic evaluation at t = j * p^(-e) (j >= 0, e >= 0). Tooth
  // positions are reduced with integer arithmetic so that deep-level values are
  // exact for every p, not just binary ones.
  double basis_at_padic(int k, std::int64_t j, int e) const;
  double f_at_padic(std::int64_t j, int e) const;
  double l2_increment_padic(std::int64_t j1, std::int64_t j2, int e) const;

  // Explicit increment-bound constants:
  //   c1, c2:      d(s,t) between c1*|s-t|^alpha and c2*|s-t|^alpha (claimed
  //                two-sided envelope for the L2 increment),
  //   kappa:       lower-bound constant for |f(s)-f(t)| at the special lags
  //                |s-t| = p^(-2A(m+1)),
  //   K_script:    upper modulus constant for |f(s)-f(t)| (= c2^2).
  struct Constants {
    double c1;
    double c2;
    double kappa;
    double K_script;
  };
  Constants constants() const;

 private:
  int p_;
  int A_;
  double alpha_;
  double tail_tol_;
  int K_;
  double r_amp_;
  double r_per_;
  std::vector<double> amp_;  // amplitude of tooth k (1-based, [0] unused)
};

}  // namespace smallball
