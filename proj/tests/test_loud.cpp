#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "smallball/loud.hpp"

using namespace smallball;

TEST_CASE("sawtooth: anchor points and slope") {
  CHECK(sawtooth_eval({0.5}, 0.5) == 1.0);   // odd multiple of h
  CHECK(sawtooth_eval({0.5}, 1.0) == 0.0);   // even multiple of h
  CHECK(sawtooth_eval({0.5}, 0.25) == 0.5);  // linear midpoint
  CHECK_THROWS_AS(sawtooth_eval({0.0}, 0.1), std::domain_error);
  CHECK_THROWS_AS(sawtooth_eval({-1.0}, 0.1), std::domain_error);

  // Lipschitz constant exactly 1/h on the linear pieces.
  const double h = 0.125;
  for (int i = 0; i < 50; ++i) {
    const double a = 0.001 * i;
    const double b = a + 1e-4;
    if (std::floor(a / h) == std::floor(b / h)) {
      const double slope = (sawtooth_eval({h}, b) - sawtooth_eval({h}, a)) / (b - a);
      CHECK(std::fabs(std::fabs(slope) - 1.0 / h) < 1e-9 / h);
    }
  }
}

TEST_CASE("family construction validates all constraints") {
  CHECK_NOTHROW(LoudFamily(2, 2, 0.5));
  CHECK_THROWS_AS(LoudFamily(1, 2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(LoudFamily(2, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(LoudFamily(2, 2, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(LoudFamily(2, 2, 0.0), std::invalid_argument);
  // Lacunarity: 2^(2*1*(1-0.8)) = 2^0.4 < 2 must be rejected.
  CHECK_THROWS_AS(LoudFamily(2, 1, 0.8), std::invalid_argument);
  // 3^(2*(1-0.45)) = 3^1.1 > 2 is fine.
  CHECK_NOTHROW(LoudFamily(3, 1, 0.45));
}

TEST_CASE("tooth values at anchor points") {
  LoudFamily fam(2, 2, 0.5);
  CHECK(fam.basis(1, 0.0) == 0.0);
  CHECK(fam.basis(1, std::pow(2.0, -4)) == doctest::Approx(0.25).epsilon(1e-15));  // peak 2^-2
  CHECK(fam.basis(2, std::pow(2.0, -8)) == doctest::Approx(1.0 / 16).epsilon(1e-15));
  CHECK_THROWS_AS(fam.basis(0, 0.5), std::domain_error);
}

TEST_CASE("f: zero at 0, exact dyadic value, periodicity") {
  LoudFamily fam(2, 2, 0.5);
  CHECK(fam.f(0.0) == 0.0);

  // f(2^-8) by direct finite summation: tooth 1 contributes 2^-2 * 2^-4,
  // tooth 2 peaks (2^-4 * 1), teeth >= 3 vanish at this dyadic point.
  const double expected = std::pow(2.0, -6) + std::pow(2.0, -4);
  CHECK(fam.f(std::pow(2.0, -8)) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(fam.f_at_padic(1, 8) == expected);

  // Period 2 * p^(-2A) = 1/8.
  const double period = fam.period();
  CHECK(period == doctest::Approx(0.125));
  for (int i = 0; i <= 64; ++i) {
    const double t = i / 64.0 * period;
    CHECK(fam.f(t) == doctest::Approx(fam.f(t + period)).epsilon(1e-12));
    CHECK(fam.f(t) == doctest::Approx(fam.f(t + 4 * period)).epsilon(1e-12));
  }
}

TEST_CASE("exact p-adic path agrees with floating path") {
  LoudFamily fam2(2, 2, 0.5);
  for (std::int64_t j = 0; j <= 1024; j += 7) {
    const double t = double(j) * std::pow(2.0, -10);
    CHECK(fam2.f(t) == doctest::Approx(fam2.f_at_padic(j, 10)).epsilon(1e-12));
  }
  // For odd bases the grid point itself rounds to ~2^-53, and the sum reacts to
  // an input perturbation dt with its full modulus K_script * dt^alpha; the
  // floating path can only agree with the exact one within that envelope.
  LoudFamily fam3(3, 1, 0.45);
  const auto c3 = fam3.constants();
  const double envelope = c3.K_script * std::pow(0x1.0p-52, fam3.alpha());
  for (std::int64_t j = 0; j <= 729; j += 5) {
    const double t = double(j) * std::pow(3.0, -6);
    CHECK(std::fabs(fam3.f(t) - fam3.f_at_padic(j, 6)) <= envelope);
  }
}

TEST_CASE("derived constants, exact arithmetic") {
  LoudFamily fam(2, 2, 0.5);
  const auto c = fam.constants();
  CHECK(c.c1 == 0.0625);
  CHECK(c.kappa == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(c.c2 == doctest::Approx(std::sqrt(272.0 / 15)).epsilon(1e-15));
  CHECK(c.c2 == doctest::Approx(4.25832).epsilon(1e-5));
  CHECK(c.K_script == doctest::Approx(272.0 / 15).epsilon(1e-15));
  CHECK(c.c1 > 0);
  CHECK(c.c1 <= c.c2);
  CHECK(c.kappa > 0);
  CHECK(c.kappa <= c.K_script);
}

TEST_CASE("l2 increment: diagonal, symmetry, exact value") {
  LoudFamily fam(2, 2, 0.5);
  CHECK(fam.l2_increment(0.3, 0.3) == 0.0);
  CHECK(fam.l2_increment(0.1, 0.7) == fam.l2_increment(0.7, 0.1));

  // d(0, 2^-8): only teeth 1 and 2 differ; sqrt((2^-6)^2 + (2^-4)^2).
  const double expected = std::sqrt(std::pow(2.0, -12) + std::pow(2.0, -8));
  CHECK(fam.l2_increment(0.0, std::pow(2.0, -8)) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(fam.l2_increment_padic(0, 1, 8) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("upper increment envelopes hold on a mid-size grid") {
  LoudFamily fam(2, 2, 0.5);
  const auto c = fam.constants();
  const int e = 8;
  const std::int64_t n = std::int64_t{1} << e;
  const double slack = 2.0 * fam.tail_tol();
  for (std::int64_t i = 0; i <= n; i += 3) {
    for (std::int64_t j = i + 1; j <= n; j += 5) {
      const double lag = double(j - i) * std::pow(2.0, -e);
      const double mod = std::pow(lag, fam.alpha());
      CHECK(fam.l2_increment_padic(i, j, e) <= c.c2 * mod + slack);
      CHECK(std::fabs(fam.f_at_padic(i, e) - fam.f_at_padic(j, e)) <= c.K_script * mod + slack);
    }
  }
}

TEST_CASE("lower envelopes fail exactly at fold-symmetric pairs (known defect)") {
  // The series metric is periodic with period 1/8 and mirror-symmetric about
  // multiples of 1/16, so increments vanish at straddling pairs; the claimed
  // lower envelopes cannot hold there. Document the canonical counterexamples.
  LoudFamily fam(2, 2, 0.5);
  const auto c = fam.constants();
  CHECK(fam.l2_increment(0.0, 1.0) == 0.0);  // c1 * 1^alpha = 0.0625 > 0
  // s = 31/512, t = s + 1/256 straddles the fold at 1/16: f-increment is zero.
  const double df = std::fabs(fam.f_at_padic(31, 9) - fam.f_at_padic(33, 9));
  CHECK(df == 0.0);
  CHECK(c.kappa * std::pow(1.0 / 256, fam.alpha()) > 0.01);  // the bound it defeats
}

TEST_CASE("lower bound at designated lags holds away from folds") {
  LoudFamily fam(2, 2, 0.5);
  const auto c = fam.constants();
  const double slack = 2.0 * fam.tail_tol();
  // m = 2..5, s on a 2^-6 subgrid: all these pairs avoid fold symmetry.
  for (int m = 2; m <= 5; ++m) {
    const int e = 4 * (m + 1);
    const std::int64_t lag_j = 1;  // lag = 2^-4(m+1) in units of 2^-e
    const double lag = std::pow(2.0, -e);
    const double need = c.kappa * std::pow(lag, fam.alpha()) - slack;
    for (std::int64_t s6 = 0; s6 < 64; ++s6) {
      const std::int64_t j = s6 << (e - 6);
      const double df = std::fabs(fam.f_at_padic(j, e) - fam.f_at_padic(j + lag_j, e));
      CHECK(df >= need);
    }
  }
}
