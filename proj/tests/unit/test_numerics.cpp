#include <cmath>
#include <vector>

#include "doctest.h"
#include "layerspectra/numerics.hpp"
#include "oracles.hpp"

using namespace layerspectra;
using namespace layerspectra::numerics;

TEST_CASE("gauss-legendre rules integrate polynomials up to degree 2n-1") {
  for (int n : {4, 8, 15, 32}) {
    const auto& rule = gauss_legendre(n);
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double q = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) q += rule.weights[i] * std::pow(rule.nodes[i], d);
      const double exact = d % 2 ? 0.0 : 2.0 / (d + 1);
      CHECK(std::abs(q - exact) < 1e-13);
    }
  }
}

TEST_CASE("adaptive quadrature against closed forms") {
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, oracle::pi).value ==
        doctest::Approx(2.0).epsilon(1e-12));
  // kink at the breakpoint
  const double bp[] = {-1.0, 0.3, 2.0};
  const auto r = integrate([](double x) { return std::abs(x - 0.3); }, bp);
  CHECK(r.value == doctest::Approx(0.5 * 1.3 * 1.3 + 0.5 * 1.7 * 1.7).epsilon(1e-13));
  CHECK(r.error >= 0.0);

  QuadratureOptions tight;
  tight.rel_tol = 1e-14;
  tight.max_panels = 8;
  CHECK_THROWS_AS(integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, tight), ConvergenceError);
}

TEST_CASE("rk4 is fourth order") {
  OdeRhs rhs = [](double, std::span<const double> y, std::span<double> dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
  };
  auto error_at = [&](double h) {
    const auto grid = linspace(0.0, 2.0, static_cast<std::size_t>(std::lround(2.0 / h)) + 1);
    const double y0[] = {0.0, 1.0};
    const auto sol = solve_ivp(rhs, y0, grid);
    return std::abs(sol[0](2.0) - std::sin(2.0));
  };
  const double ratio = error_at(0.1) / error_at(0.05);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);
}

TEST_CASE("cubic sampled function is fourth order and exact on cubics") {
  auto max_err = [](std::size_t n) {
    const auto x = linspace(0.0, 3.0, n);
    std::vector<double> y;
    for (double t : x) y.push_back(std::sin(t));
    SampledFunction f(x, y);
    double e = 0.0;
    for (int i = 0; i < 997; ++i) {
      const double t = 3.0 * (i + 0.37) / 997.0;
      e = std::max(e, std::abs(f(t) - std::sin(t)));
    }
    return e;
  };
  CHECK(max_err(41) / max_err(81) > 12.0);

  const auto x = linspace(-1.0, 2.0, 13);
  std::vector<double> y;
  for (double t : x) y.push_back(t * t * t - 2 * t + 1);
  SampledFunction f(x, y);
  CHECK(f(0.61) == doctest::Approx(0.61 * 0.61 * 0.61 - 2 * 0.61 + 1).epsilon(1e-12));
}

TEST_CASE("macdonald functions against the integral representation") {
  for (double z : {1e-3, 0.05, 0.5, 1.0, 1.999, 2.0, 2.001, 5.0, 12.0, 30.0}) {
    for (int n : {0, 1}) {
      const double ref = oracle::bessel_k_integral(n, z);
      CHECK(std::abs(bessel_k(n, z) - ref) <= 1e-11 * ref);
      CHECK(bessel_k_scaled(n, z) == doctest::Approx(std::exp(z) * ref).epsilon(1e-11));
    }
  }
  // tabulated values
  CHECK(bessel_k(0, 1.0) == doctest::Approx(0.42102443824070834).epsilon(1e-14));
  CHECK(bessel_k(1, 1.0) == doctest::Approx(0.60190723019723457).epsilon(1e-14));
  CHECK_THROWS_AS(bessel_k(0, 0.0), DomainError);
  CHECK_THROWS_AS(bessel_k(2, 1.0), DomainError);
}

TEST_CASE("both bessel regimes agree across the seam") {
  for (double z : {1.5, 2.0, 2.5}) {
    double k0 = 0, k1 = 0, k0s = 0, k1s = 0;
    detail::bessel_k01_series(z, k0, k1);
    detail::bessel_k01_scaled_fraction(z, k0s, k1s);
    CHECK(k0 == doctest::Approx(std::exp(-z) * k0s).epsilon(1e-13));
    CHECK(k1 == doctest::Approx(std::exp(-z) * k1s).epsilon(1e-13));
  }
}

TEST_CASE("underflow detection") {
  CHECK_FALSE(bessel_k_underflows(10.0));
  CHECK(bessel_k_underflows(800.0));
  CHECK(std::isfinite(bessel_k_scaled(0, 1e5)));
}

TEST_CASE("power tails: convergent, divergent, negligible") {
  const auto t = linspace(1.0, 100.0, 2001);
  std::vector<double> inv2, inv1, floor;
  for (double s : t) {
    inv2.push_back(1.0 / (s * s));
    inv1.push_back(1.0 / s);
    floor.push_back(s < 10 ? std::exp(-s * s) : 1e-300);
  }
  const SampledFunction f2(t, inv2), f1(t, inv1), f0(t, floor);
  const auto m2 = fit_power_tail(f2);
  CHECK(m2.power == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(m2.verdict() == TailVerdict::convergent);
  const auto ti = tail_integral(f2, m2);
  CHECK(ti.value() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(ti.value() - 1.0) <= ti.error_bound() + 1e-12);

  CHECK(fit_power_tail(f1).verdict() == TailVerdict::divergent);
  CHECK(std::isinf(tail_integral(f1, fit_power_tail(f1)).tail));
  CHECK(fit_power_tail(f0).kind == TailKind::negligible);
}
