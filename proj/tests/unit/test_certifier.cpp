#include <cmath>

#include "doctest.h"
#include "layerspectra/certifier.hpp"
#include "layerspectra/numerics.hpp"
#include "oracles.hpp"

using namespace layerspectra;

namespace {

LayerSpec bump_layer(double beta, double w, double a, double s_max = 50.0) {
  return make_layer(build_meridian(CurvatureProfile::gaussian_bump(beta, w), s_max, 0.01), a);
}

}  // namespace

TEST_CASE("transverse mode is normalized with the stated second moment") {
  for (double a : {0.3, 1.0}) {
    const double norm = oracle::adaptive_simpson([&](double u) { return chi(u, a) * chi(u, a); }, -a, a);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    const double m2 = oracle::adaptive_simpson([&](double u) { return u * u * chi(u, a) * chi(u, a); }, -a, a);
    CHECK(chi_second_moment(a) == doctest::Approx(m2).epsilon(1e-11));
    CHECK(m2 == doctest::Approx(a * a * (1.0 / 3 - 2 / (oracle::pi * oracle::pi))).epsilon(1e-11));
    const double grad = oracle::adaptive_simpson([&](double u) { return chi_prime(u, a) * chi_prime(u, a); }, -a, a);
    CHECK(grad == doctest::Approx(std::pow(oracle::pi / (2 * a), 2)).epsilon(1e-11));
  }
}

TEST_CASE("macdonald identities used by the trial family") {
  // 2 K0' + 2 K1 = 0, with K0' by central differences
  for (double z : {0.01, 0.5, 1.5, 3.0, 10.0}) {
    const double h = 1e-5 * z;
    const double k0p = (numerics::bessel_k(0, z + h) - numerics::bessel_k(0, z - h)) / (2 * h);
    CHECK(std::abs(2 * k0p + 2 * numerics::bessel_k(1, z)) <= 1e-8 * numerics::bessel_k(1, z));
  }
  // int_0^inf t^2 K1(t)^2 dt = 3 pi^2 / 32
  const double val = oracle::piecewise_simpson(
      [](double t) { return t <= 0 ? 1.0 : t * t * std::pow(numerics::bessel_k(1, t), 2); }, 0.0, 40.0, 80, 1e-14);
  CHECK(val == doctest::Approx(3 * oracle::pi * oracle::pi / 32).epsilon(1e-9));
}

TEST_CASE("phi_sigma is 1 inside s0, decreasing and continuous outside") {
  const double s0 = 2.0, sigma = 0.01;
  CHECK(phi_sigma(1.0, sigma, s0) == 1.0);
  CHECK(phi_sigma(s0, sigma, s0) == doctest::Approx(1.0).epsilon(1e-15));
  double prev = 1.0;
  for (double s = 2.5; s < 5000; s *= 1.7) {
    const double v = phi_sigma(s, sigma, s0);
    CHECK(v < prev);
    CHECK(v == doctest::Approx(oracle::bessel_k_integral(0, sigma * s) / oracle::bessel_k_integral(0, sigma * s0))
                   .epsilon(1e-10));
    prev = v;
  }
  const double s = 40.0, h = 1e-4;
  CHECK(phi_sigma_prime(s, sigma, s0) ==
        doctest::Approx((phi_sigma(s + h, sigma, s0) - phi_sigma(s - h, sigma, s0)) / (2 * h)).epsilon(1e-7));
  bool underflow = false;
  CHECK(phi_sigma(1e6, 1.0, 1.0, &underflow) == 0.0);
  CHECK(underflow);
}

TEST_CASE("flat layer: Q3 is the tangential energy, equal to w2 int phi'^2 r^2") {
  const auto layer = make_layer(build_meridian(CurvatureProfile::flat(), 50.0, 0.05), 1.0);
  const RadialTrial trial{0.1, 1.0};
  const auto row = q3(layer, trial);
  CHECK(row.curvature.value == 0.0);
  const double ref = 4 * oracle::pi *
                     oracle::piecewise_simpson([&](double s) { return std::pow(phi_sigma_prime(s, 0.1, 1.0) * s, 2); },
                                               1.0, 600.0, 200, 1e-12);
  CHECK(row.tangential.value == doctest::Approx(ref).epsilon(1e-8));
  CHECK(row.q3.value > 0.0);
}

TEST_CASE("decomposition and direct quadrature agree on curved layers") {
  for (double beta : {0.3, 0.9, -0.6}) {
    const auto layer = bump_layer(beta, 0.5, 0.15);
    for (double sigma : {0.1, 0.01}) {
      const auto row = q3(layer, RadialTrial{sigma, 1.0});
      CHECK(std::abs(row.q3.value - row.direct.value) <= row.q3.error + row.direct.error + 1e-12 * std::abs(row.q3.value));
    }
  }
}

TEST_CASE("perturbation cross term matches its closed form") {
  const auto layer = bump_layer(0.9, 0.5, 0.15);
  const auto bump = select_bump(layer.curve, layer.pair, 3.0);
  CHECK(bump.hi > bump.lo);
  CHECK(bump.j(0.5 * (bump.lo + bump.hi)) == doctest::Approx(1.0));
  CHECK(bump.j(bump.hi + 0.1) == 0.0);
  const auto row = perturbed_q3(layer, RadialTrial{0.01, 5.0 * bump.hi}, bump);
  CHECK(row.cross == doctest::Approx(row.cross_closed).epsilon(1e-6));
  CHECK(row.bump_energy > 0.0);
  CHECK(row.q3_quadratic == doctest::Approx(row.base + 2 * row.epsilon * row.cross + row.epsilon * row.epsilon * row.bump_energy));
  CHECK(std::abs(row.q3_direct.value - row.q3_quadratic) <= row.q3_direct.error + row.error + 1e-10 * std::abs(row.base));
}

TEST_CASE("no bump on the plane") {
  const auto curve = build_meridian(CurvatureProfile::flat(), 10.0, 0.05);
  CHECK_THROWS_AS(select_bump(curve, principal_curvatures(curve), 5.0), NoBumpError);
}

TEST_CASE("certify verdicts") {
  const auto flat = make_layer(build_meridian(CurvatureProfile::flat(), 50.0, 0.05), 1.0);
  const auto cf = certify(flat);
  CHECK(cf.case_tag == "flat");
  CHECK(cf.verdict == CertVerdict::no_certificate);
  CHECK(cf.rows.size() == TrialFamily::default_sigmas().size());

  const auto bump = bump_layer(0.3, 1.0, 0.2);
  const auto cb = certify(bump);
  CHECK(cb.case_tag == "positive-K2");
  CHECK(cb.K_total > 0.0);
  CHECK(cb.verdict == CertVerdict::no_certificate);

  CertifyOptions forced;
  forced.force_perturbation = true;
  forced.sigmas = {0.1, 0.01};
  const auto cp = certify(bump, forced);
  CHECK_FALSE(cp.perturbation.empty());
  CHECK(cp.bump.has_value());
  CHECK(cp.verdict != CertVerdict::certified);
}
