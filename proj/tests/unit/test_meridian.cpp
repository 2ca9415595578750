#include <cmath>
#include <sstream>

#include "doctest.h"
#include "layerspectra/meridian.hpp"
#include "oracles.hpp"

using namespace layerspectra;

namespace {

// Turning angle of the bump family, straight from its definition.
double bump_angle(double s, double beta, double w) { return beta * (s / w) * std::exp(-s * s / (w * w)); }

}  // namespace

TEST_CASE("flat profile is the plane") {
  const auto curve = build_meridian(CurvatureProfile::flat(), 10.0, 0.1);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve.r()[i] == doctest::Approx(curve.s()[i]).epsilon(1e-15));
    CHECK(curve.z()[i] == 0.0);
  }
  const auto pair = principal_curvatures(curve);
  CHECK(std::isinf(rho_m(pair)));
}

TEST_CASE("bump meridian matches quadrature of its turning angle") {
  const double beta = 0.6, w = 0.8;
  const auto curve = build_meridian(CurvatureProfile::gaussian_bump(beta, w), 6.0, 0.002);
  for (double s : {0.3, 1.0, 2.5, 6.0}) {
    const double r = oracle::adaptive_simpson([&](double t) { return std::cos(bump_angle(t, beta, w)); }, 0.0, s);
    const double z = oracle::adaptive_simpson([&](double t) { return std::sin(bump_angle(t, beta, w)); }, 0.0, s);
    const auto p = curve.at(s);
    CHECK(std::abs(p.r - r) < 1e-10);
    CHECK(std::abs(p.z - z) < 1e-10);
    CHECK(std::abs(p.b - bump_angle(s, beta, w)) < 1e-10);
  }
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double rp = curve.r_prime(i), zp = curve.z_prime(i);
    CHECK(std::abs(rp * rp + zp * zp - 1.0) < 1e-14);
  }
}

TEST_CASE("k_theta is sin b / r with the pole limit k_s(0)") {
  const auto curve = build_meridian(CurvatureProfile::gaussian_bump(0.5, 1.0), 5.0, 0.01);
  const auto pair = principal_curvatures(curve);
  CHECK(pair.k_theta(0.0) == doctest::Approx(pair.k_s(0.0)).epsilon(1e-12));
  for (std::size_t i = 1; i < curve.size(); i += 37) {
    CHECK(pair.k_theta.values()[i] == doctest::Approx(std::sin(curve.b()[i]) / curve.r()[i]).epsilon(1e-12));
  }
  const double sup = std::max(pair.k_s_sup, pair.k_theta_sup);
  CHECK(rho_m(pair) == doctest::Approx(1.0 / sup));
}

TEST_CASE("jacobi residual converges at second order") {
  const auto profile = CurvatureProfile::gaussian_bump(0.9, 0.5);
  auto residual = [&](double h) {
    const auto c = build_meridian(profile, 4.0, h);
    return jacobi_residual(c, principal_curvatures(c)).max_residual;
  };
  const double ratio = residual(0.02) / residual(0.01);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
  const auto c = build_meridian(profile, 4.0, 0.01);
  CHECK(jacobi_residual(c, principal_curvatures(c)).within_tolerance);
}

TEST_CASE("cross identity: int (k_theta^2 + k_s k_theta) r^2 = S - r' r") {
  for (const auto& profile : {CurvatureProfile::gaussian_bump(0.3, 1.0), CurvatureProfile::gaussian_bump(-0.8, 0.5),
                              CurvatureProfile::turning(0.4, 1.0)}) {
    const auto curve = build_meridian(profile, 20.0, 0.005);
    const auto pair = principal_curvatures(curve);
    std::vector<double> y;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const double r = curve.r()[i];
      const double kt = pair.k_theta.values()[i], ks = pair.k_s.values()[i];
      y.push_back((kt * kt + ks * kt) * r * r);
    }
    const double lhs = oracle::simpson_samples(y, curve.step());
    const std::size_t n = curve.size() - 1;
    const double rhs = curve.s()[n] - curve.r_prime(n) * curve.r()[n];
    CHECK(std::abs(lhs - rhs) < 1e-8);
  }
}

TEST_CASE("negation mirrors the meridian") {
  const auto p = CurvatureProfile::gaussian_bump(0.7, 1.0);
  const auto a = build_meridian(p, 5.0, 0.01);
  const auto b = build_meridian(p.negated(), 5.0, 0.01);
  for (std::size_t i = 0; i < a.size(); i += 50) {
    CHECK(a.r()[i] == doctest::Approx(b.r()[i]).epsilon(1e-15));
    CHECK(a.z()[i] == doctest::Approx(-b.z()[i]).epsilon(1e-15));
  }
}

TEST_CASE("turning profile through pi/2 folds back to the axis") {
  // A hemisphere-like cap: r returns to zero, so the meridian is not a graph over the plane.
  CHECK_THROWS_AS(build_meridian(CurvatureProfile::turning(3.0, 0.5), 20.0, 0.01), GeometryError);
}

TEST_CASE("asymptotic flatness") {
  const auto c = build_meridian(CurvatureProfile::gaussian_bump(0.5, 1.0), 50.0, 0.01);
  CHECK(asymptotic_flatness(c, principal_curvatures(c)).verdict == Verdict::pass);
  // A cone keeps k_theta ~ 1/s: not flat within a tight tolerance on a short range.
  const auto cone = build_meridian(CurvatureProfile::turning(1.0, 0.5), 20.0, 0.01);
  FlatnessOptions tight;
  tight.tolerance = 1e-3;
  CHECK(asymptotic_flatness(cone, principal_curvatures(cone), tight).verdict != Verdict::pass);
}

TEST_CASE("table profile interpolates samples") {
  std::vector<double> s, k;
  for (int i = 0; i <= 400; ++i) {
    s.push_back(0.01 * i);
    k.push_back(std::exp(-s.back()));
  }
  const auto p = CurvatureProfile::table(s, k);
  CHECK(p.ks(1.234) == doctest::Approx(std::exp(-1.234)).epsilon(1e-9));
}

TEST_CASE("meridian csv has a header and one row per node") {
  const auto c = build_meridian(CurvatureProfile::flat(), 1.0, 0.1);
  std::ostringstream out;
  write_meridian_csv(out, c, principal_curvatures(c));
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(c.size()) + 1);
}
