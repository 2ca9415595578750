// Macdonald functions K_0, K_1 of real positive argument.
//
// z <= 2: ascending series around the logarithmic singularity.
// z  > 2: Steed's continued fraction (Temme's CF2), evaluated in the
//         exponentially scaled form exp(z) K(z).

#include <cmath>
#include <limits>
#include <sstream>

#include "layerspectra/numerics.hpp"

namespace layerspectra::numerics {

namespace {

constexpr double kSeamPoint = 2.0;
constexpr double kEps = 1e-17;
constexpr int kMaxTerms = 500;

void check_argument(int order, double z) {
  if (order != 0 && order != 1) throw DomainError("bessel_k: only orders 0 and 1 are supported");
  if (!(z > 0.0) || std::isnan(z)) {
    std::ostringstream msg;
    msg << "bessel_k: argument must be positive, got " << z;
    throw DomainError(msg.str());
  }
}

}  // namespace

namespace detail {

void bessel_k01_series(double z, double& k0, double& k1) {
  const double y = 0.25 * z * z;
  const double log_half = std::log(0.5 * z);
  // term0 = y^k/(k!)^2, term1 = y^k/(k!(k+1)!), psi_k = psi(k+1)
  double term0 = 1.0;
  double term1 = 1.0;
  double psi_k = -kEulerGamma;
  double i0 = 0.0;
  double i1 = 0.0;
  double s0 = 0.0;
  double s1 = 0.0;
  for (int k = 0; k < kMaxTerms; ++k) {
    const double psi_next = psi_k + 1.0 / (k + 1.0);
    i0 += term0;
    i1 += term1;
    s0 += psi_k * term0;
    s1 += (psi_k + psi_next) * term1;
    if (term0 < kEps * i0 && k > 2) break;
    term0 *= y / ((k + 1.0) * (k + 1.0));
    term1 *= y / ((k + 1.0) * (k + 2.0));
    psi_k = psi_next;
  }
  i1 *= 0.5 * z;
  k0 = -log_half * i0 + s0;
  k1 = 1.0 / z + log_half * i1 - 0.25 * z * s1;
}

void bessel_k01_scaled_fraction(double z, double& k0s, double& k1s) {
  const double a1 = 0.25;
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= kMaxTerms; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  h *= a1;
  k0s = std::sqrt(kPi / (2.0 * z)) / s;
  k1s = k0s * (z + 0.5 - h) / z;
}

}  // namespace detail

double bessel_k_scaled(int order, double z) {
  check_argument(order, z);
  double k0 = 0.0;
  double k1 = 0.0;
  if (z <= kSeamPoint) {
    detail::bessel_k01_series(z, k0, k1);
    const double scale = std::exp(z);
    return (order == 0 ? k0 : k1) * scale;
  }
  detail::bessel_k01_scaled_fraction(z, k0, k1);
  return order == 0 ? k0 : k1;
}

double bessel_k(int order, double z) {
  check_argument(order, z);
  double k0 = 0.0;
  double k1 = 0.0;
  if (z <= kSeamPoint) {
    detail::bessel_k01_series(z, k0, k1);
    return order == 0 ? k0 : k1;
  }
  if (bessel_k_underflows(z)) return 0.0;
  detail::bessel_k01_scaled_fraction(z, k0, k1);
  return (order == 0 ? k0 : k1) * std::exp(-z);
}

bool bessel_k_underflows(double z) {
  if (z <= kSeamPoint) return false;
  // K_1 > K_0, so K_0 reaching the normal range bounds both orders.
  double k0 = 0.0;
  double k1 = 0.0;
  detail::bessel_k01_scaled_fraction(z, k0, k1);
  return std::log(k0) - z < std::log(std::numeric_limits<double>::min());
}

}  // namespace layerspectra::numerics
