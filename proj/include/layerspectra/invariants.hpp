#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layerspectra/layer.hpp"

namespace layerspectra {

// Area of the unit 2-sphere and volume of the unit 3-ball.
inline constexpr double kW2 = 4.0 * numerics::kPi;
inline constexpr double kV3 = 4.0 * numerics::kPi / 3.0;

// eta_k = int_{-a}^{a} u^k (chi_1'^2 - k1^2 chi_1^2) du, chi_1 = cos(k1 u), k1 = pi/2a.
double eta_closed(int k, double a);
double eta_quadrature(int k, double a);

struct EtaTable {
  double a = 0.0;
  double k1 = 0.0;
  std::vector<double> values;  // eta_0 .. eta_K
};

EtaTable eta_table(double a, int k_max);

// k-th elementary symmetric polynomial of the principal curvatures.
double elementary_symmetric(std::span<const double> kappa, int k);

// c_2 r^2 = (2 k_s k_theta + k_theta^2) r^2 on the curve's grid.
numerics::SampledFunction c2_density(const MeridianCurve& curve, const CurvaturePair& pair);

struct KTotal {
  double value = 0.0;        // eta_2 w_2 int c_2 r^2 ds
  double error_bound = 0.0;  // quadrature + tail
  double c2_integral = 0.0;  // int_0^inf c_2 r^2 ds (a independent)
  double c2_error = 0.0;
  double eta2 = 0.0;
  numerics::TailIntegral integral;
  bool integrable = false;
};

KTotal K_total(const LayerSpec& layer);

// Constants of the integrable case: D = lim (s - r' r), the anchor s0 past
// which |s - r' r - D| <= 1/100, and the quadratic envelope
// r^2 >= s^2 - B s + C, B = 2D + 1/50, positive beyond s1.
struct Lemma2Constants {
  bool computable = false;
  double D = 0.0;
  double D_error = 0.0;
  double s0 = 0.0;
  double r0 = 0.0;
  double B = 0.0;
  double C = 0.0;
  double aleph = 0.0;  // B^2/4 - C
  double s1 = 0.0;
  std::string note;
};

Lemma2Constants lemma2_constants(const MeridianCurve& curve, const CurvaturePair& pair);

// int_S^inf dt / (t^2 - B t + C) for S beyond the larger root; +inf otherwise.
double envelope_tail(double S, double B, double C);

struct Lemma2Diagnostics {
  double S = 0.0;
  double r_over_S = 0.0;
  double r_over_S_half = 0.0;
  double fitted_C = 0.0;  // S |r(S)/S - 1|
  double fitted_C_half = 0.0;
  double ks_kt_r_integral = 0.0;  // int_0^S k_s k_theta r ds
  double ks_kt_r_half = 0.0;
  double ks_kt_r_bound = 0.0;  // tail bound plus quadrature floor
  double z_prime_S = 0.0;
  double z_prime_half = 0.0;
  Verdict r_limit = Verdict::inconclusive;
  Verdict integral_limit = Verdict::inconclusive;
  Verdict z_limit = Verdict::inconclusive;
  std::string note;
};

Lemma2Diagnostics lemma2_diagnostics(const MeridianCurve& curve, const CurvaturePair& pair,
                                     double z_tolerance = 1e-2);

enum class Parabolicity { parabolic, non_parabolic, inconclusive };
std::string to_string(Parabolicity p);

struct ParabolicityReport {
  Parabolicity verdict = Parabolicity::inconclusive;
  double finite_part = 0.0;  // int_1^S dt / (w2 r^2)
  double finite_error = 0.0;
  double tail = 0.0;  // fitted int_S^inf
  double tail_error = 0.0;
  double tail_power = 0.0;
  Lemma2Constants lemma2;
  // The envelope bound over [S, inf) from the decay constants; +inf when
  // the constants are unavailable or S lies before s1.
  double envelope_tail_bound = 0.0;
  std::string note;

  double integral() const { return finite_part + tail; }
};

ParabolicityReport parabolicity(const MeridianCurve& curve, const CurvaturePair& pair);

struct VolumeGrowthReport {
  std::vector<double> s;
  std::vector<double> V;  // w2 int_0^s r^2
  double alpha_at_S = 0.0;
  double alpha = 0.0;  // extrapolated V/(v3 s^3)
  double alpha_error = 0.0;
  // Cubic envelope for s >= s0, V >= w2 (s^3/3 - (D + 1/100) s^2 + c1 s) + c2,
  // and the matching upper envelope with D - 1/100.
  bool envelope_checked = false;
  double s0 = 0.0;
  double D = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c1_upper = 0.0;
  double c2_upper = 0.0;
  bool envelope_contains = false;
  double worst_margin = 0.0;  // min over samples of distance inside the envelope
  std::string note;
};

VolumeGrowthReport volume_growth(const MeridianCurve& curve, const CurvaturePair& pair);

}  // namespace layerspectra
