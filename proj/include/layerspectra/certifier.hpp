#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "layerspectra/invariants.hpp"

namespace layerspectra {

// Normalized transverse ground mode chi(u) = sqrt(1/a) cos(pi u / 2a).
double chi(double u, double a);
double chi_prime(double u, double a);
// int u^2 chi^2 du = a^2 (1/3 - 2/pi^2)
double chi_second_moment(double a);

// phi_sigma = min{1, K0(sigma s)/K0(sigma s0)}. The ratio is evaluated in
// exponentially scaled form; where exp(-sigma (s - s0)) underflows the value
// is clamped to 0 and *underflow (when given) is set.
double phi_sigma(double s, double sigma, double s0, bool* underflow = nullptr);
double phi_sigma_prime(double s, double sigma, double s0);

// Radial factor of a trial function. sigma == 0 encodes phi == 1.
struct RadialTrial {
  double sigma = 0.0;
  double s0 = 1.0;

  double phi(double s) const;
  double dphi(double s) const;
  // Beyond this radius phi^2 r^2 is below 1e-35 of its scale.
  double support_end(double s_max) const;
  bool constant() const { return sigma == 0.0; }
};

struct TrialFamily {
  double s0 = 1.0;
  std::vector<double> sigmas;  // decreasing

  static std::vector<double> default_sigmas();
};

struct TermValue {
  double value = 0.0;
  double error = 0.0;
};

// w2 int (2 k_s k_theta + k_theta^2) phi^2 r^2 ds
TermValue curvature_term(const LayerSpec& layer, const RadialTrial& trial);
// w2 int int phi'^2 chi^2 (1 - u k_theta)^2 / (1 - u k_s) r^2 du ds  (>= 0)
TermValue tangential_term(const LayerSpec& layer, const RadialTrial& trial);
// Q2(Psi, Psi) - (pi/2a)^2 ||Psi||^2 by quadrature of the full metric form
// on the (s, u) product, Psi = phi chi.
TermValue direct_q3(const LayerSpec& layer, const RadialTrial& trial);

struct CertificateRow {
  double sigma = 0.0;
  TermValue tangential;
  TermValue curvature;
  TermValue q3;      // tangential + curvature
  TermValue direct;  // full-form quadrature
  double discrepancy = 0.0;
  bool phi_underflow = false;
};

// Throws ConsistencyError when the two routes disagree beyond their bounds.
CertificateRow q3(const LayerSpec& layer, const RadialTrial& trial);

// C^2 bump j(s) = (1 - x^2)^3 on [lo, hi], x = (2s - lo - hi)/(hi - lo).
struct BumpSpec {
  double lo = 0.0;
  double hi = 0.0;
  double sign = 1.0;       // sign of k_s + 2 k_theta on the support
  double threshold = 0.0;  // |k_s + 2 k_theta| >= threshold on the support

  double j(double s) const;
  double dj(double s) const;
  double ddj(double s) const;
};

// Widest interval in (0, s_scan) where k_s + 2 k_theta keeps its sign with
// magnitude above a threshold that starts at half the peak and is halved
// until an interval of at least four grid steps appears.
// Throws NoBumpError when none exists.
BumpSpec select_bump(const MeridianCurve& curve, const CurvaturePair& pair, double s_scan);

struct PerturbationRow {
  double sigma = 0.0;
  double epsilon = 0.0;
  double base = 0.0;         // Q3[phi chi]
  double cross = 0.0;        // B = Q3(phi chi, j u chi), direct quadrature
  double cross_closed = 0.0;  // w2 int j r^2 (-c1/2 + a^2 (9/pi^2 - 3/2) c3) ds
  double cross_leading = 0.0;  // -(w2/2) int j c1 r^2 ds
  double bump_energy = 0.0;   // C = Q3[j u chi]
  double q3_quadratic = 0.0;  // base + 2 eps B + eps^2 C
  TermValue q3_direct;        // Q3[(phi + eps j u) chi] by full-form quadrature
  double error = 0.0;
};

PerturbationRow perturbed_q3(const LayerSpec& layer, const RadialTrial& trial,
                             const BumpSpec& bump, std::optional<double> epsilon = std::nullopt);

enum class CertVerdict { certified, no_certificate, inconclusive };
std::string to_string(CertVerdict v);

struct HypothesisCheck {
  std::string name;
  Verdict verdict = Verdict::inconclusive;
  std::string detail;
};

struct CertifyOptions {
  std::vector<double> sigmas = TrialFamily::default_sigmas();
  // Run the perturbed family even when K_total is clearly nonzero.
  bool force_perturbation = false;
  double case2_factor = 2.0;
};

struct Certificate {
  std::string case_tag;  // flat | strict-negative | zero-K2 | positive-K2
  CertVerdict verdict = CertVerdict::inconclusive;
  double K_total = 0.0;
  double K_error = 0.0;
  double c2_integral = 0.0;
  double threshold = 0.0;
  double s0 = 0.0;
  std::vector<CertificateRow> rows;
  std::optional<BumpSpec> bump;
  std::vector<PerturbationRow> perturbation;
  std::vector<HypothesisCheck> hypotheses;
  // Best (most negative) Q3 upper bound found, value + error.
  double best_q3 = 0.0;
  std::string note;
};

Certificate certify(const LayerSpec& layer, const CertifyOptions& options = {});

}  // namespace layerspectra
