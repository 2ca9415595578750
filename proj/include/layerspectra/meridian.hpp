#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "layerspectra/numerics.hpp"

namespace layerspectra {

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

// Meridian curvature k_s(s) of the generating curve.
//
//   flat           k_s = 0
//   gaussian_bump  turning angle b(s) = beta (s/w) exp(-s^2/w^2), so the
//                  surface is a localized bump with b(inf) = 0
//   turning        k_s = theta * 2/(w sqrt(pi)) exp(-s^2/w^2), b(inf) = theta
//                  (cones, cylinders and folds for test constructions)
//   table          cubic interpolation of user samples
class CurvatureProfile {
 public:
  enum class Family { flat, gaussian_bump, turning, table };

  static CurvatureProfile flat();
  static CurvatureProfile gaussian_bump(double beta, double width);
  static CurvatureProfile turning(double theta, double width);
  static CurvatureProfile table(std::vector<double> s, std::vector<double> ks,
                                std::string source = {});
  // Two-column CSV (s, k_s); a header line is skipped when present.
  static CurvatureProfile from_csv(const std::string& path);

  double ks(double s) const;
  // Closed-form turning angle when the family has one.
  std::optional<double> turning_angle(double s) const;

  // k_s -> -k_s; the meridian becomes (r, -z).
  CurvatureProfile negated() const;

  Family family() const { return family_; }
  double beta() const { return beta_; }
  double width() const { return width_; }
  double theta() const { return theta_; }
  const numerics::SampledFunction& samples() const { return table_; }
  const std::string& source() const { return source_; }
  // Radius beyond which |k_s| <= decay_tolerance() (inf if never).
  double decay_radius() const { return decay_radius_; }
  double decay_tolerance() const { return decay_tol_; }
  // Natural length scale of the profile (bump width; 1 for flat).
  double length_scale() const;
  std::string describe() const;

 private:
  void compute_decay_radius();

  Family family_ = Family::flat;
  double beta_ = 0.0;
  double width_ = 1.0;
  double theta_ = 0.0;
  double sign_ = 1.0;
  numerics::SampledFunction table_;
  std::string source_;
  double decay_tol_ = 1e-12;
  double decay_radius_ = 0.0;
};

struct MeridianPoint {
  double s = 0.0;
  double r = 0.0;
  double z = 0.0;
  double r_prime = 1.0;
  double z_prime = 0.0;
  double b = 0.0;
  double k_s = 0.0;
  double k_theta = 0.0;
};

// Arclength-parametrized generating curve (r(s), z(s)) on a uniform grid.
// r' = cos b, z' = sin b with b' = k_s, so r'^2 + z'^2 = 1 node by node.
class MeridianCurve {
 public:
  MeridianCurve(CurvatureProfile profile, std::vector<double> s, std::vector<double> b,
                std::vector<double> r, std::vector<double> z);

  const CurvatureProfile& profile() const { return profile_; }
  const std::vector<double>& s() const { return s_; }
  const std::vector<double>& b() const { return b_; }
  const std::vector<double>& r() const { return r_; }
  const std::vector<double>& z() const { return z_; }
  double r_prime(std::size_t i) const;
  double z_prime(std::size_t i) const;
  std::size_t size() const { return s_.size(); }
  double step() const { return step_; }
  double s_max() const { return s_.back(); }

  MeridianPoint node(std::size_t i) const;
  // Off-grid evaluation: one RK4 sub-step from the node below s.
  MeridianPoint at(double s) const;

  numerics::SampledFunction r_function() const;

 private:
  CurvatureProfile profile_;
  std::vector<double> s_;
  std::vector<double> b_;
  std::vector<double> r_;
  std::vector<double> z_;
  double step_ = 0.0;
};

MeridianCurve build_meridian(const CurvatureProfile& profile, double s_max, double h);

// Principal curvatures sampled on the curve's grid.
struct CurvaturePair {
  numerics::SampledFunction k_s;
  numerics::SampledFunction k_theta;
  double k_s_sup = 0.0;
  double k_theta_sup = 0.0;
};

CurvaturePair principal_curvatures(const MeridianCurve& curve);

struct JacobiResidual {
  double max_residual = 0.0;
  double at_s = 0.0;
  double tolerance = 0.0;
  bool within_tolerance = true;
};

// max |r'' + k_s k_theta r| over interior nodes, r'' by central differences.
// tolerance < 0 selects 50 h^2 (1 + ||k||^2).
JacobiResidual jacobi_residual(const MeridianCurve& curve, const CurvaturePair& pair,
                               double tolerance = -1.0);

struct FlatnessReport {
  Verdict verdict = Verdict::inconclusive;
  double tail_value = 0.0;   // max(|k_s|, |k_theta|) on the window
  double decay_rate = 0.0;   // fitted p in max|k| ~ t^-p
  double window_lo = 0.0;
  double window_hi = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct FlatnessOptions {
  double tolerance = 1e-2;
  // Window [window_fraction * S_max, S_max]; default is the last decade.
  double window_fraction = 0.1;
  std::size_t min_nodes = 10;
};

FlatnessReport asymptotic_flatness(const MeridianCurve& curve, const CurvaturePair& pair,
                                   const FlatnessOptions& options = {});

// (max{||k_s||, ||k_theta||})^-1, +inf for the flat profile.
double rho_m(const CurvaturePair& pair);

void write_meridian_csv(std::ostream& out, const MeridianCurve& curve, const CurvaturePair& pair);

}  // namespace layerspectra
