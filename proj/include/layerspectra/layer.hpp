#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "layerspectra/meridian.hpp"

namespace layerspectra {

// The layer Omega = Phi(Sigma_0 x (-a, a)), Phi(q, u) = p(q) + u n(q).
struct LayerSpec {
  MeridianCurve curve;
  CurvaturePair pair;
  double a = 0.0;
  int m = 4;

  double threshold() const;  // (pi / 2a)^2
};

LayerSpec make_layer(MeridianCurve curve, double a, int m = 4);

// det(1 - uA) = (1 - u k_s)(1 - u k_theta)^(m-2)
double weingarten_det(double k_s, double k_theta, double u, int m);

// Pointwise factors of the layer metric in (s, xi, u) coordinates.
struct MetricFactors {
  double det = 1.0;       // det(1 - uA)
  double weight = 0.0;    // (1-u k_s)(1-u k_theta)^(m-2) r^(m-2)
  double g_ss_inv = 1.0;  // (1 - u k_s)^-2
  double angular = 0.0;   // (1 - u k_theta)^-2 r^-2; 0 on the axis
};

MetricFactors metric_factors(const MeridianPoint& p, double u, int m);

struct MetricBounds {
  double c_minus = 1.0;
  double c_plus = 1.0;
};

// C_pm = (1 pm a / rho_m)^2. Throws AdmissibilityError unless a < rho_m.
MetricBounds metric_bounds(const LayerSpec& layer);

// w(s, u) > 0; throws AdmissibilityError on a nonpositive weight off the axis.
double volume_weight(const LayerSpec& layer, double s, double u);

// Geometry on [0, inf): the sampled meridian up to S_max, continued as a
// straight line (k_s = 0) beyond it.
struct LayerPoint {
  double r = 0.0;
  double z_prime = 0.0;
  double k_s = 0.0;
  double k_theta = 0.0;
};

class LayerGeometry {
 public:
  explicit LayerGeometry(const LayerSpec& layer);
  LayerPoint operator()(double s) const;
  double s_max() const { return s_max_; }

 private:
  const LayerSpec* layer_;
  double s_max_;
  MeridianPoint end_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct SelfIntersectionReport {
  Verdict verdict = Verdict::inconclusive;
  double resolution = 0.0;
  double axis_clearance = 0.0;  // min over s > 0 of r - |u z'| at u = +-a
  std::size_t segments = 0;
  std::optional<Point2> witness;
  std::string note;
};

// Injectivity of (s, u) -> (r - u z', z + u r') on (0, S_max) x (-a, a),
// certified at the given sampling resolution. resolution <= 0 uses the
// meridian grid step.
SelfIntersectionReport self_intersection_certificate(const LayerSpec& layer,
                                                     double resolution = 0.0);

// The sampled boundary of the meridian strip: the u = -a polyline, the end
// cap at S_max, the u = +a polyline reversed, and the axis segment.
std::vector<Point2> strip_boundary(const LayerSpec& layer, double resolution);

struct AdmissibilityReport {
  Verdict a1 = Verdict::inconclusive;
  Verdict a2 = Verdict::inconclusive;
  Verdict a3 = Verdict::inconclusive;
  double rho_m = 0.0;
  double a = 0.0;
  std::optional<MetricBounds> bounds;
  SelfIntersectionReport intersection;
  FlatnessReport flatness;
  bool admissible() const {
    return a1 == Verdict::pass && a2 == Verdict::pass && a3 == Verdict::pass;
  }
};

struct ValidateOptions {
  double resolution = 0.0;
  FlatnessOptions flatness;
};

AdmissibilityReport validate(const LayerSpec& layer, const ValidateOptions& options = {});

}  // namespace layerspectra
