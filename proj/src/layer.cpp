#include "layerspectra/layer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace layerspectra {

using numerics::kPi;

double LayerSpec::threshold() const {
  const double k1 = kPi / (2.0 * a);
  return k1 * k1;
}

LayerSpec make_layer(MeridianCurve curve, double a, int m) {
  if (!(a > 0.0)) throw DomainError("layer half-width must be positive");
  if (m < 3) throw DomainError("layer dimension m must be at least 3");
  CurvaturePair pair = principal_curvatures(curve);
  return LayerSpec{std::move(curve), std::move(pair), a, m};
}

double weingarten_det(double k_s, double k_theta, double u, int m) {
  return (1.0 - u * k_s) * std::pow(1.0 - u * k_theta, m - 2);
}

MetricFactors metric_factors(const MeridianPoint& p, double u, int m) {
  MetricFactors f;
  const double ts = 1.0 - u * p.k_s;
  const double tt = 1.0 - u * p.k_theta;
  f.det = ts * std::pow(tt, m - 2);
  f.weight = f.det * std::pow(p.r, m - 2);
  f.g_ss_inv = 1.0 / (ts * ts);
  f.angular = p.r > 0.0 ? 1.0 / (tt * tt * p.r * p.r) : 0.0;
  return f;
}

MetricBounds metric_bounds(const LayerSpec& layer) {
  const double rho = rho_m(layer.pair);
  if (!(layer.a < rho)) {
    std::ostringstream msg;
    msg << "assumption A2 violated: a = " << layer.a << " is not below rho_m = " << rho;
    throw AdmissibilityError(msg.str());
  }
  const double ratio = std::isinf(rho) ? 0.0 : layer.a / rho;
  return {(1.0 - ratio) * (1.0 - ratio), (1.0 + ratio) * (1.0 + ratio)};
}

double volume_weight(const LayerSpec& layer, double s, double u) {
  const MeridianPoint p = layer.curve.at(s);
  const double w = metric_factors(p, u, layer.m).weight;
  if (s > 0.0 && !(w > 0.0)) {
    std::ostringstream msg;
    msg << "nonpositive layer volume weight " << w << " at (s, u) = (" << s << ", " << u << ")";
    throw AdmissibilityError(msg.str());
  }
  return w;
}

LayerGeometry::LayerGeometry(const LayerSpec& layer)
    : layer_(&layer), s_max_(layer.curve.s_max()), end_(layer.curve.node(layer.curve.size() - 1)) {}

LayerPoint LayerGeometry::operator()(double s) const {
  if (s <= s_max_) {
    const MeridianPoint p = layer_->curve.at(s);
    return {p.r, p.z_prime, p.k_s, p.k_theta};
  }
  const double r = end_.r + (s - s_max_) * end_.r_prime;
  return {r, end_.z_prime, 0.0, end_.z_prime / r};
}

namespace {

struct Segment {
  Point2 p;
  Point2 q;
};

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

bool on_segment(const Point2& a, const Point2& b, const Point2& c) {
  return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= c.y &&
         c.y <= std::max(a.y, b.y);
}

std::optional<Point2> intersect(const Segment& s1, const Segment& s2) {
  const double d1 = orient(s2.p, s2.q, s1.p);
  const double d2 = orient(s2.p, s2.q, s1.q);
  const double d3 = orient(s1.p, s1.q, s2.p);
  const double d4 = orient(s1.p, s1.q, s2.q);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    const double t = d1 / (d1 - d2);
    return Point2{s1.p.x + t * (s1.q.x - s1.p.x), s1.p.y + t * (s1.q.y - s1.p.y)};
  }
  if (d1 == 0 && on_segment(s2.p, s2.q, s1.p)) return s1.p;
  if (d2 == 0 && on_segment(s2.p, s2.q, s1.q)) return s1.q;
  if (d3 == 0 && on_segment(s1.p, s1.q, s2.p)) return s2.p;
  if (d4 == 0 && on_segment(s1.p, s1.q, s2.q)) return s2.q;
  return std::nullopt;
}

}  // namespace

std::vector<Point2> strip_boundary(const LayerSpec& layer, double resolution) {
  const MeridianCurve& curve = layer.curve;
  const double ds = resolution > 0.0 ? resolution : curve.step();
  const auto n = static_cast<std::size_t>(std::ceil(curve.s_max() / ds - 1e-9));
  std::vector<MeridianPoint> pts;
  pts.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    pts.push_back(curve.at(std::min(curve.s_max(), ds * static_cast<double>(k))));
  }
  std::vector<Point2> ring;
  ring.reserve(2 * pts.size());
  const double a = layer.a;
  for (const auto& p : pts) ring.push_back({p.r + a * p.z_prime, p.z - a * p.r_prime});
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    ring.push_back({it->r - a * it->z_prime, it->z + a * it->r_prime});
  }
  return ring;
}

SelfIntersectionReport self_intersection_certificate(const LayerSpec& layer, double resolution) {
  SelfIntersectionReport report;
  const MeridianCurve& curve = layer.curve;
  report.resolution = resolution > 0.0 ? resolution : curve.step();
  const double feature = std::min(layer.a, rho_m(layer.pair));

  // Axis clearance relative to s: (r - a|z'|)/s, which tends to 1 - a|k_s(0)| at the pole.
  report.axis_clearance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double c = (curve.r()[i] - layer.a * std::abs(curve.z_prime(i))) / curve.s()[i];
    report.axis_clearance = std::min(report.axis_clearance, c);
  }

  const std::vector<Point2> ring = strip_boundary(layer, report.resolution);
  const std::size_t count = ring.size();
  std::vector<Segment> edges(count);
  double longest = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    edges[i] = {ring[i], ring[(i + 1) % count]};
    longest = std::max(longest, std::hypot(edges[i].q.x - edges[i].p.x, edges[i].q.y - edges[i].p.y));
  }
  report.segments = count;

  // Uniform spatial hash; each edge is registered in every cell its bbox touches.
  const double cell = std::max(longest, 1e-12);
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < count; ++i) {
    const auto x0 = static_cast<long long>(std::floor(std::min(edges[i].p.x, edges[i].q.x) / cell));
    const auto x1 = static_cast<long long>(std::floor(std::max(edges[i].p.x, edges[i].q.x) / cell));
    const auto y0 = static_cast<long long>(std::floor(std::min(edges[i].p.y, edges[i].q.y) / cell));
    const auto y1 = static_cast<long long>(std::floor(std::max(edges[i].p.y, edges[i].q.y) / cell));
    for (long long x = x0; x <= x1; ++x) {
      for (long long y = y0; y <= y1; ++y) buckets[{x, y}].push_back(i);
    }
  }
  std::optional<std::pair<std::size_t, std::size_t>> first;
  for (const auto& [key, ids] : buckets) {
    for (std::size_t u = 0; u < ids.size(); ++u) {
      for (std::size_t v = u + 1; v < ids.size(); ++v) {
        std::size_t i = std::min(ids[u], ids[v]);
        std::size_t j = std::max(ids[u], ids[v]);
        if (j == i + 1 || (i == 0 && j == count - 1)) continue;
        if (first && std::make_pair(i, j) >= *first) continue;
        if (auto hit = intersect(edges[i], edges[j])) {
          first = std::make_pair(i, j);
          report.witness = *hit;
        }
      }
    }
  }

  if (first) {
    report.verdict = Verdict::fail;
    std::ostringstream msg;
    msg << "offset boundary edges " << first->first << " and " << first->second << " cross";
    report.note = msg.str();
  } else if (!(report.axis_clearance > 0.0)) {
    report.verdict = Verdict::fail;
    report.note = "offset sheet reaches the rotation axis";
  } else if (report.resolution > 0.25 * feature) {
    report.verdict = Verdict::inconclusive;
    report.note = "resolution too coarse relative to min(a, rho_m)";
  } else {
    report.verdict = Verdict::pass;
    report.note = "no crossings at this resolution";
  }
  return report;
}

AdmissibilityReport validate(const LayerSpec& layer, const ValidateOptions& options) {
  AdmissibilityReport report;
  report.a = layer.a;
  report.rho_m = rho_m(layer.pair);
  report.a2 = layer.a < report.rho_m ? Verdict::pass : Verdict::fail;
  if (report.a2 == Verdict::pass) report.bounds = metric_bounds(layer);
  report.flatness = asymptotic_flatness(layer.curve, layer.pair, options.flatness);
  report.a3 = report.flatness.verdict;
  report.intersection = self_intersection_certificate(layer, options.resolution);
  report.a1 = report.intersection.verdict;
  return report;
}

}  // namespace layerspectra
