#pragma once

// Reference computations for the tests. Written against textbook formulas
// with plain loops, sharing no code with the library.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline constexpr double pi = 3.141592653589793238462643383279502884;

// Adaptive Simpson with the Richardson correction.
inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-13,
                               int depth = 50) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Same, over [a, b] cut into n equal pieces (keeps peaked integrands honest).
inline double piecewise_simpson(const std::function<double(double)>& f, double a, double b, int n,
                                double tol = 1e-13) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lo = a + (b - a) * i / n, hi = a + (b - a) * (i + 1) / n;
    sum += adaptive_simpson(f, lo, hi, tol / n);
  }
  return sum;
}

// K_n(z) = int_0^inf exp(-z cosh t) cosh(n t) dt. The trapezoid rule is
// spectrally accurate for this doubly exponentially decaying integrand.
inline double bessel_k_integral(int n, double z) {
  const double t_max = std::acosh(std::max(1.0, 800.0 / z)) + 1.0;
  const double h = 1.0 / 128.0;
  double sum = 0.5 * std::exp(-z);
  for (double t = h; t <= t_max; t += h) sum += std::exp(-z * std::cosh(t)) * std::cosh(n * t);
  return sum * h;
}

// Composite Simpson on uniform samples (odd count).
inline double simpson_samples(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  double sum = y.front() + y.back();
  for (std::size_t i = 1; i + 1 < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * y[i];
  return sum * h / 3.0;
}

// Sum over all k-subsets, by bitmask.
inline double elementary_symmetric_brute(const std::vector<double>& x, int k) {
  double sum = 0.0;
  const unsigned n = static_cast<unsigned>(x.size());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    double prod = 1.0;
    for (unsigned i = 0; i < n; ++i)
      if (mask & (1u << i)) prod *= x[i];
    sum += prod;
  }
  return sum;
}

struct P {
  double x, y;
};

inline double cross(P o, P a, P b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

inline bool on_segment(P p, P a, P b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

inline bool segments_meet(P a, P b, P c, P d) {
  const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

// Any crossing between non-adjacent edges of an open polyline, O(n^2).
inline bool polyline_self_intersects(const std::vector<P>& pts) {
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    for (std::size_t j = i + 2; j + 1 < pts.size(); ++j)
      if (segments_meet(pts[i], pts[i + 1], pts[j], pts[j + 1])) return true;
  return false;
}

// Closed ring version: the last point joins the first.
inline bool ring_self_intersects(const std::vector<P>& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_meet(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n])) return true;
    }
  return false;
}

}  // namespace oracle
