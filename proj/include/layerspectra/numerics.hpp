#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "layerspectra/errors.hpp"

namespace layerspectra::numerics {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kEulerGamma = 0.577215664901532860606512090082402431;

enum class Interpolation { linear, cubic };

// Real function sampled on a strictly increasing grid. Cubic evaluation is a
// C1 Hermite interpolant; slopes are either supplied or estimated from the
// five-point Lagrange stencil, which keeps the interpolant fourth order.
class SampledFunction {
 public:
  SampledFunction() = default;
  SampledFunction(std::vector<double> nodes, std::vector<double> values,
                  Interpolation interpolation = Interpolation::cubic);
  SampledFunction(std::vector<double> nodes, std::vector<double> values,
                  std::vector<double> slopes);

  double operator()(double x) const;
  double derivative(double x) const;

  double lo() const { return nodes_.front(); }
  double hi() const { return nodes_.back(); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  Interpolation interpolation() const { return interpolation_; }

  double max_abs() const;

 private:
  std::size_t locate(double x) const;

  std::vector<double> nodes_;
  std::vector<double> values_;
  std::vector<double> slopes_;
  Interpolation interpolation_ = Interpolation::cubic;
};

// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussRule& gauss_legendre(int n);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int panels = 0;
};

struct QuadratureOptions {
  double rel_tol = 1e-10;
  double abs_floor = 1e-14;
  int max_panels = 20000;
};

using Integrand = std::function<double(double)>;

// Adaptive composite 15-point Gauss-Legendre. The worst panel is bisected
// until the summed error estimate is below rel_tol*|value| + abs_floor.
// Throws ConvergenceError carrying the best estimate otherwise.
QuadratureResult integrate(const Integrand& f, double lo, double hi,
                           const QuadratureOptions& options = {});

// Same, with the interval pre-split at the given interior breakpoints.
QuadratureResult integrate(const Integrand& f, std::span<const double> breakpoints,
                           const QuadratureOptions& options = {});

inline QuadratureResult integrate(const Integrand& f, double lo, double hi, double rel_tol) {
  QuadratureOptions options;
  options.rel_tol = rel_tol;
  return integrate(f, lo, hi, options);
}

// First-order system y' = rhs(s, y).
using OdeRhs = std::function<void(double, std::span<const double>, std::span<double>)>;

// One classical RK4 step of length h.
void rk4_step(const OdeRhs& rhs, double s, double h, std::span<const double> y,
              std::span<double> out);

// Fixed-step RK4 across consecutive grid nodes. Returns one cubic
// SampledFunction per state component.
std::vector<SampledFunction> solve_ivp(const OdeRhs& rhs, std::span<const double> y0,
                                       std::span<const double> grid);

// Macdonald functions K_0 and K_1 for z > 0.
double bessel_k(int order, double z);
// exp(z) * K_order(z); never underflows.
double bessel_k_scaled(int order, double z);
// True once K_order(z) is below the smallest normal double.
bool bessel_k_underflows(double z);

namespace detail {
// Exposed for the seam tests between the two evaluation regimes.
void bessel_k01_series(double z, double& k0, double& k1);
void bessel_k01_scaled_fraction(double z, double& k0s, double& k1s);
}  // namespace detail

enum class TailKind { power_law, negligible, analytic_bound };
enum class TailVerdict { convergent, divergent, inconclusive };

// Model of |f(t)| beyond the sampled range, fitted on the last decade. A
// window ending at round-off level (1e-13 of the peak of |f|) counts as
// negligible, with the late-window sup of |f| t as its error.
struct TailModel {
  TailKind kind = TailKind::power_law;
  double coefficient = 0.0;  // c in c / t^p, anchored at the window end
  double power = 0.0;        // p
  double power_lo = 0.0;     // spread of p over the two half windows
  double power_hi = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double fit_residual = 0.0;  // rms residual of the log-log fit
  double sign = 1.0;          // sign of f at the window end
  double analytic_tail = 0.0;  // used when kind == analytic_bound
  double analytic_error = 0.0;

  TailVerdict verdict() const;
};

TailModel fit_power_tail(const SampledFunction& f);
TailModel analytic_tail(double tail_value, double tail_error);

struct TailIntegral {
  double finite_part = 0.0;
  double finite_error = 0.0;
  double tail = 0.0;
  double tail_error = 0.0;
  TailVerdict verdict = TailVerdict::inconclusive;

  double value() const { return finite_part + tail; }
  double error_bound() const { return finite_error + tail_error; }
  bool convergent() const { return verdict == TailVerdict::convergent; }
};

// Quadrature of f over its sampled range plus the modelled tail beyond it.
// A divergent model is a classification, not an error: tail is +inf.
TailIntegral tail_integral(const SampledFunction& f, const TailModel& model);

std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace layerspectra::numerics
