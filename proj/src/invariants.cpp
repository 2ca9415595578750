#include "layerspectra/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace layerspectra {

using numerics::kPi;
using numerics::SampledFunction;

double eta_closed(int k, double a) {
  if (k < 0) throw DomainError("eta_closed: k must be nonnegative");
  if (!(a > 0.0)) throw DomainError("eta_closed: a must be positive");
  if (k == 0 || k % 2 != 0) return 0.0;
  const double k1 = kPi / (2.0 * a);
  double factorial = 1.0;
  for (int i = 2; i <= k; ++i) factorial *= i;
  double sum = 0.0;
  double odd_factorial = 1.0;  // (2l-1)!
  for (int l = 1; l <= k / 2; ++l) {
    if (l > 1) odd_factorial *= (2.0 * l - 2.0) * (2.0 * l - 1.0);
    const double sign = ((k / 2 - l) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * std::pow(kPi, 2 * l - 1) / odd_factorial;
  }
  return 0.5 * factorial / std::pow(2.0 * k1, k - 1) * sum;
}

double eta_quadrature(int k, double a) {
  if (k < 0) throw DomainError("eta_quadrature: k must be nonnegative");
  if (!(a > 0.0)) throw DomainError("eta_quadrature: a must be positive");
  const double k1 = kPi / (2.0 * a);
  auto f = [k, k1](double u) {
    const double d = -k1 * std::sin(k1 * u);
    const double c = std::cos(k1 * u);
    return std::pow(u, k) * (d * d - k1 * k1 * c * c);
  };
  numerics::QuadratureOptions options;
  options.rel_tol = 1e-14;
  // Both halves vanish for k = 0, so the floor is scaled to int |f|.
  options.abs_floor = 1e-16 * k1 * k1 * std::pow(a, k + 1);
  // Split at 0 so the odd moments cancel panel by panel.
  const double left = numerics::integrate(f, -a, 0.0, options).value;
  const double right = numerics::integrate(f, 0.0, a, options).value;
  return left + right;
}

EtaTable eta_table(double a, int k_max) {
  EtaTable table;
  table.a = a;
  table.k1 = kPi / (2.0 * a);
  for (int k = 0; k <= k_max; ++k) table.values.push_back(eta_closed(k, a));
  return table;
}

double elementary_symmetric(std::span<const double> kappa, int k) {
  if (k < 0 || k > static_cast<int>(kappa.size())) {
    throw DomainError("elementary_symmetric: k out of range");
  }
  std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
  e[0] = 1.0;
  for (double x : kappa) {
    for (int j = k; j >= 1; --j) e[j] += x * e[j - 1];
  }
  return e[k];
}

SampledFunction c2_density(const MeridianCurve& curve, const CurvaturePair& pair) {
  // k_theta r = z', so c_2 r^2 = 2 k_s z' r + z'^2 stays regular at the pole.
  std::vector<double> v(curve.size());
  const auto& ks = pair.k_s.values();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double zp = curve.z_prime(i);
    v[i] = 2.0 * ks[i] * zp * curve.r()[i] + zp * zp;
  }
  return SampledFunction(curve.s(), std::move(v));
}

KTotal K_total(const LayerSpec& layer) {
  KTotal out;
  const SampledFunction f = c2_density(layer.curve, layer.pair);
  out.integral = numerics::tail_integral(f, numerics::fit_power_tail(f));
  out.integrable = out.integral.convergent();
  out.eta2 = eta_closed(2, layer.a);
  out.c2_integral = out.integral.value();
  out.c2_error = out.integral.error_bound();
  out.value = out.eta2 * kW2 * out.c2_integral;
  out.error_bound = out.eta2 * kW2 * out.c2_error;
  return out;
}

namespace {

// Running integral of a cubic interpolant at its nodes (2-point Gauss per interval).
std::vector<double> cumulative(const SampledFunction& f) {
  const auto& x = f.nodes();
  const numerics::GaussRule& rule = numerics::gauss_legendre(2);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double half = 0.5 * (x[i + 1] - x[i]);
    const double mid = 0.5 * (x[i + 1] + x[i]);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      acc += rule.weights[q] * f(mid + half * rule.nodes[q]);
    }
    out[i + 1] = out[i] + half * acc;
  }
  return out;
}

std::size_t nearest_node(const MeridianCurve& curve, double s) {
  const auto& grid = curve.s();
  auto it = std::lower_bound(grid.begin(), grid.end(), s);
  if (it == grid.end()) return grid.size() - 1;
  std::size_t i = static_cast<std::size_t>(it - grid.begin());
  if (i > 0 && s - grid[i - 1] < grid[i] - s) --i;
  return i;
}

}  // namespace

Lemma2Constants lemma2_constants(const MeridianCurve& curve, const CurvaturePair& pair) {
  Lemma2Constants out;
  const auto& ks = pair.k_s.values();
  std::vector<double> g(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double zp = curve.z_prime(i);
    g[i] = ks[i] * zp * curve.r()[i] + zp * zp;
  }
  const SampledFunction f(curve.s(), std::move(g));
  const numerics::TailIntegral D = numerics::tail_integral(f, numerics::fit_power_tail(f));
  if (!D.convergent()) {
    out.note = "int (k_s k_theta + k_theta^2) r^2 ds does not converge on the window";
    return out;
  }
  out.D = D.value();
  const std::size_t n = curve.size();
  const double p_end = curve.s()[n - 1] - curve.r_prime(n - 1) * curve.r()[n - 1];
  out.D_error = D.error_bound() + std::abs(p_end - D.finite_part);

  // Smallest node beyond 1 from which s - r' r stays within 1/100 of D.
  std::vector<double> suffix(n, 0.0);
  double worst = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double p = curve.s()[i] - curve.r_prime(i) * curve.r()[i];
    worst = std::max(worst, std::abs(p - out.D));
    suffix[i] = worst;
  }
  std::optional<std::size_t> anchor;
  for (std::size_t i = 0; i < n; ++i) {
    if (curve.s()[i] > 1.0 && suffix[i] + out.D_error <= 0.01) {
      anchor = i;
      break;
    }
  }
  if (!anchor) {
    out.note = "s - r' r never settles within 1/100 of D on the window";
    return out;
  }
  out.s0 = curve.s()[*anchor];
  out.r0 = curve.r()[*anchor];
  out.B = 2.0 * out.D + 1.0 / 50.0;
  out.C = -out.s0 * out.s0 + out.B * out.s0 + out.r0 * out.r0;
  out.aleph = 0.25 * out.B * out.B - out.C;
  out.s1 = out.aleph <= 0.0 ? out.s0 : std::max(out.s0, 0.5 * out.B + std::sqrt(out.aleph));
  out.computable = true;
  return out;
}

double envelope_tail(double S, double B, double C) {
  const double x = S - 0.5 * B;
  const double q = C - 0.25 * B * B;
  if (q > 0.0) {
    const double root = std::sqrt(q);
    return (0.5 * kPi - std::atan(x / root)) / root;
  }
  if (q < 0.0) {
    const double k = std::sqrt(-q);
    if (!(x > k)) return std::numeric_limits<double>::infinity();
    return std::log1p(2.0 * k / (x - k)) / (2.0 * k);
  }
  return x > 0.0 ? 1.0 / x : std::numeric_limits<double>::infinity();
}

Lemma2Diagnostics lemma2_diagnostics(const MeridianCurve& curve, const CurvaturePair& pair,
                                     double z_tolerance) {
  Lemma2Diagnostics out;
  const std::size_t n = curve.size();
  const std::size_t half = nearest_node(curve, 0.5 * curve.s_max());
  out.S = curve.s()[n - 1];
  const double S_half = curve.s()[half];
  out.r_over_S = curve.r()[n - 1] / out.S;
  out.r_over_S_half = curve.r()[half] / S_half;
  out.fitted_C = out.S * std::abs(out.r_over_S - 1.0);
  out.fitted_C_half = S_half * std::abs(out.r_over_S_half - 1.0);
  out.z_prime_S = curve.z_prime(n - 1);
  out.z_prime_half = curve.z_prime(half);

  // k_theta r = z', so k_s k_theta r = k_s z'.
  const auto& ks = pair.k_s.values();
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = ks[i] * curve.z_prime(i);
  const SampledFunction f(curve.s(), g);
  const std::vector<double> running = cumulative(f);
  out.ks_kt_r_integral = running[n - 1];
  out.ks_kt_r_half = running[half];
  const numerics::TailIntegral tail = numerics::tail_integral(f, numerics::fit_power_tail(f));
  double magnitude = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    magnitude += 0.5 * (std::abs(g[i]) + std::abs(g[i + 1])) * (curve.s()[i + 1] - curve.s()[i]);
  }
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * magnitude;
  out.ks_kt_r_bound = tail.convergent()
                          ? std::abs(tail.tail) + tail.tail_error + tail.finite_error + floor
                          : std::numeric_limits<double>::infinity();

  std::ostringstream note;
  out.r_limit = out.fitted_C <= 1.5 * out.fitted_C_half + 1e-9 * out.S ? Verdict::pass
                                                                         : Verdict::fail;
  if (out.r_limit == Verdict::fail) note << "r(s)/s - 1 does not decay like 1/s; ";
  if (!std::isfinite(out.ks_kt_r_bound)) {
    out.integral_limit = Verdict::inconclusive;
    note << "k_s k_theta r has no convergent tail model; ";
  } else {
    out.integral_limit =
        std::abs(out.ks_kt_r_integral) <= out.ks_kt_r_bound ? Verdict::pass : Verdict::fail;
    if (out.integral_limit == Verdict::fail) note << "int k_s k_theta r ds stays away from 0; ";
  }
  const double zS = std::abs(out.z_prime_S);
  if (zS > z_tolerance) {
    out.z_limit = Verdict::fail;
    note << "z' does not tend to 0, so the meridian is not asymptotically flat "
            "and K_2 cannot be integrable; ";
  } else if (zS <= std::abs(out.z_prime_half) + 1e-12) {
    out.z_limit = Verdict::pass;
  } else {
    out.z_limit = Verdict::inconclusive;
    note << "z' small but growing across the window; ";
  }
  out.note = note.str();
  return out;
}

std::string to_string(Parabolicity p) {
  switch (p) {
    case Parabolicity::parabolic:
      return "parabolic";
    case Parabolicity::non_parabolic:
      return "non-parabolic";
    case Parabolicity::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

ParabolicityReport parabolicity(const MeridianCurve& curve, const CurvaturePair& pair) {
  ParabolicityReport out;
  if (!(curve.s_max() > 1.0)) throw DomainError("parabolicity: meridian must extend beyond s = 1");
  std::vector<double> t;
  std::vector<double> v;
  const auto& grid = curve.s();
  auto first = std::lower_bound(grid.begin(), grid.end(), 1.0);
  if (*first > 1.0 + 1e-12) {
    const double r1 = curve.at(1.0).r;
    t.push_back(1.0);
    v.push_back(1.0 / (kW2 * r1 * r1));
  }
  for (auto it = first; it != grid.end(); ++it) {
    const double r = curve.r()[static_cast<std::size_t>(it - grid.begin())];
    t.push_back(*it);
    v.push_back(1.0 / (kW2 * r * r));
  }
  const SampledFunction f(std::move(t), std::move(v));
  const numerics::TailModel model = numerics::fit_power_tail(f);
  const numerics::TailIntegral integral = numerics::tail_integral(f, model);
  out.finite_part = integral.finite_part;
  out.finite_error = integral.finite_error;
  out.tail = integral.tail;
  out.tail_error = integral.tail_error;
  out.tail_power = model.power;

  std::ostringstream note;
  switch (integral.verdict) {
    case numerics::TailVerdict::convergent:
      out.verdict = Parabolicity::non_parabolic;
      break;
    case numerics::TailVerdict::divergent:
      out.verdict = Parabolicity::parabolic;
      note << "boundary-area integral diverges (fitted power " << model.power
           << " <= 1); incompatible with the integrable-K_2 setting; ";
      break;
    case numerics::TailVerdict::inconclusive:
      out.verdict = Parabolicity::inconclusive;
      note << "fitted tail power straddles 1; ";
      break;
  }

  out.lemma2 = lemma2_constants(curve, pair);
  out.envelope_tail_bound = std::numeric_limits<double>::infinity();
  if (out.lemma2.computable && curve.s_max() >= out.lemma2.s1) {
    out.envelope_tail_bound = envelope_tail(curve.s_max(), out.lemma2.B, out.lemma2.C) / kW2;
  } else if (out.lemma2.computable) {
    note << "window ends before s1 = " << out.lemma2.s1 << "; envelope bound not applicable; ";
  }
  out.note = note.str();
  return out;
}

VolumeGrowthReport volume_growth(const MeridianCurve& curve, const CurvaturePair& pair) {
  VolumeGrowthReport out;
  const SampledFunction r = curve.r_function();
  const auto& x = curve.s();
  const std::size_t n = x.size();
  // r is a cubic per interval, so four Gauss points integrate r^2 exactly.
  const numerics::GaussRule& rule = numerics::gauss_legendre(4);
  out.s = x;
  out.V.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double half = 0.5 * (x[i + 1] - x[i]);
    const double mid = 0.5 * (x[i + 1] + x[i]);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double rv = r(mid + half * rule.nodes[q]);
      acc += rule.weights[q] * rv * rv;
    }
    out.V[i + 1] = out.V[i] + kW2 * half * acc;
  }
  const double S = x.back();
  out.alpha_at_S = out.V.back() / (kV3 * S * S * S);

  // alpha(s) = alpha_inf + c/s fitted over the last decade.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] < 0.1 * S) continue;
    const double xi = 1.0 / x[i];
    const double yi = out.V[i] / (kV3 * x[i] * x[i] * x[i]);
    pts.emplace_back(xi, yi);
    sx += xi;
    sy += yi;
    sxx += xi * xi;
    sxy += xi * yi;
    ++count;
  }
  const double denom = count * sxx - sx * sx;
  if (count >= 3 && denom > 0.0) {
    const double c = (count * sxy - sx * sy) / denom;
    out.alpha = (sy - c * sx) / count;
    double ss = 0.0;
    for (const auto& [xi, yi] : pts) ss += (yi - out.alpha - c * xi) * (yi - out.alpha - c * xi);
    out.alpha_error = std::abs(out.alpha - out.alpha_at_S) + std::sqrt(ss / count);
  } else {
    out.alpha = out.alpha_at_S;
    out.alpha_error = std::abs(out.alpha_at_S - 1.0);
  }

  const Lemma2Constants l2 = lemma2_constants(curve, pair);
  if (!l2.computable) {
    out.note = "envelope not checked: " + l2.note;
    return out;
  }
  out.envelope_checked = true;
  out.s0 = l2.s0;
  out.D = l2.D;
  const std::size_t i0 = nearest_node(curve, l2.s0);
  const double V0 = out.V[i0];
  const double s0 = l2.s0;
  const double r0 = l2.r0;
  auto constants = [&](double beta, double& c1, double& c2) {
    c1 = 2.0 * beta * s0 - s0 * s0 + r0 * r0;
    c2 = V0 + kW2 * (2.0 * s0 * s0 * s0 / 3.0 - r0 * r0 * s0 - beta * s0 * s0);
  };
  const double beta_lo = l2.D + 0.01;
  const double beta_hi = l2.D - 0.01;
  constants(beta_lo, out.c1, out.c2);
  constants(beta_hi, out.c1_upper, out.c2_upper);
  out.worst_margin = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (std::size_t i = i0; i < n; ++i) {
    const double s = x[i];
    const double lower = kW2 * (s * s * s / 3.0 - beta_lo * s * s + out.c1 * s) + out.c2;
    const double upper = kW2 * (s * s * s / 3.0 - beta_hi * s * s + out.c1_upper * s) + out.c2_upper;
    const double margin = std::min(out.V[i] - lower, upper - out.V[i]);
    out.worst_margin = std::min(out.worst_margin, margin);
    if (margin < -1e-9 * std::max(1.0, out.V[i])) inside = false;
  }
  out.envelope_contains = inside;
  if (!inside) out.note = "samples leave the cubic envelope";
  return out;
}

}  // namespace layerspectra
