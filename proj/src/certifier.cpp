#include "layerspectra/certifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace layerspectra {

using numerics::kPi;

double chi(double u, double a) { return std::sqrt(1.0 / a) * std::cos(kPi * u / (2.0 * a)); }

double chi_prime(double u, double a) {
  const double k1 = kPi / (2.0 * a);
  return -std::sqrt(1.0 / a) * k1 * std::sin(k1 * u);
}

double chi_second_moment(double a) { return a * a * (1.0 / 3.0 - 2.0 / (kPi * kPi)); }

namespace {

void check_trial(double sigma, double s0) {
  if (!(sigma > 0.0)) throw DomainError("phi_sigma: sigma must be positive");
  if (!(s0 > 0.0)) throw DomainError("phi_sigma: s0 must be positive");
}

// exp(-(x - x0)) with the underflow threshold of double.
constexpr double kExpFloor = -745.0;

}  // namespace

double phi_sigma(double s, double sigma, double s0, bool* underflow) {
  check_trial(sigma, s0);
  if (underflow) *underflow = false;
  if (s <= s0) return 1.0;
  const double x = sigma * s;
  const double x0 = sigma * s0;
  const double decay = -(x - x0);
  if (decay < kExpFloor) {
    if (underflow) *underflow = true;
    return 0.0;
  }
  return numerics::bessel_k_scaled(0, x) / numerics::bessel_k_scaled(0, x0) * std::exp(decay);
}

double phi_sigma_prime(double s, double sigma, double s0) {
  check_trial(sigma, s0);
  if (s <= s0) return 0.0;
  const double x = sigma * s;
  const double x0 = sigma * s0;
  const double decay = -(x - x0);
  if (decay < kExpFloor) return 0.0;
  return -sigma * numerics::bessel_k_scaled(1, x) / numerics::bessel_k_scaled(0, x0) *
         std::exp(decay);
}

double RadialTrial::phi(double s) const { return constant() ? 1.0 : phi_sigma(s, sigma, s0); }

double RadialTrial::dphi(double s) const {
  return constant() ? 0.0 : phi_sigma_prime(s, sigma, s0);
}

double RadialTrial::support_end(double s_max) const {
  if (constant()) return s_max;
  return s0 + 40.0 / sigma;
}

std::vector<double> TrialFamily::default_sigmas() {
  return {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
}

namespace {

constexpr int kTransverseNodes = 32;

TermValue robust_integral(const numerics::Integrand& f, const std::vector<double>& breaks,
                          double rel_tol, double abs_floor) {
  numerics::QuadratureOptions options;
  options.rel_tol = rel_tol;
  options.abs_floor = abs_floor;
  options.max_panels = 40000;
  try {
    const auto r = numerics::integrate(f, std::span<const double>(breaks), options);
    return {r.value, r.error};
  } catch (const ConvergenceError& e) {
    return {e.estimate(), e.error_bound()};
  }
}

// Breakpoints over [lo, hi] at the features of the layer and the trial.
std::vector<double> breakpoints(const LayerSpec& layer, double lo, double hi,
                                const RadialTrial* trial) {
  std::vector<double> pts{lo, hi};
  const double S = layer.curve.s_max();
  pts.push_back(S);
  const double decay = layer.curve.profile().decay_radius();
  if (std::isfinite(decay)) pts.push_back(decay);
  const double scale = layer.curve.profile().length_scale();
  for (double k = 0.5; k <= 8.0; k *= 2.0) pts.push_back(k * scale);
  if (trial && !trial->constant()) {
    pts.push_back(trial->s0);
    for (double k = 0.25; k <= 64.0; k *= 2.0) pts.push_back(trial->s0 + k / trial->sigma);
  }
  for (double t = 2.0 * S; t < hi; t *= 2.0) pts.push_back(t);
  std::vector<double> out;
  for (double p : pts) {
    if (p >= lo && p <= hi) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [&](double x, double y) { return y - x <= 1e-12 * std::max(1.0, hi); }),
            out.end());
  if (out.back() < hi) out.back() = hi;
  return out;
}

// psi(s, u) as a sum of separable terms p(s) q(u).
struct Separable {
  std::function<void(double, double&, double&)> radial;      // p, p'
  std::function<void(double, double&, double&)> transverse;  // q, q'
};
using Field = std::vector<Separable>;

struct FieldSample {
  double v = 0.0;
  double ds = 0.0;
  double du = 0.0;
};

class FormEvaluator {
 public:
  FormEvaluator(const LayerSpec& layer, const Field& f, const Field& g)
      : layer_(layer), geometry_(layer), f_(f), g_(g),
        rule_(numerics::gauss_legendre(kTransverseNodes)) {
    const double a = layer.a;
    u_.resize(rule_.nodes.size());
    wu_.resize(rule_.nodes.size());
    for (std::size_t q = 0; q < u_.size(); ++q) {
      u_[q] = a * rule_.nodes[q];
      wu_[q] = a * rule_.weights[q];
    }
    k1sq_ = layer.threshold();
  }

  // Inner u-integral of the bilinear form at s; magnitude sums |terms|.
  void at(double s, double& value, double& magnitude) const {
    const LayerPoint p = geometry_(s);
    std::vector<double> fp(f_.size()), fdp(f_.size()), gp(g_.size()), gdp(g_.size());
    for (std::size_t k = 0; k < f_.size(); ++k) f_[k].radial(s, fp[k], fdp[k]);
    for (std::size_t k = 0; k < g_.size(); ++k) g_[k].radial(s, gp[k], gdp[k]);
    value = 0.0;
    magnitude = 0.0;
    const double r2 = p.r * p.r;
    for (std::size_t q = 0; q < u_.size(); ++q) {
      const double u = u_[q];
      const FieldSample F = sample(f_, fp, fdp, u);
      const FieldSample G = sample(g_, gp, gdp, u);
      const double ts = 1.0 - u * p.k_s;
      const double tt = 1.0 - u * p.k_theta;
      const double w = ts * tt * tt * r2;
      const double t1 = F.ds * G.ds / (ts * ts);
      const double t2 = F.du * G.du;
      const double t3 = k1sq_ * F.v * G.v;
      value += wu_[q] * (t1 + t2 - t3) * w;
      magnitude += wu_[q] * (std::abs(t1) + std::abs(t2) + std::abs(t3)) * std::abs(w);
    }
    value *= kW2;
    magnitude *= kW2;
  }

 private:
  static FieldSample sample(const Field& field, const std::vector<double>& p,
                            const std::vector<double>& dp, double u) {
    FieldSample out;
    for (std::size_t k = 0; k < field.size(); ++k) {
      double q = 0.0;
      double dq = 0.0;
      field[k].transverse(u, q, dq);
      out.v += p[k] * q;
      out.ds += dp[k] * q;
      out.du += p[k] * dq;
    }
    return out;
  }

  const LayerSpec& layer_;
  LayerGeometry geometry_;
  const Field& f_;
  const Field& g_;
  const numerics::GaussRule& rule_;
  std::vector<double> u_;
  std::vector<double> wu_;
  double k1sq_ = 0.0;
};

// Bilinear full-form integral Q2(f, g) - (pi/2a)^2 <f, g> over [lo, hi].
TermValue form_integral(const LayerSpec& layer, const Field& f, const Field& g,
                        const std::vector<double>& breaks) {
  const FormEvaluator eval(layer, f, g);
  auto magnitude_of = [&](double s) {
    double v = 0.0, m = 0.0;
    eval.at(s, v, m);
    return m;
  };
  auto value_of = [&](double s) {
    double v = 0.0, m = 0.0;
    eval.at(s, v, m);
    return v;
  };
  const TermValue magnitude = robust_integral(magnitude_of, breaks, 1e-4, 1e-300);
  // The transverse terms cancel to c_2 r^2 pointwise; round-off of that
  // cancellation is charged to the error.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * magnitude.value;
  TermValue out = robust_integral(value_of, breaks, 1e-10, 1e-12 * magnitude.value + 1e-300);
  out.error += noise;
  return out;
}

Field trial_field(const RadialTrial& trial, double a) {
  Separable term;
  term.radial = [trial](double s, double& p, double& dp) {
    p = trial.phi(s);
    dp = trial.dphi(s);
  };
  term.transverse = [a](double u, double& q, double& dq) {
    q = chi(u, a);
    dq = chi_prime(u, a);
  };
  return {term};
}

Field bump_field(const BumpSpec& bump, double a, double scale) {
  Separable term;
  term.radial = [bump, scale](double s, double& p, double& dp) {
    p = scale * bump.j(s);
    dp = scale * bump.dj(s);
  };
  term.transverse = [a](double u, double& q, double& dq) {
    q = u * chi(u, a);
    dq = chi(u, a) + u * chi_prime(u, a);
  };
  return {term};
}

}  // namespace

TermValue curvature_term(const LayerSpec& layer, const RadialTrial& trial) {
  const LayerGeometry geometry(layer);
  const double hi = trial.support_end(layer.curve.s_max());
  const auto breaks = breakpoints(layer, 0.0, hi, &trial);
  auto f = [&](double s) {
    const LayerPoint p = geometry(s);
    const double phi = trial.phi(s);
    // c_2 r^2 = 2 k_s z' r + z'^2
    return kW2 * (2.0 * p.k_s * p.z_prime * p.r + p.z_prime * p.z_prime) * phi * phi;
  };
  TermValue out = robust_integral(f, breaks, 1e-10, 1e-13);
  if (trial.constant()) {
    // phi == 1 is only integrated over the sampled window.
    const double zp = layer.curve.z_prime(layer.curve.size() - 1);
    out.error += kW2 * zp * zp * layer.curve.s_max();
  }
  return out;
}

TermValue tangential_term(const LayerSpec& layer, const RadialTrial& trial) {
  if (trial.constant()) return {};
  const LayerGeometry geometry(layer);
  const double hi = trial.support_end(layer.curve.s_max());
  const auto breaks = breakpoints(layer, trial.s0, hi, &trial);
  const numerics::GaussRule& rule = numerics::gauss_legendre(kTransverseNodes);
  const double a = layer.a;
  auto f = [&](double s) {
    const LayerPoint p = geometry(s);
    const double dphi = trial.dphi(s);
    double inner = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double u = a * rule.nodes[q];
      const double c = chi(u, a);
      const double tt = 1.0 - u * p.k_theta;
      inner += a * rule.weights[q] * c * c * tt * tt / (1.0 - u * p.k_s);
    }
    return kW2 * dphi * dphi * inner * p.r * p.r;
  };
  return robust_integral(f, breaks, 1e-10, 1e-300);
}

TermValue direct_q3(const LayerSpec& layer, const RadialTrial& trial) {
  const Field field = trial_field(trial, layer.a);
  const double hi = trial.support_end(layer.curve.s_max());
  return form_integral(layer, field, field, breakpoints(layer, 0.0, hi, &trial));
}

CertificateRow q3(const LayerSpec& layer, const RadialTrial& trial) {
  CertificateRow row;
  row.sigma = trial.sigma;
  row.tangential = tangential_term(layer, trial);
  row.curvature = curvature_term(layer, trial);
  row.q3 = {row.tangential.value + row.curvature.value,
            row.tangential.error + row.curvature.error};
  row.direct = direct_q3(layer, trial);
  row.discrepancy = row.direct.value - row.q3.value;
  if (!trial.constant()) {
    bool underflow = false;
    phi_sigma(trial.support_end(0.0), trial.sigma, trial.s0, &underflow);
    row.phi_underflow = underflow;
  }
  const double allowed = row.q3.error + row.direct.error +
                         1e-12 * (std::abs(row.q3.value) + std::abs(row.direct.value));
  if (std::abs(row.discrepancy) > allowed) {
    std::ostringstream msg;
    msg << "Q3 decomposition " << row.q3.value << " and direct quadrature " << row.direct.value
        << " disagree by " << row.discrepancy << " (allowed " << allowed << ") at sigma "
        << trial.sigma;
    throw ConsistencyError(msg.str());
  }
  return row;
}

double BumpSpec::j(double s) const {
  if (s <= lo || s >= hi) return 0.0;
  const double x = (2.0 * s - lo - hi) / (hi - lo);
  const double t = 1.0 - x * x;
  return t * t * t;
}

double BumpSpec::dj(double s) const {
  if (s <= lo || s >= hi) return 0.0;
  const double x = (2.0 * s - lo - hi) / (hi - lo);
  const double t = 1.0 - x * x;
  return -6.0 * x * t * t * (2.0 / (hi - lo));
}

double BumpSpec::ddj(double s) const {
  if (s <= lo || s >= hi) return 0.0;
  const double x = (2.0 * s - lo - hi) / (hi - lo);
  const double t = 1.0 - x * x;
  const double scale = 2.0 / (hi - lo);
  return (-6.0 * t * t + 24.0 * x * x * t) * scale * scale;
}

BumpSpec select_bump(const MeridianCurve& curve, const CurvaturePair& pair, double s_scan) {
  const auto& s = curve.s();
  const auto& ks = pair.k_s.values();
  const auto& kt = pair.k_theta.values();
  std::vector<double> c1;
  std::size_t n = 0;
  while (n < s.size() && s[n] < s_scan) {
    c1.push_back(ks[n] + 2.0 * kt[n]);
    ++n;
  }
  double peak = 0.0;
  for (double v : c1) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw NoBumpError("k_s + 2 k_theta vanishes on the scan window");
  const std::size_t min_run = 4;
  for (double threshold = 0.5 * peak; threshold > 1e-12 * peak; threshold *= 0.5) {
    std::size_t best_lo = 0, best_len = 0;
    std::size_t i = 0;
    while (i < n) {
      if (std::abs(c1[i]) < threshold) {
        ++i;
        continue;
      }
      const double sign = c1[i] > 0.0 ? 1.0 : -1.0;
      std::size_t k = i;
      while (k < n && std::abs(c1[k]) >= threshold && c1[k] * sign > 0.0) ++k;
      if (k - i > best_len) {
        best_len = k - i;
        best_lo = i;
      }
      i = k;
    }
    if (best_len >= min_run) {
      BumpSpec bump;
      bump.lo = s[best_lo];
      bump.hi = s[best_lo + best_len - 1];
      bump.sign = c1[best_lo] > 0.0 ? 1.0 : -1.0;
      bump.threshold = threshold;
      return bump;
    }
  }
  throw NoBumpError("no sign-definite interval of k_s + 2 k_theta found");
}

PerturbationRow perturbed_q3(const LayerSpec& layer, const RadialTrial& trial,
                             const BumpSpec& bump, std::optional<double> epsilon) {
  if (!trial.constant() && !(bump.hi < trial.s0)) {
    throw DomainError("perturbed_q3: bump support must lie inside (0, s0)");
  }
  PerturbationRow row;
  row.sigma = trial.sigma;
  const CertificateRow base = q3(layer, trial);
  row.base = base.q3.value;

  const Field f = trial_field(trial, layer.a);
  const Field g = bump_field(bump, layer.a, 1.0);
  const std::vector<double> support = breakpoints(layer, bump.lo, bump.hi, nullptr);
  const TermValue B = form_integral(layer, f, g, support);
  const TermValue C = form_integral(layer, g, g, support);
  row.cross = B.value;
  row.bump_energy = C.value;

  const LayerGeometry geometry(layer);
  const double a2 = layer.a * layer.a;
  const double c3_weight = a2 * (9.0 / (kPi * kPi) - 1.5);
  auto closed = [&](double s) {
    const LayerPoint p = geometry(s);
    // r^2 c1 = r^2 k_s + 2 r z', r^2 c3 = k_s z'^2
    const double r2c1 = p.r * p.r * p.k_s + 2.0 * p.r * p.z_prime;
    const double r2c3 = p.k_s * p.z_prime * p.z_prime;
    return kW2 * bump.j(s) * (-0.5 * r2c1 + c3_weight * r2c3);
  };
  auto leading = [&](double s) {
    const LayerPoint p = geometry(s);
    return -0.5 * kW2 * bump.j(s) * (p.r * p.r * p.k_s + 2.0 * p.r * p.z_prime);
  };
  const TermValue closed_value = robust_integral(closed, support, 1e-10, 1e-300);
  row.cross_closed = closed_value.value;
  row.cross_leading = robust_integral(leading, support, 1e-10, 1e-300).value;
  const double cross_allowed = B.error + closed_value.error + 1e-10 * std::abs(B.value);
  if (std::abs(row.cross - row.cross_closed) > cross_allowed) {
    std::ostringstream msg;
    msg << "cross term " << row.cross << " disagrees with its closed form " << row.cross_closed;
    throw ConsistencyError(msg.str());
  }

  if (epsilon) {
    row.epsilon = *epsilon;
  } else if (C.value > 0.0) {
    row.epsilon = -B.value / C.value;
  } else {
    // Fallback: small step against the cross term, halved until it helps.
    row.epsilon = B.value > 0.0 ? -1e-3 : 1e-3;
    for (int it = 0; it < 40; ++it) {
      if (2.0 * row.epsilon * B.value + row.epsilon * row.epsilon * C.value < 0.0) break;
      row.epsilon *= 0.5;
    }
  }
  const double eps = row.epsilon;
  row.q3_quadratic = row.base + 2.0 * eps * B.value + eps * eps * C.value;
  row.error = base.q3.error + 2.0 * std::abs(eps) * B.error + eps * eps * C.error;

  if (eps == 0.0) {
    row.q3_direct = base.direct;
  } else {
    Field psi = f;
    const Field scaled = bump_field(bump, layer.a, eps);
    psi.insert(psi.end(), scaled.begin(), scaled.end());
    const double hi = trial.support_end(layer.curve.s_max());
    row.q3_direct = form_integral(layer, psi, psi, breakpoints(layer, 0.0, hi, &trial));
  }
  const double allowed = row.error + row.q3_direct.error +
                         1e-12 * (std::abs(row.q3_quadratic) + std::abs(row.q3_direct.value));
  if (std::abs(row.q3_direct.value - row.q3_quadratic) > allowed) {
    std::ostringstream msg;
    msg << "perturbed Q3: direct " << row.q3_direct.value << " vs expansion " << row.q3_quadratic;
    throw ConsistencyError(msg.str());
  }
  return row;
}

std::string to_string(CertVerdict v) {
  switch (v) {
    case CertVerdict::certified:
      return "Certified";
    case CertVerdict::no_certificate:
      return "NoCertificate";
    case CertVerdict::inconclusive:
      return "Inconclusive";
  }
  return "Inconclusive";
}

namespace {

bool is_flat(const LayerSpec& layer) {
  return layer.curve.profile().family() == CurvatureProfile::Family::flat ||
         (layer.pair.k_s_sup == 0.0 && layer.pair.k_theta_sup == 0.0);
}

}  // namespace

Certificate certify(const LayerSpec& layer, const CertifyOptions& options) {
  Certificate cert;
  cert.threshold = layer.threshold();
  const KTotal K = K_total(layer);
  cert.K_total = K.value;
  cert.K_error = K.error_bound;
  cert.c2_integral = K.c2_integral;

  const AdmissibilityReport adm = validate(layer);
  cert.hypotheses.push_back({"A1", adm.a1, adm.intersection.note});
  {
    std::ostringstream d;
    d << "a = " << adm.a << ", rho_m = " << adm.rho_m;
    cert.hypotheses.push_back({"A2", adm.a2, d.str()});
  }
  cert.hypotheses.push_back({"A3", adm.a3, adm.flatness.note});
  cert.hypotheses.push_back(
      {"K2 integrable", K.integrable ? Verdict::pass : Verdict::fail,
       K.integrable ? "c2 r^2 tail convergent" : "c2 r^2 tail not integrable"});
  const bool strictly_negative = K.integrable && K.value + K.error_bound < 0.0;
  const bool near_zero =
      K.integrable && std::abs(K.value) <= options.case2_factor * K.error_bound;
  {
    std::ostringstream d;
    d << "K_total = " << K.value << " +- " << K.error_bound;
    const Verdict v = strictly_negative || near_zero
                          ? Verdict::pass
                          : (K.integrable ? Verdict::fail : Verdict::inconclusive);
    cert.hypotheses.push_back({"int K2 <= 0", v, d.str()});
  }

  const Lemma2Constants l2 = lemma2_constants(layer.curve, layer.pair);
  double s0 = 1.0;
  if (l2.computable) s0 = std::max(s0, l2.s0);
  const bool flat = is_flat(layer);
  if (flat) {
    cert.case_tag = "flat";
  } else if (strictly_negative) {
    cert.case_tag = "strict-negative";
  } else if (near_zero) {
    cert.case_tag = "zero-K2";
  } else {
    cert.case_tag = "positive-K2";
  }
  const bool perturb = !flat && (cert.case_tag == "zero-K2" || options.force_perturbation);

  if (perturb) {
    const double decay = layer.curve.profile().decay_radius();
    double scan = std::max(s0, std::isfinite(decay) ? decay : s0);
    scan = std::min(scan, layer.curve.s_max());
    try {
      cert.bump = select_bump(layer.curve, layer.pair, scan);
      s0 = std::max(s0, 5.0 * cert.bump->hi);
    } catch (const NoBumpError& e) {
      cert.note += std::string("no perturbation bump: ") + e.what() + "; ";
    }
  }
  cert.s0 = s0;

  cert.best_q3 = std::numeric_limits<double>::infinity();
  bool certified = false;
  for (double sigma : options.sigmas) {
    const RadialTrial trial{sigma, s0};
    CertificateRow row = q3(layer, trial);
    cert.best_q3 = std::min(cert.best_q3, row.q3.value + row.q3.error);
    cert.rows.push_back(row);
    if (cert.case_tag == "strict-negative" && row.q3.value + row.q3.error < 0.0) {
      certified = true;
      break;
    }
    if (perturb && cert.bump) {
      PerturbationRow prow = perturbed_q3(layer, trial, *cert.bump);
      const double bound =
          std::max(prow.q3_direct.value + prow.q3_direct.error, prow.q3_quadratic + prow.error);
      cert.best_q3 = std::min(cert.best_q3, bound);
      cert.perturbation.push_back(prow);
      if (bound < 0.0) {
        certified = true;
        break;
      }
    }
  }

  if (certified) {
    cert.verdict = CertVerdict::certified;
    cert.note += "a trial function with Q3 < 0 was found";
  } else if (flat) {
    cert.verdict = CertVerdict::no_certificate;
    cert.note += "hyperplane: K_total vanishes and Q3 > 0 for every trial; no discrete spectrum expected";
  } else if (cert.case_tag == "positive-K2" && !options.force_perturbation) {
    cert.verdict = CertVerdict::no_certificate;
    cert.note += "int K2 > 0: the negative-total-curvature hypothesis fails";
  } else {
    cert.verdict = CertVerdict::inconclusive;
    cert.note += "sweep exhausted without Q3 + error < 0";
  }
  return cert;
}

}  // namespace layerspectra
