#include "layerspectra/meridian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace layerspectra {

using numerics::kPi;
using numerics::SampledFunction;

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

CurvatureProfile CurvatureProfile::flat() {
  CurvatureProfile p;
  p.family_ = Family::flat;
  p.compute_decay_radius();
  return p;
}

CurvatureProfile CurvatureProfile::gaussian_bump(double beta, double width) {
  if (!(width > 0.0) || !std::isfinite(beta)) {
    throw DomainError("gaussian_bump: width must be positive and beta finite");
  }
  CurvatureProfile p;
  p.family_ = Family::gaussian_bump;
  p.beta_ = beta;
  p.width_ = width;
  p.compute_decay_radius();
  return p;
}

CurvatureProfile CurvatureProfile::turning(double theta, double width) {
  if (!(width > 0.0) || !std::isfinite(theta)) {
    throw DomainError("turning: width must be positive and theta finite");
  }
  CurvatureProfile p;
  p.family_ = Family::turning;
  p.theta_ = theta;
  p.width_ = width;
  p.compute_decay_radius();
  return p;
}

CurvatureProfile CurvatureProfile::table(std::vector<double> s, std::vector<double> ks,
                                         std::string source) {
  if (s.empty() || s.front() != 0.0) {
    throw DomainError("table profile: nodes must start at s = 0");
  }
  CurvatureProfile p;
  p.family_ = Family::table;
  p.table_ = SampledFunction(std::move(s), std::move(ks));
  p.source_ = std::move(source);
  p.width_ = 1.0;
  p.compute_decay_radius();
  return p;
}

CurvatureProfile CurvatureProfile::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open profile table " + path);
  std::vector<double> s;
  std::vector<double> ks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double a = 0.0;
    double b = 0.0;
    if (!(fields >> a >> b)) {
      if (s.empty()) continue;  // header
      throw DomainError(path + ": malformed row " + std::to_string(lineno));
    }
    s.push_back(a);
    ks.push_back(b);
  }
  return table(std::move(s), std::move(ks), path);
}

double CurvatureProfile::ks(double s) const {
  switch (family_) {
    case Family::flat:
      return 0.0;
    case Family::gaussian_bump: {
      const double x = s / width_;
      return sign_ * beta_ / width_ * (1.0 - 2.0 * x * x) * std::exp(-x * x);
    }
    case Family::turning: {
      const double x = s / width_;
      return sign_ * theta_ * 2.0 / (width_ * std::sqrt(kPi)) * std::exp(-x * x);
    }
    case Family::table:
      return sign_ * table_(s);
  }
  return 0.0;
}

std::optional<double> CurvatureProfile::turning_angle(double s) const {
  switch (family_) {
    case Family::flat:
      return 0.0;
    case Family::gaussian_bump: {
      const double x = s / width_;
      return sign_ * beta_ * x * std::exp(-x * x);
    }
    case Family::turning:
      return sign_ * theta_ * std::erf(s / width_);
    case Family::table:
      return std::nullopt;
  }
  return std::nullopt;
}

CurvatureProfile CurvatureProfile::negated() const {
  CurvatureProfile p = *this;
  p.sign_ = -sign_;
  return p;
}

double CurvatureProfile::length_scale() const {
  return family_ == Family::flat ? 1.0 : width_;
}

std::string CurvatureProfile::describe() const {
  std::ostringstream out;
  out << std::setprecision(6);
  const char* sign = sign_ < 0 ? "-" : "";
  switch (family_) {
    case Family::flat:
      out << "flat";
      break;
    case Family::gaussian_bump:
      out << sign << "gaussian_bump(beta=" << beta_ << ", w=" << width_ << ")";
      break;
    case Family::turning:
      out << sign << "turning(theta=" << theta_ << ", w=" << width_ << ")";
      break;
    case Family::table:
      out << sign << "table(" << (source_.empty() ? "inline" : source_) << ")";
      break;
  }
  return out.str();
}

void CurvatureProfile::compute_decay_radius() {
  if (family_ == Family::flat) {
    decay_radius_ = 0.0;
    return;
  }
  if (family_ == Family::table) {
    decay_radius_ = 0.0;
    const auto& s = table_.nodes();
    const auto& v = table_.values();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (std::abs(v[i]) > decay_tol_) decay_radius_ = s[i];
    }
    if (std::abs(v.back()) > decay_tol_) decay_radius_ = std::numeric_limits<double>::infinity();
    return;
  }
  // Both closed-form families are dominated by exp(-x^2) (1 + 2x^2).
  decay_radius_ = 0.0;
  const double step = width_ / 20.0;
  for (double s = 0.0; s <= 200.0 * width_; s += step) {
    if (std::abs(ks(s)) > decay_tol_) decay_radius_ = s + step;
  }
}

MeridianCurve::MeridianCurve(CurvatureProfile profile, std::vector<double> s,
                             std::vector<double> b, std::vector<double> r, std::vector<double> z)
    : profile_(std::move(profile)), s_(std::move(s)), b_(std::move(b)), r_(std::move(r)),
      z_(std::move(z)) {
  if (s_.size() < 2) throw DomainError("MeridianCurve needs at least two nodes");
  step_ = (s_.back() - s_.front()) / static_cast<double>(s_.size() - 1);
}

double MeridianCurve::r_prime(std::size_t i) const { return std::cos(b_[i]); }
double MeridianCurve::z_prime(std::size_t i) const { return std::sin(b_[i]); }

namespace {

double k_theta_of(double s, double b, double r, double ks0) {
  if (s == 0.0 || r == 0.0) return ks0;
  return std::sin(b) / r;
}

}  // namespace

MeridianPoint MeridianCurve::node(std::size_t i) const {
  MeridianPoint p;
  p.s = s_[i];
  p.r = r_[i];
  p.z = z_[i];
  p.b = b_[i];
  p.r_prime = std::cos(b_[i]);
  p.z_prime = std::sin(b_[i]);
  p.k_s = profile_.ks(s_[i]);
  p.k_theta = k_theta_of(p.s, p.b, p.r, profile_.ks(0.0));
  return p;
}

MeridianPoint MeridianCurve::at(double s) const {
  const double slack = 1e-12 * std::max(1.0, s_max());
  if (!(s >= -slack && s <= s_max() + slack)) {
    std::ostringstream msg;
    msg << "meridian evaluated at s = " << s << " outside [0, " << s_max() << "]";
    throw DomainError(msg.str());
  }
  s = std::clamp(s, 0.0, s_max());
  std::size_t i = static_cast<std::size_t>(std::floor(s / step_));
  i = std::min(i, s_.size() - 1);
  const double delta = s - s_[i];
  if (delta <= 0.0) return node(i);
  // Classical RK4 for (b, r, z) written out; b' does not depend on the state.
  const double t0 = s_[i];
  const double kb1 = profile_.ks(t0);
  const double kb2 = profile_.ks(t0 + 0.5 * delta);
  const double kb4 = profile_.ks(t0 + delta);
  const double b0 = b_[i];
  const double b2 = b0 + 0.5 * delta * kb1;
  const double b3 = b0 + 0.5 * delta * kb2;
  const double b4 = b0 + delta * kb2;
  double y[3];
  y[0] = b0 + delta / 6.0 * (kb1 + 4.0 * kb2 + kb4);
  y[1] = r_[i] + delta / 6.0 *
                     (std::cos(b0) + 2.0 * std::cos(b2) + 2.0 * std::cos(b3) + std::cos(b4));
  y[2] = z_[i] + delta / 6.0 *
                     (std::sin(b0) + 2.0 * std::sin(b2) + 2.0 * std::sin(b3) + std::sin(b4));
  MeridianPoint p;
  p.s = s;
  p.b = y[0];
  p.r = y[1];
  p.z = y[2];
  p.r_prime = std::cos(p.b);
  p.z_prime = std::sin(p.b);
  p.k_s = profile_.ks(s);
  p.k_theta = k_theta_of(s, p.b, p.r, profile_.ks(0.0));
  return p;
}

SampledFunction MeridianCurve::r_function() const {
  std::vector<double> slopes(s_.size());
  for (std::size_t i = 0; i < s_.size(); ++i) slopes[i] = std::cos(b_[i]);
  return SampledFunction(s_, r_, std::move(slopes));
}

MeridianCurve build_meridian(const CurvatureProfile& profile, double s_max, double h) {
  if (!(s_max > 0.0) || !(h > 0.0)) throw DomainError("build_meridian: S_max and h must be positive");
  if (profile.family() == CurvatureProfile::Family::table &&
      s_max > profile.samples().hi() * (1.0 + 1e-12)) {
    throw DomainError("build_meridian: table profile does not cover [0, S_max]");
  }
  const auto n = static_cast<std::size_t>(std::ceil(s_max / h - 1e-9));
  const std::size_t nodes = std::max<std::size_t>(n, 2) + 1;
  std::vector<double> grid(nodes);
  const double step = s_max / static_cast<double>(nodes - 1);
  for (std::size_t i = 0; i < nodes; ++i) grid[i] = step * static_cast<double>(i);
  grid.back() = s_max;

  const numerics::OdeRhs rhs = [&profile](double t, std::span<const double> y,
                                          std::span<double> dy) {
    const double k = profile.ks(t);
    if (!std::isfinite(k)) throw DomainError("curvature profile is not finite");
    dy[0] = k;
    dy[1] = std::cos(y[0]);
    dy[2] = std::sin(y[0]);
  };
  const double y0[3] = {0.0, 0.0, 0.0};
  auto solution = numerics::solve_ivp(rhs, y0, grid);

  std::vector<double> b = solution[0].values();
  std::vector<double> r = solution[1].values();
  std::vector<double> z = solution[2].values();
  for (std::size_t i = 1; i < nodes; ++i) {
    if (!(r[i] > 0.0)) {
      std::ostringstream msg;
      msg << "meridian degenerates: r = " << r[i] << " at node " << i << " (s = " << grid[i]
          << ")";
      throw GeometryError(msg.str(), i);
    }
  }
  return MeridianCurve(profile, std::move(grid), std::move(b), std::move(r), std::move(z));
}

CurvaturePair principal_curvatures(const MeridianCurve& curve) {
  const std::size_t n = curve.size();
  std::vector<double> ks(n);
  std::vector<double> kt(n);
  const double floor = 1e-300;
  for (std::size_t i = 0; i < n; ++i) {
    const MeridianPoint p = curve.node(i);
    if (i > 0 && !(p.r > floor)) {
      std::ostringstream msg;
      msg << "degenerate curve: r = " << p.r << " at s = " << p.s;
      throw GeometryError(msg.str(), i);
    }
    ks[i] = p.k_s;
    kt[i] = p.k_theta;
  }
  CurvaturePair pair;
  for (std::size_t i = 0; i < n; ++i) {
    pair.k_s_sup = std::max(pair.k_s_sup, std::abs(ks[i]));
    pair.k_theta_sup = std::max(pair.k_theta_sup, std::abs(kt[i]));
  }
  pair.k_s = SampledFunction(curve.s(), std::move(ks));
  pair.k_theta = SampledFunction(curve.s(), std::move(kt));
  return pair;
}

JacobiResidual jacobi_residual(const MeridianCurve& curve, const CurvaturePair& pair,
                               double tolerance) {
  JacobiResidual out;
  const auto& r = curve.r();
  const auto& s = curve.s();
  const double h = curve.step();
  const auto& ks = pair.k_s.values();
  const auto& kt = pair.k_theta.values();
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    const double rpp = (r[i + 1] - 2.0 * r[i] + r[i - 1]) / (h * h);
    const double res = std::abs(rpp + ks[i] * kt[i] * r[i]);
    if (res > out.max_residual) {
      out.max_residual = res;
      out.at_s = s[i];
    }
  }
  const double k = std::max(pair.k_s_sup, pair.k_theta_sup);
  out.tolerance = tolerance >= 0.0 ? tolerance : 50.0 * h * h * (1.0 + k * k);
  out.within_tolerance = out.max_residual <= out.tolerance;
  return out;
}

FlatnessReport asymptotic_flatness(const MeridianCurve& curve, const CurvaturePair& pair,
                                   const FlatnessOptions& options) {
  FlatnessReport report;
  report.tolerance = options.tolerance;
  report.window_hi = curve.s_max();
  report.window_lo = options.window_fraction * curve.s_max();
  const auto& s = curve.s();
  const auto& ks = pair.k_s.values();
  const auto& kt = pair.k_theta.values();
  std::vector<double> lx;
  std::vector<double> ly;
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < report.window_lo || s[i] <= 0.0) continue;
    ++count;
    const double g = std::max(std::abs(ks[i]), std::abs(kt[i]));
    report.tail_value = std::max(report.tail_value, g);
    if (g > 1e-280) {
      lx.push_back(std::log(s[i]));
      ly.push_back(std::log(g));
    }
  }
  if (count < options.min_nodes) {
    report.verdict = Verdict::inconclusive;
    report.note = "window too short";
    return report;
  }
  if (lx.size() < 4) {
    report.decay_rate = std::numeric_limits<double>::infinity();
    report.verdict = Verdict::pass;
    report.note = "curvature negligible on the window";
    return report;
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  report.decay_rate = sxx > 0.0 ? -sxy / sxx : 0.0;
  const bool small = report.tail_value <= options.tolerance;
  const bool decreasing = report.decay_rate > 0.1;
  report.verdict = small && decreasing ? Verdict::pass : Verdict::fail;
  if (!small) report.note = "curvature above flatness tolerance on the window";
  if (!decreasing) report.note = "curvature does not decay on the window";
  return report;
}

double rho_m(const CurvaturePair& pair) {
  const double k = std::max(pair.k_s_sup, pair.k_theta_sup);
  if (k == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / k;
}

void write_meridian_csv(std::ostream& out, const MeridianCurve& curve, const CurvaturePair& pair) {
  out << "s,r,z,r_prime,z_prime,b,k_s,k_theta\n";
  out << std::setprecision(17);
  const auto& ks = pair.k_s.values();
  const auto& kt = pair.k_theta.values();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << curve.s()[i] << ',' << curve.r()[i] << ',' << curve.z()[i] << ',' << curve.r_prime(i)
        << ',' << curve.z_prime(i) << ',' << curve.b()[i] << ',' << ks[i] << ',' << kt[i] << '\n';
  }
}

}  // namespace layerspectra
