#include "layerspectra/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace layerspectra::numerics {

namespace {

// d/dx of the Lagrange interpolant through (xs, ys) evaluated at xs[at].
double lagrange_slope(std::span<const double> xs, std::span<const double> ys, std::size_t at) {
  const std::size_t n = xs.size();
  double slope = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == at) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != at) acc += 1.0 / (xs[at] - xs[k]);
      }
      slope += ys[j] * acc;
    } else {
      double num = 1.0;
      double den = 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != j) den *= xs[j] - xs[k];
        if (k != j && k != at) num *= xs[at] - xs[k];
      }
      slope += ys[j] * num / den;
    }
  }
  return slope;
}

std::vector<double> estimate_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> slopes(n, 0.0);
  if (n < 2) return slopes;
  const std::size_t width = std::min<std::size_t>(5, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t start = i >= width / 2 ? i - width / 2 : 0;
    if (start + width > n) start = n - width;
    slopes[i] = lagrange_slope(std::span<const double>(x).subspan(start, width),
                               std::span<const double>(y).subspan(start, width), i - start);
  }
  return slopes;
}

void check_grid(const std::vector<double>& nodes, const std::vector<double>& values) {
  if (nodes.size() < 2 || nodes.size() != values.size()) {
    throw DomainError("SampledFunction needs at least two nodes and matching values");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!std::isfinite(nodes[i]) || !std::isfinite(values[i])) {
      throw DomainError("SampledFunction: non-finite node or value");
    }
    if (i > 0 && !(nodes[i] > nodes[i - 1])) {
      throw DomainError("SampledFunction: nodes must be strictly increasing");
    }
  }
}

GaussRule compute_gauss_rule(int n) {
  GaussRule rule;
  if (n == 1) return {{0.0}, {2.0}};
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

struct Panel {
  double lo;
  double hi;
  double whole;
  double left;
  double right;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

double gauss15(const Integrand& f, double lo, double hi) {
  const GaussRule& rule = gauss_legendre(15);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return acc * half;
}

Panel make_panel(const Integrand& f, double lo, double hi, double whole) {
  const double mid = 0.5 * (lo + hi);
  Panel p{lo, hi, whole, gauss15(f, lo, mid), gauss15(f, mid, hi), 0.0};
  p.error = std::abs(p.whole - (p.left + p.right));
  if (!std::isfinite(p.left + p.right)) {
    std::ostringstream msg;
    msg << "integrate: non-finite integrand on [" << lo << ", " << hi << "]";
    throw DomainError(msg.str());
  }
  return p;
}

}  // namespace

SampledFunction::SampledFunction(std::vector<double> nodes, std::vector<double> values,
                                 Interpolation interpolation)
    : nodes_(std::move(nodes)), values_(std::move(values)), interpolation_(interpolation) {
  check_grid(nodes_, values_);
  if (interpolation_ == Interpolation::cubic) slopes_ = estimate_slopes(nodes_, values_);
}

SampledFunction::SampledFunction(std::vector<double> nodes, std::vector<double> values,
                                 std::vector<double> slopes)
    : nodes_(std::move(nodes)),
      values_(std::move(values)),
      slopes_(std::move(slopes)),
      interpolation_(Interpolation::cubic) {
  check_grid(nodes_, values_);
  if (slopes_.size() != nodes_.size()) throw DomainError("SampledFunction: slope count mismatch");
}

std::size_t SampledFunction::locate(double x) const {
  const double span = nodes_.back() - nodes_.front();
  const double slack = 1e-12 * std::max(1.0, span);
  if (!(x >= nodes_.front() - slack && x <= nodes_.back() + slack)) {
    std::ostringstream msg;
    msg << "SampledFunction evaluated at " << x << " outside [" << nodes_.front() << ", "
        << nodes_.back() << "]";
    throw DomainError(msg.str());
  }
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  std::size_t i = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return std::min(i, nodes_.size() - 2);
}

double SampledFunction::operator()(double x) const {
  const std::size_t i = locate(x);
  const double h = nodes_[i + 1] - nodes_[i];
  const double t = (x - nodes_[i]) / h;
  if (interpolation_ == Interpolation::linear) {
    return values_[i] + t * (values_[i + 1] - values_[i]);
  }
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * values_[i] + h10 * h * slopes_[i] + h01 * values_[i + 1] + h11 * h * slopes_[i + 1];
}

double SampledFunction::derivative(double x) const {
  const std::size_t i = locate(x);
  const double h = nodes_[i + 1] - nodes_[i];
  const double t = (x - nodes_[i]) / h;
  if (interpolation_ == Interpolation::linear) return (values_[i + 1] - values_[i]) / h;
  const double t2 = t * t;
  const double d00 = (6 * t2 - 6 * t) / h;
  const double d10 = 3 * t2 - 4 * t + 1;
  const double d01 = (-6 * t2 + 6 * t) / h;
  const double d11 = 3 * t2 - 2 * t;
  return d00 * values_[i] + d10 * slopes_[i] + d01 * values_[i + 1] + d11 * slopes_[i + 1];
}

double SampledFunction::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

const GaussRule& gauss_legendre(int n) {
  static const std::array<GaussRule, 65> rules = [] {
    std::array<GaussRule, 65> out{};
    for (int k = 1; k <= 64; ++k) out[k] = compute_gauss_rule(k);
    return out;
  }();
  if (n < 1 || n > 64) throw DomainError("gauss_legendre: order must lie in [1, 64]");
  return rules[n];
}

QuadratureResult integrate(const Integrand& f, std::span<const double> breakpoints,
                           const QuadratureOptions& options) {
  if (breakpoints.size() < 2) throw DomainError("integrate: need at least two breakpoints");
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) {
      throw DomainError("integrate: breakpoints must be strictly increasing");
    }
  }
  std::priority_queue<Panel> queue;
  double value = 0.0;
  double error = 0.0;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    Panel p = make_panel(f, breakpoints[i - 1], breakpoints[i],
                         gauss15(f, breakpoints[i - 1], breakpoints[i]));
    value += p.left + p.right;
    error += p.error;
    queue.push(p);
  }
  int panels = static_cast<int>(queue.size());
  auto converged = [&] {
    return error <= options.rel_tol * std::abs(value) + options.abs_floor;
  };
  while (!converged()) {
    if (panels >= options.max_panels) {
      throw ConvergenceError("integrate: no convergence within panel budget", value, error);
    }
    Panel worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      throw ConvergenceError("integrate: panel width below resolution", value, error);
    }
    Panel a = make_panel(f, worst.lo, mid, worst.left);
    Panel b = make_panel(f, mid, worst.hi, worst.right);
    value += (a.left + a.right + b.left + b.right) - (worst.left + worst.right);
    error += a.error + b.error - worst.error;
    queue.push(a);
    queue.push(b);
    ++panels;
  }
  // Recompute the sums to shed accumulated round-off from the running updates.
  value = 0.0;
  error = 0.0;
  while (!queue.empty()) {
    value += queue.top().left + queue.top().right;
    error += queue.top().error;
    queue.pop();
  }
  return {value, error, panels};
}

QuadratureResult integrate(const Integrand& f, double lo, double hi,
                           const QuadratureOptions& options) {
  if (lo == hi) return {};
  if (!(lo < hi)) throw DomainError("integrate: requires lo < hi");
  const std::array<double, 2> bp{lo, hi};
  return integrate(f, std::span<const double>(bp), options);
}

void rk4_step(const OdeRhs& rhs, double s, double h, std::span<const double> y,
              std::span<double> out) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  rhs(s, y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  rhs(s + 0.5 * h, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  rhs(s + 0.5 * h, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  rhs(s + h, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

std::vector<SampledFunction> solve_ivp(const OdeRhs& rhs, std::span<const double> y0,
                                       std::span<const double> grid) {
  const std::size_t dim = y0.size();
  const std::size_t n = grid.size();
  if (n < 2) throw DomainError("solve_ivp: grid needs at least two nodes");
  std::vector<std::vector<double>> values(dim, std::vector<double>(n));
  std::vector<std::vector<double>> slopes(dim, std::vector<double>(n));
  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> next(dim);
  std::vector<double> dy(dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      rk4_step(rhs, grid[i - 1], grid[i] - grid[i - 1], y, next);
      y.swap(next);
    }
    rhs(grid[i], y, dy);
    for (std::size_t c = 0; c < dim; ++c) {
      if (!std::isfinite(y[c]) || !std::isfinite(dy[c])) {
        std::ostringstream msg;
        msg << "solve_ivp: state blew up at s = " << grid[i];
        throw IntegrationBlowup(msg.str(), i == 0 ? 0 : i - 1);
      }
      values[c][i] = y[c];
      slopes[c][i] = dy[c];
    }
  }
  std::vector<SampledFunction> out;
  out.reserve(dim);
  std::vector<double> nodes(grid.begin(), grid.end());
  for (std::size_t c = 0; c < dim; ++c) {
    out.emplace_back(nodes, std::move(values[c]), std::move(slopes[c]));
  }
  return out;
}

TailVerdict TailModel::verdict() const {
  switch (kind) {
    case TailKind::negligible:
    case TailKind::analytic_bound:
      return TailVerdict::convergent;
    case TailKind::power_law:
      if (power_lo > 1.0) return TailVerdict::convergent;
      if (power_hi <= 1.0) return TailVerdict::divergent;
      return TailVerdict::inconclusive;
  }
  return TailVerdict::inconclusive;
}

namespace {

struct LineFit {
  double slope = 0.0;
  double rms = 0.0;
  bool ok = false;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit fit;
  const std::size_t n = x.size();
  if (n < 2) return fit;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (my + fit.slope * (x[i] - mx));
    ss += r * r;
  }
  fit.rms = std::sqrt(ss / n);
  fit.ok = true;
  return fit;
}

constexpr double kNegligible = 1e-280;
constexpr double kRoundoffFloor = 1e-13;

}  // namespace

TailModel fit_power_tail(const SampledFunction& f) {
  TailModel model;
  const auto& t = f.nodes();
  const auto& v = f.values();
  const double hi = f.hi();
  model.window_hi = hi;
  model.window_lo = std::max(f.lo(), hi / 10.0);
  if (model.window_lo <= 0.0) model.window_lo = 0.5 * hi;
  const double end_value = v.back();
  model.sign = end_value < 0.0 ? -1.0 : 1.0;

  std::vector<double> lx;
  std::vector<double> ly;
  double window_max = 0.0;
  double late_bound = 0.0;
  const double mid = std::sqrt(model.window_lo * model.window_hi);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < model.window_lo || t[i] <= 0.0) continue;
    const double a = std::abs(v[i]);
    window_max = std::max(window_max, a);
    if (t[i] >= mid) late_bound = std::max(late_bound, a * t[i]);
    if (a > kNegligible) {
      lx.push_back(std::log(t[i]));
      ly.push_back(std::log(a));
    }
  }
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  // Once the end of the window sits at round-off level relative to the peak the
  // samples carry no tail signal, even if the start of the window still does.
  if (std::abs(end_value) <= kNegligible || lx.size() < 4 ||
      std::abs(end_value) < 1e-200 * std::max(window_max, kNegligible) ||
      std::abs(end_value) <= kRoundoffFloor * peak) {
    model.kind = TailKind::negligible;
    model.analytic_error = late_bound;
    return model;
  }
  const LineFit all = fit_line(lx, ly);
  const double split = 0.5 * (lx.front() + lx.back());
  std::vector<double> x1, y1, x2, y2;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    if (lx[i] <= split) {
      x1.push_back(lx[i]);
      y1.push_back(ly[i]);
    }
    if (lx[i] >= split) {
      x2.push_back(lx[i]);
      y2.push_back(ly[i]);
    }
  }
  const LineFit first = fit_line(x1, y1);
  const LineFit second = fit_line(x2, y2);
  model.kind = TailKind::power_law;
  model.power = -all.slope;
  model.power_lo = model.power;
  model.power_hi = model.power;
  for (const LineFit* part : {&first, &second}) {
    if (!part->ok) continue;
    model.power_lo = std::min(model.power_lo, -part->slope);
    model.power_hi = std::max(model.power_hi, -part->slope);
  }
  model.fit_residual = all.rms;
  model.coefficient = std::abs(end_value) * std::pow(hi, model.power);
  return model;
}

TailModel analytic_tail(double tail_value, double tail_error) {
  TailModel model;
  model.kind = TailKind::analytic_bound;
  model.analytic_tail = tail_value;
  model.analytic_error = std::abs(tail_error);
  return model;
}

namespace {

double cubic_integral(const SampledFunction& f) {
  const auto& x = f.nodes();
  const GaussRule& rule = gauss_legendre(2);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double half = 0.5 * (x[i + 1] - x[i]);
    const double mid = 0.5 * (x[i + 1] + x[i]);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      acc += half * rule.weights[q] * f(mid + half * rule.nodes[q]);
    }
  }
  return acc;
}

}  // namespace

TailIntegral tail_integral(const SampledFunction& f, const TailModel& model) {
  TailIntegral out;
  out.finite_part = cubic_integral(f);
  if (f.size() >= 9 && f.interpolation() == Interpolation::cubic) {
    std::vector<double> xc;
    std::vector<double> yc;
    for (std::size_t i = 0; i < f.size(); i += 2) {
      xc.push_back(f.nodes()[i]);
      yc.push_back(f.values()[i]);
    }
    if (xc.back() != f.hi()) {
      xc.push_back(f.hi());
      yc.push_back(f.values().back());
    }
    const SampledFunction coarse(std::move(xc), std::move(yc));
    // The full step-doubling difference, not the /15 Richardson estimate: the
    // one-sided end slopes spoil the asymptotic ratio on short grids.
    out.finite_error = std::abs(cubic_integral(coarse) - out.finite_part);
  }
  out.finite_error += 1e-15 * std::abs(out.finite_part);

  out.verdict = model.verdict();
  switch (model.kind) {
    case TailKind::negligible:
      out.tail = 0.0;
      out.tail_error = model.analytic_error;
      break;
    case TailKind::analytic_bound:
      out.tail = model.analytic_tail;
      out.tail_error = model.analytic_error;
      break;
    case TailKind::power_law: {
      if (out.verdict != TailVerdict::convergent) {
        out.tail = std::numeric_limits<double>::infinity();
        out.tail_error = std::numeric_limits<double>::infinity();
        break;
      }
      const double end = std::abs(f.values().back()) * f.hi();
      auto tail_for = [&](double p) { return model.sign * end / (p - 1.0); };
      out.tail = tail_for(model.power);
      out.tail_error = std::max(std::abs(tail_for(model.power_lo) - out.tail),
                                std::abs(tail_for(model.power_hi) - out.tail)) +
                       std::abs(out.tail) * model.fit_residual;
      break;
    }
  }
  return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

}  // namespace layerspectra::numerics
