#include "layerspectra/eigsolve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

namespace layerspectra {

using numerics::kPi;

std::string StripMesh::id() const {
  std::ostringstream out;
  out << "S" << s_max << "_ns" << n_s << "_nu" << n_u;
  return out.str();
}

StripMesh make_mesh(double s_max, double a, std::size_t n_s, std::size_t n_u) {
  if (!(s_max > 0.0) || !(a > 0.0)) throw DomainError("make_mesh: s_max and a must be positive");
  if (n_s < 8 || n_u < 8) throw DomainError("make_mesh: at least 8 nodes per axis");
  return StripMesh{s_max, a, n_s, n_u};
}

double DiscreteForm::s_of(std::size_t dof) const {
  return static_cast<double>(first_s_node + dof / u_unknowns) * mesh.h_s();
}

double DiscreteForm::u_of(std::size_t dof) const {
  return -mesh.a + static_cast<double>(1 + dof % u_unknowns) * mesh.h_u();
}

DiscreteForm assemble(const LayerSpec& layer, const StripMesh& mesh, int l) {
  if (l < 0) throw DomainError("assemble: angular mode must be nonnegative");
  if (std::abs(mesh.a - layer.a) > 1e-14 * layer.a) {
    throw DomainError("assemble: mesh half-width differs from the layer");
  }
  DiscreteForm form;
  form.mesh = mesh;
  form.l = l;
  form.mu = static_cast<double>(l) * (l + layer.m - 3);
  form.first_s_node = l == 0 ? 0 : 1;
  form.u_unknowns = mesh.n_u - 2;
  const std::size_t s_unknowns = mesh.n_s - 1 - form.first_s_node;
  const std::size_t n = s_unknowns * form.u_unknowns;

  const double hs = mesh.h_s();
  const double hu = mesh.h_u();
  const LayerGeometry geometry(layer);
  const numerics::GaussRule& rule = numerics::gauss_legendre(3);
  std::array<double, 3> xi{};
  std::array<double, 3> wq{};
  for (int q = 0; q < 3; ++q) {
    xi[q] = 0.5 * (rule.nodes[q] + 1.0);
    wq[q] = 0.5 * rule.weights[q];
  }
  auto dof = [&](std::size_t i, std::size_t j) -> long {
    if (i < form.first_s_node || i >= mesh.n_s - 1 || j == 0 || j >= mesh.n_u - 1) return -1;
    return static_cast<long>((i - form.first_s_node) * form.u_unknowns + (j - 1));
  };

  std::vector<Eigen::Triplet<double>> kt;
  std::vector<Eigen::Triplet<double>> mt;
  kt.reserve(16 * (mesh.n_s - 1) * (mesh.n_u - 1));
  mt.reserve(16 * (mesh.n_s - 1) * (mesh.n_u - 1));
  for (std::size_t ci = 0; ci + 1 < mesh.n_s; ++ci) {
    std::array<LayerPoint, 3> pts;
    for (int q = 0; q < 3; ++q) pts[q] = geometry((static_cast<double>(ci) + xi[q]) * hs);
    for (std::size_t cj = 0; cj + 1 < mesh.n_u; ++cj) {
      double Ke[4][4] = {};
      double Me[4][4] = {};
      for (int qs = 0; qs < 3; ++qs) {
        const LayerPoint& p = pts[qs];
        for (int qu = 0; qu < 3; ++qu) {
          const double u = -mesh.a + (static_cast<double>(cj) + xi[qu]) * hu;
          const double ts = 1.0 - u * p.k_s;
          const double tt = 1.0 - u * p.k_theta;
          const double w = ts * std::pow(tt, layer.m - 2) * std::pow(p.r, layer.m - 2);
          if (!(w > 0.0)) {
            std::ostringstream msg;
            msg << "nonpositive volume weight " << w << " at (s, u) = ("
                << (static_cast<double>(ci) + xi[qs]) * hs << ", " << u << ")";
            throw AdmissibilityError(msg.str());
          }
          const double dv = wq[qs] * wq[qu] * hs * hu * w;
          const double gss = 1.0 / (ts * ts);
          const double ang = form.mu / (tt * tt * p.r * p.r);
          const double x = xi[qs];
          const double y = xi[qu];
          // local nodes: 0 (i, j), 1 (i+1, j), 2 (i, j+1), 3 (i+1, j+1)
          const double N[4] = {(1 - x) * (1 - y), x * (1 - y), (1 - x) * y, x * y};
          const double Ns[4] = {-(1 - y) / hs, (1 - y) / hs, -y / hs, y / hs};
          const double Nu[4] = {-(1 - x) / hu, -x / hu, (1 - x) / hu, x / hu};
          for (int A = 0; A < 4; ++A) {
            for (int B = A; B < 4; ++B) {
              Ke[A][B] += (Ns[A] * Ns[B] * gss + Nu[A] * Nu[B] + ang * N[A] * N[B]) * dv;
              Me[A][B] += N[A] * N[B] * dv;
            }
          }
        }
      }
      const long ids[4] = {dof(ci, cj), dof(ci + 1, cj), dof(ci, cj + 1), dof(ci + 1, cj + 1)};
      for (int A = 0; A < 4; ++A) {
        if (ids[A] < 0) continue;
        for (int B = 0; B < 4; ++B) {
          if (ids[B] < 0) continue;
          const int lo = std::min(A, B);
          const int hi = std::max(A, B);
          kt.emplace_back(ids[A], ids[B], Ke[lo][hi]);
          mt.emplace_back(ids[A], ids[B], Me[lo][hi]);
        }
      }
    }
  }
  form.K.resize(static_cast<long>(n), static_cast<long>(n));
  form.M.resize(static_cast<long>(n), static_cast<long>(n));
  form.K.setFromTriplets(kt.begin(), kt.end());
  form.M.setFromTriplets(mt.begin(), mt.end());
  form.K.makeCompressed();
  form.M.makeCompressed();
  return form;
}

namespace {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ShiftedSolver {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  double sigma = 0.0;
  long negatives = 0;
  bool ok = false;

  void factor(const SparseMatrix& K, const SparseMatrix& M, double shift) {
    sigma = shift;
    const SparseMatrix A = K - shift * M;
    ldlt.compute(A);
    ok = ldlt.info() == Eigen::Success;
    negatives = 0;
    if (!ok) return;
    const Vector d = ldlt.vectorD();
    for (long i = 0; i < d.size(); ++i) {
      if (!std::isfinite(d[i]) || d[i] == 0.0) {
        ok = false;
        return;
      }
      if (d[i] < 0.0) ++negatives;
    }
  }
};

// Uniform [-1, 1) entries from the raw 64-bit stream, portable across libraries.
Vector start_vector(std::size_t n, std::mt19937_64& rng) {
  Vector v(static_cast<long>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v[static_cast<long>(i)] = 2.0 * unit - 1.0;
  }
  return v;
}

double residual_of(const SparseMatrix& K, const SparseMatrix& M, const Vector& x, double lambda) {
  const Vector Mx = M * x;
  const Vector r = K * x - lambda * Mx;
  const double scale = Mx.norm();
  return scale > 0.0 ? r.norm() / scale : std::numeric_limits<double>::infinity();
}

struct LanczosState {
  Matrix X;   // locked vectors
  Matrix MX;  // M times locked vectors
  std::vector<double> values;
  int restarts = 0;
};

void orthogonalize(Vector& w, const Matrix& V, const Matrix& MV, long cols) {
  if (cols == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const Vector c = MV.leftCols(cols).transpose() * w;
    w -= V.leftCols(cols) * c;
  }
}

// Shift-invert Lanczos in the M inner product; locks converged pairs into state.
void lanczos(const SparseMatrix& K, const SparseMatrix& M, const ShiftedSolver& solver, int count,
             const EigOptions& options, std::mt19937_64& rng, LanczosState& state,
             bool single_pass) {
  const long n = K.rows();
  const long m = std::min<long>(n - static_cast<long>(state.values.size()),
                                std::max<long>(options.krylov_dim, 2 * count + 10));
  Vector v = start_vector(static_cast<std::size_t>(n), rng);
  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    const long locked = static_cast<long>(state.values.size());
    if (locked >= count || m <= 0) return;
    orthogonalize(v, state.X, state.MX, locked);
    double norm = std::sqrt(v.dot(M * v));
    if (!(norm > 0.0)) v = start_vector(static_cast<std::size_t>(n), rng), norm = 1.0;
    Matrix V(n, m + 1);
    Matrix MV(n, m + 1);
    V.col(0) = v / norm;
    MV.col(0) = M * V.col(0);
    std::vector<double> alpha;
    std::vector<double> beta;
    long steps = 0;
    for (long k = 0; k < m; ++k) {
      Vector w = solver.ldlt.solve(MV.col(k));
      const double a = w.dot(MV.col(k));
      alpha.push_back(a);
      w -= a * V.col(k);
      if (k > 0) w -= beta.back() * V.col(k - 1);
      orthogonalize(w, state.X, state.MX, locked);
      orthogonalize(w, V, MV, k + 1);
      const Vector Mw = M * w;
      const double b = std::sqrt(std::max(0.0, w.dot(Mw)));
      steps = k + 1;
      if (k + 1 == m || b <= 1e-14 * std::abs(a)) break;
      beta.push_back(b);
      V.col(k + 1) = w / b;
      MV.col(k + 1) = Mw / b;
    }
    Matrix T = Matrix::Zero(steps, steps);
    for (long k = 0; k < steps; ++k) {
      T(k, k) = alpha[static_cast<std::size_t>(k)];
      if (k + 1 < steps) T(k, k + 1) = T(k + 1, k) = beta[static_cast<std::size_t>(k)];
    }
    Eigen::SelfAdjointEigenSolver<Matrix> tri(T);
    const long want = std::min<long>(count - locked, steps);
    Vector next = Vector::Zero(n);
    bool any_locked = false;
    for (long r = 0; r < want; ++r) {
      const long idx = steps - 1 - r;  // largest theta first
      const double theta = tri.eigenvalues()[idx];
      if (!(theta > 0.0)) continue;
      const double lambda = solver.sigma + 1.0 / theta;
      Vector y = V.leftCols(steps) * tri.eigenvectors().col(idx);
      const double yn = std::sqrt(y.dot(M * y));
      y /= yn;
      const double res = residual_of(K, M, y, lambda);
      if (res <= options.tol * std::max(1.0, std::abs(lambda))) {
        const long L = static_cast<long>(state.values.size());
        state.X.conservativeResize(n, L + 1);
        state.MX.conservativeResize(n, L + 1);
        state.X.col(L) = y;
        state.MX.col(L) = M * y;
        state.values.push_back(lambda);
        any_locked = true;
      } else {
        next += y;
      }
    }
    if (single_pass) {
      // Estimation pass: keep the top Ritz value even when not converged.
      if (state.values.empty() && steps > 0) {
        state.values.push_back(solver.sigma + 1.0 / tri.eigenvalues()[steps - 1]);
      }
      return;
    }
    ++state.restarts;
    if (next.norm() == 0.0 && !any_locked) next = start_vector(static_cast<std::size_t>(n), rng);
    v = next.norm() > 0.0 ? next : start_vector(static_cast<std::size_t>(n), rng);
  }
}

}  // namespace

Spectrum smallest_eigs(const SparseMatrix& K, const SparseMatrix& M, int count,
                       const EigOptions& options) {
  if (K.rows() != K.cols() || M.rows() != K.rows() || M.cols() != K.cols()) {
    throw DomainError("smallest_eigs: K and M must be square and of equal size");
  }
  const long n = K.rows();
  if (n == 0) throw DomainError("smallest_eigs: empty problem");
  count = static_cast<int>(std::min<long>(count, n));
  if (count <= 0) throw DomainError("smallest_eigs: count must be positive");
  Spectrum out;
  std::mt19937_64 rng(options.seed);
  std::ostringstream note;

  // Estimation pass at shift 0; its top Ritz value bounds lambda_1 from above.
  ShiftedSolver solver;
  solver.factor(K, M, 0.0);
  if (!solver.ok || solver.negatives > 0) {
    throw ConvergenceError("smallest_eigs: K is not positive definite", 0.0, 0.0);
  }
  LanczosState probe;
  lanczos(K, M, solver, 1, options, rng, probe, true);
  const double estimate = probe.values.empty() ? 0.0 : probe.values.front();

  // Shift just below lambda_1; the inertia of K - sigma M certifies "below".
  double delta = std::max(1e-3 * std::abs(estimate), 1e-12);
  double sigma = estimate - delta;
  for (int attempt = 0; attempt < 60; ++attempt) {
    solver.factor(K, M, sigma);
    if (solver.ok && solver.negatives == 0) break;
    delta *= 4.0;
    sigma = estimate - delta;
    if (sigma <= 0.0) {
      sigma = 0.0;
      solver.factor(K, M, sigma);
      break;
    }
  }
  if (!solver.ok) throw ConvergenceError("smallest_eigs: shifted factorization failed", 0.0, 0.0);
  out.shift = sigma;

  int target = count;
  LanczosState state;
  for (int round = 0; round < 2; ++round) {
    lanczos(K, M, solver, target, options, rng, state, false);
    if (state.values.empty()) break;
    // Rayleigh-Ritz on the locked space.
    const Matrix Ks = state.X.transpose() * (K * state.X);
    const Matrix Ms = state.X.transpose() * state.MX;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> rr(0.5 * (Ks + Ks.transpose()),
                                                        0.5 * (Ms + Ms.transpose()));
    state.X = state.X * rr.eigenvectors();
    state.MX = M * state.X;
    state.values.assign(rr.eigenvalues().data(), rr.eigenvalues().data() + rr.eigenvalues().size());
    // Inertia: the number of eigenvalues below the largest computed one.
    const double top = state.values.back();
    const double probe_shift = top + std::max(1e-9 * std::abs(top), 10.0 * options.tol * std::abs(top));
    ShiftedSolver check;
    check.factor(K, M, probe_shift);
    out.inertia_ok = check.ok && check.negatives == static_cast<long>(state.values.size());
    if (out.inertia_ok || !check.ok || check.negatives <= static_cast<long>(state.values.size())) {
      break;
    }
    note << "inertia found " << check.negatives << " eigenvalues below " << probe_shift
         << " but only " << state.values.size() << " were locked; widened the search. ";
    target = static_cast<int>(std::min<long>(check.negatives, n));
  }

  const long have = std::min<long>(count, static_cast<long>(state.values.size()));
  out.vectors = state.X.leftCols(have);
  for (long i = 0; i < have; ++i) {
    const Vector x = out.vectors.col(i);
    const double rq = x.dot(K * x) / x.dot(M * x);
    out.values.push_back(rq);
    const double res = residual_of(K, M, x, rq);
    out.residuals.push_back(res);
    out.converged.push_back(res <= options.tol * std::max(1.0, std::abs(rq)));
  }
  if (have < count) note << "only " << have << " of " << count << " pairs converged. ";
  out.restarts = state.restarts;
  out.note = note.str();
  return out;
}

Spectrum smallest_eigs(const DiscreteForm& form, int count, const EigOptions& options) {
  return smallest_eigs(form.K, form.M, count, options);
}

namespace {

MeshLevel solve_level(const LayerSpec& layer, double s_max, std::size_t s_cells,
                      std::size_t u_cells, const ConvergenceOptions& options) {
  const StripMesh mesh = make_mesh(s_max, layer.a, s_cells + 1, u_cells + 1);
  const DiscreteForm form = assemble(layer, mesh, options.l);
  const Spectrum spec = smallest_eigs(form, options.count, options.eig);
  MeshLevel level;
  level.mesh_id = mesh.id();
  level.s_max = s_max;
  level.h_s = mesh.h_s();
  level.h_u = mesh.h_u();
  level.dofs = form.size();
  level.values = spec.values;
  level.residuals = spec.residuals;
  level.inertia_ok = spec.inertia_ok;
  for (bool c : spec.converged) level.inertia_ok = level.inertia_ok && c;
  return level;
}

}  // namespace

ConvergenceStudy convergence_study(const LayerSpec& layer, const ConvergenceOptions& options) {
  if (options.levels < 3) throw DomainError("convergence_study: at least three mesh levels");
  ConvergenceStudy study;
  study.l = options.l;
  study.threshold = layer.threshold();
  std::vector<double> truncations = options.truncations;
  const double S = layer.curve.s_max();
  if (truncations.empty()) truncations = {0.5 * S, S};
  std::sort(truncations.begin(), truncations.end());
  if (truncations.size() < 2) throw DomainError("convergence_study: at least two truncations");
  const double S_big = truncations.back();

  double h0 = options.base_h_s;
  if (!(h0 > 0.0)) h0 = 0.5 * std::min(layer.a, layer.curve.profile().length_scale());
  const auto base_cells = static_cast<std::size_t>(std::max(7.0, std::ceil(S_big / h0 - 1e-9)));

  std::size_t finest_cells = base_cells;
  std::size_t finest_u = options.base_u_cells;
  for (int lvl = 0; lvl < options.levels; ++lvl) {
    const std::size_t scale = std::size_t{1} << lvl;
    finest_cells = base_cells * scale;
    finest_u = options.base_u_cells * scale;
    study.ladder.push_back(solve_level(layer, S_big, finest_cells, finest_u, options));
  }
  const double h_fine = S_big / static_cast<double>(finest_cells);
  for (double T : truncations) {
    if (T == S_big) {
      study.truncation.push_back(study.ladder.back());
      continue;
    }
    const auto cells = static_cast<std::size_t>(std::max(7.0, std::round(T / h_fine)));
    study.truncation.push_back(
        solve_level(layer, static_cast<double>(cells) * h_fine, cells, finest_u, options));
  }

  std::ostringstream note;
  study.monotone = true;
  bool solved = true;
  for (const auto& lvl : study.ladder) solved = solved && lvl.inertia_ok;
  for (const auto& lvl : study.truncation) solved = solved && lvl.inertia_ok;
  if (!solved) note << "some eigenpairs unconverged or inertia mismatch; ";

  std::size_t count = study.ladder.front().values.size();
  for (const auto& lvl : study.ladder) count = std::min(count, lvl.values.size());
  for (const auto& lvl : study.truncation) count = std::min(count, lvl.values.size());
  const std::size_t L = study.ladder.size();
  for (std::size_t i = 0; i < count; ++i) {
    const double l0 = study.ladder[L - 3].values[i];
    const double l1 = study.ladder[L - 2].values[i];
    const double l2 = study.ladder[L - 1].values[i];
    const double noise = 100.0 * options.eig.tol * std::max(1.0, std::abs(l2));
    const double d1 = l0 - l1;
    const double d2 = l1 - l2;
    bool mono = d1 >= -noise && d2 >= -noise;
    double p = 2.0;
    if (d1 > noise && d2 > noise) {
      p = std::log2(d1 / d2);
    }
    if (i == 0) study.observed_order = p;
    const double p_used = (p >= 1.0 && p <= 4.0) ? p : 2.0;
    if (i == 0 && p_used != p) note << "observed order " << p << " outside [1, 4]; used 2; ";
    const double extrap = l2 - std::max(d2, 0.0) / (std::pow(2.0, p_used) - 1.0);
    const double disc = std::abs(extrap - l2);
    double trunc = 0.0;
    for (std::size_t t = 0; t + 1 < study.truncation.size(); ++t) {
      const double lo_T = study.truncation[t].values[i];
      const double hi_T = study.truncation[t + 1].values[i];
      if (lo_T < hi_T - noise) mono = false;
      trunc = std::max(trunc, std::abs(lo_T - hi_T));
    }
    if (!mono) {
      study.monotone = false;
      note << "eigenvalue " << i + 1 << " not monotone under refinement or truncation; ";
    }
    study.extrapolated.push_back(extrap);
    study.uncertainty.push_back(disc + trunc);
    if (i == 0) {
      study.discretization_error = disc;
      study.truncation_sensitivity = trunc;
    }
  }
  study.conclusive = study.monotone && solved && count > 0;
  study.note = note.str();
  return study;
}

BoundStateCount bound_state_count(const std::vector<double>& values, double uncertainty, double a,
                                  double margin) {
  BoundStateCount out;
  const double threshold = (kPi / (2.0 * a)) * (kPi / (2.0 * a));
  out.margin = margin;
  out.uncertainty = uncertainty;
  for (double v : values) {
    if (v <= threshold - margin) ++out.count;
  }
  out.conclusive = margin >= uncertainty;
  if (!out.conclusive) out.note = "margin below the numerical uncertainty";
  return out;
}

BoundStateCount bound_state_count(const ConvergenceStudy& study, double a, double margin) {
  double unc = 0.0;
  for (double u : study.uncertainty) unc = std::max(unc, u);
  BoundStateCount out = bound_state_count(study.extrapolated, unc, a, margin);
  if (!study.conclusive) {
    out.conclusive = false;
    out.note += out.note.empty() ? "convergence study inconclusive" : "; convergence study inconclusive";
  }
  return out;
}

}  // namespace layerspectra
