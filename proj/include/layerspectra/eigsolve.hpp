#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "layerspectra/layer.hpp"

namespace layerspectra {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Tensor grid on [0, s_max] x [-a, a]: n_s and n_u nodes, uniform per axis.
// Dirichlet at u = +-a and s = s_max; natural at s = 0 (l = 0).
struct StripMesh {
  double s_max = 0.0;
  double a = 0.0;
  std::size_t n_s = 0;
  std::size_t n_u = 0;

  double h_s() const { return s_max / static_cast<double>(n_s - 1); }
  double h_u() const { return 2.0 * a / static_cast<double>(n_u - 1); }
  std::string id() const;
};

StripMesh make_mesh(double s_max, double a, std::size_t n_s, std::size_t n_u);

// Bilinear elements with 3x3 Gauss quadrature on every cell:
//   K = int [psi_s^2 (1-u k_s)^-2 + psi_u^2 + mu_l psi^2 (1-u k_theta)^-2 r^-2] w
//   M = int psi^2 w,   w = (1-u k_s)(1-u k_theta)^(m-2) r^(m-2),
// mu_l = l (l + m - 3). Unknowns are ordered u fastest.
struct DiscreteForm {
  SparseMatrix K;
  SparseMatrix M;
  StripMesh mesh;
  int l = 0;
  double mu = 0.0;
  std::size_t first_s_node = 0;  // 0 for l = 0, 1 otherwise
  std::size_t u_unknowns = 0;

  std::size_t size() const { return static_cast<std::size_t>(K.rows()); }
  // Node coordinates of an unknown.
  double s_of(std::size_t dof) const;
  double u_of(std::size_t dof) const;
};

DiscreteForm assemble(const LayerSpec& layer, const StripMesh& mesh, int l = 0);

struct Spectrum {
  std::vector<double> values;     // ascending
  Eigen::MatrixXd vectors;        // M-orthonormal columns
  std::vector<double> residuals;  // ||K x - lambda M x|| / ||M x||
  std::vector<bool> converged;
  bool inertia_ok = false;  // eigenvalue count below the last value confirmed
  int restarts = 0;
  double shift = 0.0;
  std::string note;
};

struct EigOptions {
  double tol = 1e-10;
  std::uint64_t seed = 12345;
  int krylov_dim = 60;
  int max_restarts = 60;
};

// The `count` smallest eigenpairs of K x = lambda M x by shift-invert Lanczos
// with full reorthogonalization, locking and explicit restarts.
Spectrum smallest_eigs(const SparseMatrix& K, const SparseMatrix& M, int count,
                       const EigOptions& options = {});
Spectrum smallest_eigs(const DiscreteForm& form, int count, const EigOptions& options = {});

struct MeshLevel {
  std::string mesh_id;
  double s_max = 0.0;
  double h_s = 0.0;
  double h_u = 0.0;
  std::size_t dofs = 0;
  std::vector<double> values;
  std::vector<double> residuals;
  bool inertia_ok = false;
};

struct ConvergenceOptions {
  int levels = 3;
  std::size_t base_u_cells = 8;
  double base_h_s = 0.0;  // <= 0: min(a, length scale) / 2
  std::vector<double> truncations;  // default {S/2, S}
  int l = 0;
  int count = 3;
  EigOptions eig;
};

struct ConvergenceStudy {
  int l = 0;
  double threshold = 0.0;
  std::vector<MeshLevel> ladder;      // coarse to fine at the largest truncation
  std::vector<MeshLevel> truncation;  // finest spacing, increasing truncation
  double observed_order = 0.0;
  std::vector<double> extrapolated;    // per eigenvalue index
  std::vector<double> uncertainty;     // discretization + truncation
  double discretization_error = 0.0;  // for lambda_1
  double truncation_sensitivity = 0.0;
  bool monotone = false;
  bool conclusive = false;
  std::string note;

  double lambda1() const { return extrapolated.empty() ? 0.0 : extrapolated.front(); }
  double lambda1_uncertainty() const { return uncertainty.empty() ? 0.0 : uncertainty.front(); }
};

ConvergenceStudy convergence_study(const LayerSpec& layer, const ConvergenceOptions& options = {});

struct BoundStateCount {
  int count = 0;
  bool conclusive = false;
  double margin = 0.0;
  double uncertainty = 0.0;
  std::string note;
};

// Eigenvalues at or below (pi/2a)^2 - margin. Inconclusive when the margin
// does not cover the numerical uncertainty.
BoundStateCount bound_state_count(const std::vector<double>& values, double uncertainty,
                                  double a, double margin);
BoundStateCount bound_state_count(const ConvergenceStudy& study, double a, double margin);

}  // namespace layerspectra
