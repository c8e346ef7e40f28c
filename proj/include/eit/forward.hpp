#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/SparseCholesky>

#include "eit/common.hpp"
#include "eit/mesh.hpp"

namespace eit {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Nodal conductivity on a mesh, every value finite and in [kLambda, 1/kLambda].
class ConductivityField {
 public:
  ConductivityField(const DiskMesh& mesh, Vector values);
  static ConductivityField constant(const DiskMesh& mesh, double value);

  const DiskMesh& mesh() const { return *mesh_; }
  const Vector& values() const { return values_; }
  /// Triangle average of the nodal values, one per element.
  std::vector<double> element_values() const;

 private:
  const DiskMesh* mesh_;
  Vector values_;
};

/// Trigonometric current patterns pi^{-1/2} sin(n theta), pi^{-1/2} cos(n theta),
/// n = 1..n_max. Pattern order: all sines (n ascending), then all cosines.
class CurrentBasis {
 public:
  explicit CurrentBasis(int n_max = 16);

  int n_max() const { return n_max_; }
  int size() const { return 2 * n_max_; }
  int frequency(int pattern) const { return pattern % n_max_ + 1; }
  bool is_cosine(int pattern) const { return pattern >= n_max_; }
  double operator()(int pattern, double theta) const;
  /// Pattern values at the given angles.
  std::vector<double> sample(int pattern, std::span<const double> thetas) const;

 private:
  int n_max_;
};

/// Boundary traces, one row per current pattern, sampled at `cols()`
/// equispaced angles starting at theta = 0.
struct BoundaryVoltages {
  RowMatrix samples;

  int patterns() const { return static_cast<int>(samples.rows()); }
  int count() const { return static_cast<int>(samples.cols()); }
  /// Copy with every row shifted to zero sample mean.
  BoundaryVoltages mean_free() const;
};

/// L(m, l) = <g_m, Lambda_N g_l> on the span of the current basis.
struct NtDMatrix {
  Matrix entries;
};

/// Dirichlet-to-Neumann map on the span of the current basis.
struct DtNMatrix {
  Matrix entries;
};

/// P1 Galerkin solver for -div(sigma grad u) = 0 with Neumann data and the
/// normalization sum_i w_i u_i = 0 over the boundary polygon.
///
/// The Lagrange-multiplier system is solved in the equivalent form: the load
/// is projected onto the compatible subspace, one node is pinned to make the
/// stiffness matrix definite, and the boundary mean is removed afterwards.
/// One factorization serves every right-hand side for a given sigma.
class NeumannSolver {
 public:
  explicit NeumannSolver(const ConductivityField& sigma);

  const DiskMesh& mesh() const { return *mesh_; }
  const ConductivityField& sigma() const { return sigma_; }

  /// Solve with boundary flux given at the boundary nodes. The flux must have
  /// zero boundary mean within 1e-9 (relative); throws std::invalid_argument otherwise.
  Vector solve(std::span<const double> flux) const;

  /// Solve with a flux whose boundary mean is first removed (adjoint problems).
  Vector solve_mean_free(std::span<const double> flux) const;

 private:
  Vector solve_load(Vector load) const;

  const DiskMesh* mesh_;
  ConductivityField sigma_;
  SparseMatrix stiffness_;
  SparseMatrix pinned_;
  Eigen::SimplicialLDLT<SparseMatrix> factor_;
  int pinned_node_ = 0;
};

/// Nodal potential for boundary current `flux` (values at the boundary nodes).
Vector solve_neumann(const ConductivityField& sigma, std::span<const double> flux);

/// Adjoint potential: Neumann problem with the mean-subtracted residual as flux.
Vector solve_adjoint(const NeumannSolver& solver, std::span<const double> residual);
Vector solve_adjoint(const ConductivityField& sigma, std::span<const double> residual);

/// Trigonometric interpolant of a boundary trace (boundary node order)
/// evaluated at the given angles.
std::vector<double> sample_trace(const DiskMesh& mesh, std::span<const double> trace,
                                 std::span<const double> thetas);

struct ForwardData {
  NtDMatrix ntd;
  BoundaryVoltages voltages;
  /// Nodal potentials per pattern.
  std::vector<Vector> potentials;
};

/// Solve every pattern of `basis`, assemble the NtD matrix by boundary
/// quadrature and sample each trace at `samples` equispaced angles.
ForwardData compute_ntd(const ConductivityField& sigma, const CurrentBasis& basis,
                        int samples = 64);

/// Symmetrized inverse of an NtD matrix. Throws SolverError when the
/// condition number exceeds 1e12. The condition number is written to
/// `condition` when non-null.
DtNMatrix ntd_to_dtn(const NtDMatrix& ntd, double* condition = nullptr);

/// u + delta |u| xi, xi ~ N(0,1) independently per sample; deterministic in seed.
BoundaryVoltages add_noise(const BoundaryVoltages& clean, double delta, std::uint64_t seed);

/// Rebuild the NtD matrix from (possibly noisy) traces: each row is made mean
/// free, paired with every pattern by the trapezoid rule, then symmetrized.
NtDMatrix ntd_from_noisy_voltages(const BoundaryVoltages& voltages, const CurrentBasis& basis);

}  // namespace eit
