#pragma once

#include <memory>
#include <string>
#include <vector>

#include "eit/forward.hpp"
#include "eit/mesh.hpp"
#include "eit/phantom.hpp"

namespace eit {

struct SparsitySettings {
  double alpha = 1e-3;      // l1 penalty weight
  int max_iterations = 200;
  int memory = 5;           // weak-monotonicity window M
  double tau = 1e-4;        // monotonicity slack
  double q = 0.5;           // backtracking factor
  double s_stop = 1e-6;     // stop once the trial step drops below this
  double s_init = 1.0;      // step of the first iteration
  double lambda = kLambda;  // admissible set [lambda, 1/lambda]

  /// Throws std::invalid_argument on an invalid combination.
  void validate() const;
};

/// Least-squares data misfit over all current patterns for a fixed set of
/// measured traces on a fixed inversion mesh.
class MisfitFunctional {
 public:
  /// `data` holds one row per pattern of `basis`; rows are made mean free and
  /// interpolated onto the boundary nodes of `mesh`.
  MisfitFunctional(const DiskMesh& mesh, const BoundaryVoltages& data, const CurrentBasis& basis = CurrentBasis{});

  struct Evaluation {
    double value = 0.0;
    std::shared_ptr<const NeumannSolver> solver;
    std::vector<Vector> potentials;
    /// trace(u_l) - data_l at the boundary nodes.
    std::vector<std::vector<double>> residuals;
  };

  Evaluation evaluate(const ConductivityField& sigma) const;
  double value(const ConductivityField& sigma) const { return evaluate(sigma).value; }

  /// dJ/dsigma_k for every node k (the derivative of the discrete misfit).
  Vector nodal_derivative(const Evaluation& eval) const;
  /// L2 gradient -sum_l grad(u_l).grad(p_l): element values lifted to nodes by
  /// area-weighted averaging, so that sum_k m_k g_k v_k = dJ[v] with lumped mass m.
  Vector gradient(const Evaluation& eval) const;

  const DiskMesh& mesh() const { return *mesh_; }

 private:
  const DiskMesh* mesh_;
  std::vector<std::vector<double>> fluxes_;
  std::vector<std::vector<double>> data_;
};

/// J(sigma) = 1/2 sum_l ||trace(u_l) - phi_l||^2 over the boundary.
double misfit(const ConductivityField& sigma, const BoundaryVoltages& data);

/// L2 gradient of the misfit, see MisfitFunctional::gradient.
Vector gradient_l2(const ConductivityField& sigma, const BoundaryVoltages& data);

/// H1 machinery on one mesh: the Sobolev smoother (-Laplace + I with zero
/// boundary values) and the full H1 inner product (stiffness + mass).
class SobolevSpace {
 public:
  explicit SobolevSpace(const DiskMesh& mesh);

  /// Solve (-Laplace + 1) s = g, s = 0 on the boundary, with a lumped-mass
  /// load for the nodal field g.
  Vector smooth(const Vector& g) const;
  /// Same, with the load vector given directly.
  Vector smooth_load(const Vector& load) const;

  double inner(const Vector& a, const Vector& b) const;
  double norm_squared(const Vector& a) const { return inner(a, a); }

 private:
  const DiskMesh* mesh_;
  SparseMatrix h1_;
  Eigen::SimplicialLDLT<SparseMatrix> dirichlet_;
};

Vector sobolev_smooth(const DiskMesh& mesh, const Vector& g);

/// sign(t) max(|t| - threshold, 0), componentwise.
Vector soft_shrink(const Vector& v, double threshold);

/// Barzilai-Borwein quotient <d_sigma, d_grad>_H1 / <d_sigma, d_sigma>_H1 of the
/// latest increments. Returns `fallback` when the quotient is not a positive
/// finite number.
double bb_step(const SobolevSpace& h1, const Vector& sigma_now, const Vector& sigma_prev,
               const Vector& grad_now, const Vector& grad_prev, double fallback = 1.0);

struct SparsityResult {
  PixelImage image;
  Vector delta_sigma;  // on the inversion mesh
  int iterations = 0;
  std::string stop_reason;

  struct Step {
    double psi = 0.0;        // accepted objective
    double reference = 0.0;  // max of the last M accepted objectives
    double margin = 0.0;     // tau (s/2) ||update||_H1^2
    double step = 0.0;
  };
  double initial_psi = 0.0;
  std::vector<Step> accepted;
};

/// Sparsity-regularized reconstruction of sigma - 1 from boundary traces.
SparsityResult reconstruct_sparsity(const BoundaryVoltages& data, const DiskMesh& mesh,
                                    const SparsitySettings& settings = {});

}  // namespace eit
