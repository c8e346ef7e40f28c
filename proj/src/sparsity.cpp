#include "eit/sparsity.hpp"

#include <algorithm>
#include <deque>

#include "eit/boundary.hpp"

namespace eit {

void SparsitySettings::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("sparsity: alpha must be positive");
  if (max_iterations < 1) throw std::invalid_argument("sparsity: iterations must be >= 1");
  if (memory < 1) throw std::invalid_argument("sparsity: memory must be >= 1");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("sparsity: q must lie in (0, 1)");
  if (!(tau > 0.0)) throw std::invalid_argument("sparsity: tau must be positive");
  if (!(s_stop > 0.0)) throw std::invalid_argument("sparsity: s_stop must be positive");
  if (!(s_init > 0.0)) throw std::invalid_argument("sparsity: s_init must be positive");
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("sparsity: lambda must lie in (0, 1)");
}

MisfitFunctional::MisfitFunctional(const DiskMesh& mesh, const BoundaryVoltages& data,
                                   const CurrentBasis& basis)
    : mesh_(&mesh) {
  if (data.patterns() != basis.size()) {
    throw std::invalid_argument("MisfitFunctional: one data row per current pattern required");
  }
  const BoundaryVoltages centred = data.mean_free();
  for (int l = 0; l < basis.size(); ++l) {
    fluxes_.push_back(basis.sample(l, mesh.boundary_angles()));
    const Eigen::RowVectorXd row = centred.samples.row(l);
    const TrigSeries series(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    data_.push_back(series.evaluate(mesh.boundary_angles()));
  }
}

MisfitFunctional::Evaluation MisfitFunctional::evaluate(const ConductivityField& sigma) const {
  if (&sigma.mesh() != mesh_) throw std::invalid_argument("MisfitFunctional: mesh mismatch");
  Evaluation eval;
  eval.solver = std::make_shared<const NeumannSolver>(sigma);
  const auto& w = mesh_->boundary_weights();
  for (std::size_t l = 0; l < fluxes_.size(); ++l) {
    Vector u = eval.solver->solve(fluxes_[l]);
    std::vector<double> r = boundary_trace(*mesh_, u);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] -= data_[l][i];
      eval.value += 0.5 * w[i] * r[i] * r[i];
    }
    eval.potentials.push_back(std::move(u));
    eval.residuals.push_back(std::move(r));
  }
  return eval;
}

Vector MisfitFunctional::nodal_derivative(const Evaluation& eval) const {
  std::vector<double> product(mesh_->num_triangles(), 0.0);
  for (std::size_t l = 0; l < eval.potentials.size(); ++l) {
    const Vector p = solve_adjoint(*eval.solver, eval.residuals[l]);
    for (std::size_t t = 0; t < product.size(); ++t) {
      const Point gu = mesh_->element_gradient(t, eval.potentials[l]);
      const Point gp = mesh_->element_gradient(t, p);
      product[t] += gu.x * gp.x + gu.y * gp.y;
    }
  }
  Vector derivative = Vector::Zero(static_cast<Eigen::Index>(mesh_->num_nodes()));
  for (std::size_t t = 0; t < product.size(); ++t) {
    const double share = -mesh_->area(t) / 3.0 * product[t];
    for (int v : mesh_->triangles()[t]) derivative[v] += share;
  }
  return derivative;
}

Vector MisfitFunctional::gradient(const Evaluation& eval) const {
  return nodal_derivative(eval).cwiseQuotient(mesh_->lumped_mass());
}

double misfit(const ConductivityField& sigma, const BoundaryVoltages& data) {
  return MisfitFunctional(sigma.mesh(), data).value(sigma);
}

Vector gradient_l2(const ConductivityField& sigma, const BoundaryVoltages& data) {
  const MisfitFunctional functional(sigma.mesh(), data);
  return functional.gradient(functional.evaluate(sigma));
}

SobolevSpace::SobolevSpace(const DiskMesh& mesh) : mesh_(&mesh) {
  const StiffnessAssembler assembler(mesh);
  const std::vector<double> ones(mesh.num_triangles(), 1.0);
  h1_ = assembler.assemble(ones) + assembler.mass();
  SparseMatrix dirichlet = h1_;
  for (Eigen::Index col = 0; col < dirichlet.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(dirichlet, col); it; ++it) {
      const bool fixed = mesh.boundary_position(static_cast<int>(it.row())) >= 0 ||
                         mesh.boundary_position(static_cast<int>(it.col())) >= 0;
      if (fixed) it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    }
  }
  dirichlet_.compute(dirichlet);
  if (dirichlet_.info() != Eigen::Success) throw SolverError("SobolevSpace: factorization failed", 0.0);
}

Vector SobolevSpace::smooth_load(const Vector& load) const {
  Vector rhs = load;
  for (int b : mesh_->boundary_nodes()) rhs[b] = 0.0;
  return dirichlet_.solve(rhs);
}

Vector SobolevSpace::smooth(const Vector& g) const {
  return smooth_load(g.cwiseProduct(mesh_->lumped_mass()));
}

double SobolevSpace::inner(const Vector& a, const Vector& b) const { return a.dot(h1_ * b); }

Vector sobolev_smooth(const DiskMesh& mesh, const Vector& g) { return SobolevSpace(mesh).smooth(g); }

Vector soft_shrink(const Vector& v, double threshold) {
  if (threshold < 0.0) throw std::invalid_argument("soft_shrink: threshold must be nonnegative");
  return v.unaryExpr([threshold](double t) {
    const double mag = std::abs(t) - threshold;
    return mag > 0.0 ? std::copysign(mag, t) : 0.0;
  });
}

double bb_step(const SobolevSpace& h1, const Vector& sigma_now, const Vector& sigma_prev,
               const Vector& grad_now, const Vector& grad_prev, double fallback) {
  const Vector ds = sigma_now - sigma_prev;
  const Vector dg = grad_now - grad_prev;
  const double quotient = h1.inner(ds, dg) / h1.inner(ds, ds);
  return (std::isfinite(quotient) && quotient > 0.0) ? quotient : fallback;
}

namespace {

double weighted_l1(const DiskMesh& mesh, const Vector& v) {
  return v.cwiseAbs().dot(mesh.lumped_mass());
}

}  // namespace

SparsityResult reconstruct_sparsity(const BoundaryVoltages& data, const DiskMesh& mesh,
                                    const SparsitySettings& settings) {
  settings.validate();
  const MisfitFunctional functional(mesh, data);
  const SobolevSpace h1(mesh);
  const double lower = settings.lambda - 1.0;
  const double upper = 1.0 / settings.lambda - 1.0;
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());

  auto conductivity = [&](const Vector& delta) {
    return ConductivityField(mesh, (Vector::Ones(n) + delta).cwiseMax(settings.lambda).cwiseMin(1.0 / settings.lambda));
  };

  SparsityResult result;
  Vector delta = Vector::Zero(n);
  auto eval = functional.evaluate(conductivity(delta));
  double psi = eval.value;
  Vector grad = h1.smooth_load(functional.nodal_derivative(eval));
  std::deque<double> history{psi};
  result.initial_psi = psi;

  Vector prev_delta, prev_grad;
  result.stop_reason = "max_iterations";
  for (int it = 0; it < settings.max_iterations; ++it) {
    // The BB quotient approximates the curvature; its reciprocal is the trial step.
    double step = settings.s_init;
    if (prev_delta.size() > 0) step = 1.0 / bb_step(h1, delta, prev_delta, grad, prev_grad, 1.0 / settings.s_init);

    const double reference = *std::max_element(history.begin(), history.end());
    bool accepted = false;
    Vector candidate;
    MisfitFunctional::Evaluation trial;
    double trial_psi = 0.0, margin = 0.0;
    while (step >= settings.s_stop) {
      candidate = soft_shrink(delta - step * grad, step * settings.alpha);
      for (int b : mesh.boundary_nodes()) candidate[b] = 0.0;
      candidate = candidate.cwiseMax(lower).cwiseMin(upper);
      trial = functional.evaluate(conductivity(candidate));
      trial_psi = trial.value + settings.alpha * weighted_l1(mesh, candidate);
      margin = settings.tau * 0.5 * step * h1.norm_squared(candidate - delta);
      if (trial_psi <= reference - margin) {
        accepted = true;
        break;
      }
      step *= settings.q;
    }
    if (!accepted) {
      result.stop_reason = "step_below_tolerance";
      break;
    }
    const bool stationary = (candidate - delta).cwiseAbs().maxCoeff() == 0.0;
    result.accepted.push_back({trial_psi, reference, margin, step});
    result.iterations = it + 1;
    if (stationary) {
      result.stop_reason = "stationary";
      break;
    }
    prev_delta = std::move(delta);
    prev_grad = std::move(grad);
    delta = std::move(candidate);
    eval = std::move(trial);
    grad = h1.smooth_load(functional.nodal_derivative(eval));
    history.push_back(trial_psi);
    while (static_cast<int>(history.size()) > settings.memory) history.pop_front();
  }

  result.delta_sigma = delta;
  const Vector sigma = (Vector::Ones(n) + delta).cwiseMax(settings.lambda).cwiseMin(1.0 / settings.lambda);
  result.image = mesh_to_pixels(mesh, sigma, 1.0);
  for (double& v : result.image.values) v = std::clamp(v, settings.lambda, 1.0 / settings.lambda);
  return result;
}

}  // namespace eit
