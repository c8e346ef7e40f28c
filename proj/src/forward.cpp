#include "eit/forward.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "eit/boundary.hpp"

namespace eit {

ConductivityField::ConductivityField(const DiskMesh& mesh, Vector values)
    : mesh_(&mesh), values_(std::move(values)) {
  if (values_.size() != static_cast<Eigen::Index>(mesh.num_nodes())) {
    throw std::invalid_argument("ConductivityField: one value per mesh node required");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < kLambda || v > 1.0 / kLambda) {
      throw std::invalid_argument("ConductivityField: value outside the admissible set");
    }
  }
}

ConductivityField ConductivityField::constant(const DiskMesh& mesh, double value) {
  return {mesh, Vector::Constant(static_cast<Eigen::Index>(mesh.num_nodes()), value)};
}

std::vector<double> ConductivityField::element_values() const {
  std::vector<double> out(mesh_->num_triangles());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const auto& tri = mesh_->triangles()[t];
    out[t] = (values_[tri[0]] + values_[tri[1]] + values_[tri[2]]) / 3.0;
  }
  return out;
}

CurrentBasis::CurrentBasis(int n_max) : n_max_(n_max) {
  if (n_max < 1) throw std::invalid_argument("CurrentBasis: n_max must be positive");
}

double CurrentBasis::operator()(int pattern, double theta) const {
  const double n = frequency(pattern);
  const double scale = 1.0 / std::sqrt(kPi);
  return is_cosine(pattern) ? scale * std::cos(n * theta) : scale * std::sin(n * theta);
}

std::vector<double> CurrentBasis::sample(int pattern, std::span<const double> thetas) const {
  std::vector<double> out;
  out.reserve(thetas.size());
  for (double t : thetas) out.push_back((*this)(pattern, t));
  return out;
}

BoundaryVoltages BoundaryVoltages::mean_free() const {
  BoundaryVoltages out = *this;
  for (Eigen::Index r = 0; r < out.samples.rows(); ++r) {
    out.samples.row(r).array() -= out.samples.row(r).mean();
  }
  return out;
}

NeumannSolver::NeumannSolver(const ConductivityField& sigma)
    : mesh_(&sigma.mesh()), sigma_(sigma) {
  const StiffnessAssembler assembler(*mesh_);
  stiffness_ = assembler.assemble(sigma_.element_values());
  pinned_ = stiffness_;
  for (Eigen::Index col = 0; col < pinned_.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(pinned_, col); it; ++it) {
      if (it.row() == pinned_node_ || it.col() == pinned_node_) {
        it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
      }
    }
  }
  factor_.compute(pinned_);
  if (factor_.info() != Eigen::Success) {
    throw SolverError("NeumannSolver: factorization failed", 0.0);
  }
  const Vector d = factor_.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  const double dmin = d.cwiseAbs().minCoeff();
  if (!(dmin > 0.0) || dmax / dmin > 1e14) {
    throw SolverError("NeumannSolver: stiffness matrix is numerically singular", dmax / dmin);
  }
}

Vector NeumannSolver::solve_load(Vector load) const {
  const auto& bnodes = mesh_->boundary_nodes();
  const auto& w = mesh_->boundary_weights();
  double total = load.sum();
  double perimeter = 0.0;
  for (double wi : w) perimeter += wi;
  for (std::size_t i = 0; i < bnodes.size(); ++i) load[bnodes[i]] -= w[i] * total / perimeter;

  const double load_norm = load.norm();
  if (load_norm == 0.0) return Vector::Zero(load.size());

  Vector rhs = load;
  rhs[pinned_node_] = 0.0;
  Vector u = factor_.solve(rhs);

  const double residual = (stiffness_ * u - load).norm() / load_norm;
  if (!(residual <= 1e-10)) {
    throw SolverError("NeumannSolver: discrete residual too large", residual);
  }

  double mean = 0.0;
  for (std::size_t i = 0; i < bnodes.size(); ++i) mean += w[i] * u[bnodes[i]];
  u.array() -= mean / perimeter;
  return u;
}

Vector NeumannSolver::solve(std::span<const double> flux) const {
  const auto& bnodes = mesh_->boundary_nodes();
  const auto& w = mesh_->boundary_weights();
  if (flux.size() != bnodes.size()) {
    throw std::invalid_argument("NeumannSolver: one flux value per boundary node required");
  }
  double net = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < flux.size(); ++i) {
    net += w[i] * flux[i];
    scale += w[i] * std::abs(flux[i]);
  }
  if (std::abs(net) > 1e-9 * std::max(scale, 1e-300) && std::abs(net) > 1e-300) {
    throw std::invalid_argument("NeumannSolver: boundary current has nonzero mean");
  }
  Vector load = Vector::Zero(static_cast<Eigen::Index>(mesh_->num_nodes()));
  for (std::size_t i = 0; i < flux.size(); ++i) load[bnodes[i]] = w[i] * flux[i];
  return solve_load(std::move(load));
}

Vector NeumannSolver::solve_mean_free(std::span<const double> flux) const {
  const auto& w = mesh_->boundary_weights();
  if (flux.size() != w.size()) {
    throw std::invalid_argument("NeumannSolver: one flux value per boundary node required");
  }
  double net = 0.0, perimeter = 0.0;
  for (std::size_t i = 0; i < flux.size(); ++i) {
    net += w[i] * flux[i];
    perimeter += w[i];
  }
  std::vector<double> shifted(flux.begin(), flux.end());
  for (double& f : shifted) f -= net / perimeter;
  return solve(shifted);
}

Vector solve_neumann(const ConductivityField& sigma, std::span<const double> flux) {
  return NeumannSolver(sigma).solve(flux);
}

Vector solve_adjoint(const NeumannSolver& solver, std::span<const double> residual) {
  return solver.solve_mean_free(residual);
}

Vector solve_adjoint(const ConductivityField& sigma, std::span<const double> residual) {
  return NeumannSolver(sigma).solve_mean_free(residual);
}

std::vector<double> sample_trace(const DiskMesh& mesh, std::span<const double> trace,
                                 std::span<const double> thetas) {
  if (trace.size() != mesh.num_boundary()) throw std::invalid_argument("sample_trace: trace size mismatch");
  // boundary nodes are equispaced in angle from theta = 0
  return TrigSeries(trace).evaluate(thetas);
}

ForwardData compute_ntd(const ConductivityField& sigma, const CurrentBasis& basis, int samples) {
  if (samples < 2) throw std::invalid_argument("compute_ntd: need at least two samples");
  const DiskMesh& mesh = sigma.mesh();
  const NeumannSolver solver(sigma);
  const int np = basis.size();
  const auto sample_theta = equispaced_angles(static_cast<std::size_t>(samples));

  std::vector<std::vector<double>> patterns(static_cast<std::size_t>(np));
  for (int l = 0; l < np; ++l) patterns[l] = basis.sample(l, mesh.boundary_angles());

  ForwardData out;
  out.ntd.entries = Matrix::Zero(np, np);
  out.voltages.samples = RowMatrix::Zero(np, samples);
  out.potentials.reserve(static_cast<std::size_t>(np));
  for (int l = 0; l < np; ++l) {
    Vector u = solver.solve(patterns[l]);
    const auto trace = boundary_trace(mesh, u);
    for (int m = 0; m < np; ++m) out.ntd.entries(m, l) = boundary_quadrature(mesh, patterns[m], trace);
    const auto row = sample_trace(mesh, trace, sample_theta);
    for (int j = 0; j < samples; ++j) out.voltages.samples(l, j) = row[j];
    out.potentials.push_back(std::move(u));
  }
  out.voltages = out.voltages.mean_free();
  return out;
}

DtNMatrix ntd_to_dtn(const NtDMatrix& ntd, double* condition) {
  const Matrix sym = 0.5 * (ntd.entries + ntd.entries.transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const Vector lambda = eig.eigenvalues().cwiseAbs();
  const double cond = lambda.minCoeff() > 0.0 ? lambda.maxCoeff() / lambda.minCoeff()
                                              : std::numeric_limits<double>::infinity();
  if (condition) *condition = cond;
  if (!(cond <= 1e12)) throw SolverError("ntd_to_dtn: NtD matrix is too ill-conditioned", cond);
  const Matrix inv = ntd.entries.partialPivLu().inverse();
  return {0.5 * (inv + inv.transpose())};
}

BoundaryVoltages add_noise(const BoundaryVoltages& clean, double delta, std::uint64_t seed) {
  if (delta < 0.0) throw std::invalid_argument("add_noise: delta must be nonnegative");
  BoundaryVoltages out = clean;
  if (delta == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> xi(0.0, 1.0);
  for (Eigen::Index r = 0; r < out.samples.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.samples.cols(); ++c) {
      const double u = clean.samples(r, c);
      out.samples(r, c) = u + delta * std::abs(u) * xi(rng);
    }
  }
  return out;
}

NtDMatrix ntd_from_noisy_voltages(const BoundaryVoltages& voltages, const CurrentBasis& basis) {
  const int b = voltages.count();
  const int np = basis.size();
  if (voltages.patterns() != np) throw std::invalid_argument("ntd_from_noisy_voltages: pattern count mismatch");
  if (b < 2 * basis.n_max()) throw std::invalid_argument("ntd_from_noisy_voltages: too few samples");
  const BoundaryVoltages centred = voltages.mean_free();
  const auto theta = equispaced_angles(static_cast<std::size_t>(b));
  const double w = 2.0 * kPi / b;
  Matrix g(np, b);
  for (int m = 0; m < np; ++m) {
    for (int j = 0; j < b; ++j) g(m, j) = basis(m, theta[j]);
  }
  // L(m, l) = sum_j g_m(theta_j) v_l(theta_j) w
  const Matrix l = w * g * centred.samples.transpose();
  return {0.5 * (l + l.transpose())};
}

}  // namespace eit
