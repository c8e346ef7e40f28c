#include <catch_amalgamated.hpp>

#include <cmath>

#include "eit/forward.hpp"
#include "eit/phantom.hpp"
#include "oracles/radial.hpp"

using namespace eit;
using Catch::Approx;

namespace {

Phantom disk_phantom(double value, double radius) {
  Phantom p;
  p.inclusions.push_back({Ellipse{{0.0, 0.0}, radius, radius, 0.0}, ConstantPayload{value}});
  return p;
}

double relative_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("current basis ordering and normalization") {
  CurrentBasis basis;
  REQUIRE(basis.size() == 32);
  REQUIRE(basis.frequency(0) == 1);
  REQUIRE(basis.frequency(15) == 16);
  REQUIRE(basis.frequency(16) == 1);
  REQUIRE_FALSE(basis.is_cosine(15));
  REQUIRE(basis.is_cosine(16));
  REQUIRE(basis(2, 0.3) == Approx(std::sin(0.9) / std::sqrt(kPi)));
  REQUIRE(basis(18, 0.3) == Approx(std::cos(0.9) / std::sqrt(kPi)));
}

TEST_CASE("homogeneous potentials match separation of variables") {
  const auto mesh = build_disk_mesh(0.03);
  const auto sigma = ConductivityField::constant(mesh, 1.0);
  const NeumannSolver solver(sigma);
  CurrentBasis basis;
  for (int n : {1, 3, 8}) {
    const auto flux = basis.sample(n - 1, mesh.boundary_angles());
    const auto trace = boundary_trace(mesh, solver.solve(flux));
    std::vector<double> exact;
    for (double t : mesh.boundary_angles()) exact.push_back(std::sin(n * t) / (n * std::sqrt(kPi)));
    REQUIRE(relative_l2(trace, exact) <= 0.02);
  }
}

TEST_CASE("constant conductivity scales the potential by its inverse") {
  const auto mesh = build_disk_mesh(0.06);
  CurrentBasis basis;
  const auto flux = basis.sample(20, mesh.boundary_angles());
  const Vector u1 = solve_neumann(ConductivityField::constant(mesh, 1.0), flux);
  const Vector u3 = solve_neumann(ConductivityField::constant(mesh, 3.0), flux);
  REQUIRE((3.0 * u3 - u1).norm() <= 1e-10 * u1.norm());
}

TEST_CASE("two-phase disk trace matches the interface oracle") {
  const auto mesh = build_disk_mesh(0.03);
  const auto sigma = phantom_to_mesh(disk_phantom(2.0, 0.5), mesh);
  CurrentBasis basis;
  const auto flux = basis.sample(16, mesh.boundary_angles());
  const auto trace = boundary_trace(mesh, solve_neumann(sigma, flux));
  const double lambda = oracle::ntd_eigenvalue(1, 2.0, 0.5);
  REQUIRE(lambda == Approx(0.84615384615384615).epsilon(1e-14));
  std::vector<double> exact;
  for (double t : mesh.boundary_angles()) exact.push_back(lambda * std::cos(t) / std::sqrt(kPi));
  REQUIRE(relative_l2(trace, exact) <= 0.02);
}

TEST_CASE("radial oracle reference values") {
  REQUIRE(oracle::ntd_eigenvalue(1, 0.5, 0.4) == Approx(1.1126760563380282).epsilon(1e-14));
  REQUIRE(oracle::ntd_eigenvalue(2, 0.5, 0.4) == Approx(0.50860677783754707).epsilon(1e-14));
  REQUIRE(oracle::ntd_eigenvalue(3, 0.5, 0.4) == Approx(0.33424480001139333).epsilon(1e-14));
  REQUIRE(oracle::ntd_eigenvalue(16, 0.5, 0.4) == Approx(0.062500000000007686).epsilon(1e-14));
  REQUIRE(oracle::ntd_eigenvalue(1, 2.0, 0.4) == Approx(0.89873417721518987).epsilon(1e-14));
  REQUIRE(oracle::ntd_eigenvalue(2, 2.0, 0.4) == Approx(0.49153886832363829).epsilon(1e-14));
  REQUIRE(oracle::ntd_eigenvalue(3, 2.0, 0.4) == Approx(0.33242435217338816).epsilon(1e-14));
  REQUIRE(oracle::ntd_eigenvalue(16, 2.0, 0.4) == Approx(0.062499999999992314).epsilon(1e-14));
}

TEST_CASE("homogeneous NtD is diag(1/n)") {
  const auto mesh = build_disk_mesh(0.03);
  CurrentBasis basis;
  const auto data = compute_ntd(ConductivityField::constant(mesh, 1.0), basis);
  const Matrix& l = data.ntd.entries;
  for (int m = 0; m < 32; ++m) {
    for (int k = 0; k < 32; ++k) {
      if (m == k) {
        REQUIRE(l(m, m) == Approx(1.0 / basis.frequency(m)).epsilon(0.02));
      } else {
        REQUIRE(std::abs(l(m, k)) <= 1e-3);
      }
    }
  }
}

TEST_CASE("concentric inclusion NtD diagonal matches the radial oracle") {
  const auto mesh = build_disk_mesh(0.03);
  CurrentBasis basis;
  for (double s : {0.5, 2.0}) {
    const auto data = compute_ntd(phantom_to_mesh(disk_phantom(s, 0.4), mesh), basis);
    for (int m = 0; m < 32; ++m)
      REQUIRE(data.ntd.entries(m, m) == Approx(oracle::ntd_eigenvalue(basis.frequency(m), s, 0.4)).epsilon(0.02));
  }
}

TEST_CASE("DtN inversion") {
  CurrentBasis basis;
  NtDMatrix l{Matrix::Zero(32, 32)};
  for (int m = 0; m < 32; ++m) l.entries(m, m) = 1.0 / basis.frequency(m);
  double cond = 0.0;
  const auto dtn = ntd_to_dtn(l, &cond);
  for (int m = 0; m < 32; ++m)
    for (int k = 0; k < 32; ++k) REQUIRE(dtn.entries(m, k) == (m == k ? basis.frequency(m) : 0.0));
  REQUIRE(cond == Approx(16.0));

  const auto mesh = build_disk_mesh(0.06);
  const auto clean = compute_ntd(phantom_to_mesh(disk_phantom(2.0, 0.4), mesh), basis);
  const auto forward = ntd_to_dtn(clean.ntd);
  REQUIRE((forward.entries * clean.ntd.entries - Matrix::Identity(32, 32)).norm() <= 1e-10);

  const auto noisy = ntd_from_noisy_voltages(add_noise(clean.voltages, 0.05, 42), basis);
  double noisy_cond = 0.0;
  REQUIRE_NOTHROW(ntd_to_dtn(noisy, &noisy_cond));
  REQUIRE(std::isfinite(noisy_cond));
  REQUIRE(noisy_cond > 1.0);

  NtDMatrix singular{Matrix::Zero(32, 32)};
  singular.entries(0, 0) = 1.0;
  REQUIRE_THROWS_AS(ntd_to_dtn(singular), SolverError);
}

TEST_CASE("adjoint solve with zero residual") {
  const auto mesh = build_disk_mesh(0.08);
  const auto sigma = ConductivityField::constant(mesh, 1.5);
  const std::vector<double> zero(mesh.num_boundary(), 0.0);
  REQUIRE(solve_adjoint(sigma, zero).norm() == 0.0);

  CurrentBasis basis;
  const NeumannSolver solver(sigma);
  const auto trace = boundary_trace(mesh, solver.solve(basis.sample(3, mesh.boundary_angles())));
  std::vector<double> residual(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) residual[i] = trace[i] - trace[i];
  REQUIRE(solve_adjoint(solver, residual).norm() == 0.0);
}

TEST_CASE("incompatible flux is rejected") {
  const auto mesh = build_disk_mesh(0.1);
  const NeumannSolver solver(ConductivityField::constant(mesh, 1.0));
  const std::vector<double> flux(mesh.num_boundary(), 1.0);
  REQUIRE_THROWS_AS(solver.solve(flux), std::invalid_argument);
}

TEST_CASE("noise model") {
  BoundaryVoltages clean;
  clean.samples = RowMatrix::Random(4, 64);
  const auto same = add_noise(clean, 0.0, 1);
  REQUIRE(same.samples == clean.samples);
  REQUIRE(add_noise(clean, 0.05, 9).samples == add_noise(clean, 0.05, 9).samples);
  REQUIRE(add_noise(clean, 0.05, 9).samples != add_noise(clean, 0.05, 10).samples);

  BoundaryVoltages unit;
  unit.samples = RowMatrix::Ones(1, 1);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < n; ++s) {
    const double v = add_noise(unit, 0.05, derive_seed(2024, static_cast<std::uint64_t>(s))).samples(0, 0);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sum2 - n * mean * mean) / (n - 1));
  REQUIRE(sd == Approx(0.05).margin(0.001));
}

TEST_CASE("NtD from traces") {
  const auto mesh = build_disk_mesh(0.03);
  CurrentBasis basis;
  const auto data = compute_ntd(phantom_to_mesh(disk_phantom(0.5, 0.4), mesh), basis);
  const auto rebuilt = ntd_from_noisy_voltages(data.voltages, basis);
  for (int m = 0; m < 32; ++m)
    REQUIRE(rebuilt.entries(m, m) == Approx(data.ntd.entries(m, m)).epsilon(0.01));
  REQUIRE(rebuilt.entries == rebuilt.entries.transpose());

  BoundaryVoltages shifted = data.voltages;
  shifted.samples.row(5).array() += 3.25;
  const auto again = ntd_from_noisy_voltages(shifted, basis);
  REQUIRE((again.entries - rebuilt.entries).cwiseAbs().maxCoeff() <= 1e-14);
}
