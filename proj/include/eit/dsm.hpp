#pragma once

#include <span>
#include <vector>

#include "eit/forward.hpp"
#include "eit/mesh.hpp"
#include "eit/phantom.hpp"

namespace eit {

/// (-Laplace_boundary)^gamma of a trace sampled at equispaced angles: mode n
/// is multiplied by n^{2 gamma}, mode 0 is removed.
std::vector<double> fractional_boundary_laplacian(std::span<const double> trace, double gamma);

struct CauchyDifference {
  Vector phi;  // nodal, zero boundary mean
  int pattern = 0;
};

/// Harmonic phi with normal derivative (-Laplace_boundary)^gamma (u_sigma - u_1)
/// for row `pattern`. `laplace` must be a solver for sigma = 1.
CauchyDifference cauchy_difference(const NeumannSolver& laplace, const BoundaryVoltages& data_sigma,
                                   const BoundaryVoltages& data_1, int pattern, double gamma = 1.0);
CauchyDifference cauchy_difference(const DiskMesh& mesh, const BoundaryVoltages& data_sigma,
                                   const BoundaryVoltages& data_1, int pattern, double gamma = 1.0);

/// H^{2 gamma}(boundary) seminorm of the dipole probe at x, |x| < 1:
/// (1/pi) sum_{n >= 1} n^{4 gamma} |x|^{2n-2}, square-rooted.
double probe_seminorm(Point x, double gamma = 1.0);

struct IndexField {
  PixelImage values;  // off-mask pixels hold 0
  bool zero_data = false;
};

/// Mean over patterns of |grad phi_l(x)| / (||data_diff_l||_{L2(boundary)} |eta_x|)
/// at the on-mask pixel centers. data_diffs[l] holds the sampled difference
/// trace that produced phis[l].
IndexField index_field(const DiskMesh& mesh, std::span<const CauchyDifference> phis,
                       std::span<const std::vector<double>> data_diffs, double gamma = 1.0,
                       unsigned threads = 1);

/// Every phi sampled on the 64x64 grid (off-mask 0), slices in input order,
/// each slice row-major.
std::vector<double> export_phi_stack(const DiskMesh& mesh, std::span<const CauchyDifference> phis);

struct DsmResult {
  IndexField index;
  std::vector<CauchyDifference> phis;
};

/// Cauchy differences for every pattern and the aggregated index field.
DsmResult reconstruct_dsm(const BoundaryVoltages& data_sigma, const BoundaryVoltages& data_1,
                          const DiskMesh& mesh, double gamma = 1.0, unsigned threads = 1);

}  // namespace eit
