#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "eit/common.hpp"
#include "eit/forward.hpp"
#include "eit/phantom.hpp"

namespace eit {

using Complex = std::complex<double>;

/// Uniform square grid of 2^m points per axis on [-2R, 2R)^2 in the complex
/// k-plane. Index N/2 along each axis is k = 0. Points with |k| < R are active.
class KGrid {
 public:
  KGrid(double radius, int exponent = 7);

  double radius() const { return radius_; }
  int size() const { return size_; }
  double step() const { return step_; }
  int origin() const { return size_ / 2; }

  /// k at grid index (i along Re k, j along Im k).
  Complex point(int i, int j) const { return {-2.0 * radius_ + i * step_, -2.0 * radius_ + j * step_}; }
  std::size_t flat(int i, int j) const { return static_cast<std::size_t>(i) * size_ + j; }
  bool active(int i, int j) const { return std::abs(point(i, j)) < radius_; }
  /// Flat indices of the active points, row-major order.
  const std::vector<std::size_t>& active_points() const { return active_; }

 private:
  double radius_;
  int size_;
  double step_;
  std::vector<std::size_t> active_;
};

struct ScatteringTransform {
  KGrid grid;
  /// One value per grid point (flat index); zero off the active disk and at k = 0.
  std::vector<Complex> values;
};

/// DtN map of the unit disk with sigma = 1: diag(n) in pattern order.
DtNMatrix dtn_homogeneous(const CurrentBasis& basis = CurrentBasis{});

/// Born approximation of the scattering transform at a single k:
/// int e^{i conj(k) conj(x)} (L - L1) e^{ikx} ds, with e^{ikx} expanded in the
/// current basis by `samples`-point quadrature on the circle.
Complex scattering_point(const DtNMatrix& dtn, Complex k, const CurrentBasis& basis = CurrentBasis{},
                         int samples = 64);

/// scattering_point on every active grid point.
ScatteringTransform scattering_transform_exp(const DtNMatrix& dtn, const KGrid& grid,
                                             const CurrentBasis& basis = CurrentBasis{},
                                             int samples = 64);

struct DbarSolverSettings {
  int restart = 40;
  int max_iterations = 200;
  double tolerance = 1e-6;
};

/// Solves mu = 1 + C[T conj(mu)] on the active disk for one x at a time, with
/// C the discrete convolution with 1/(pi k) done by FFT on the periodic grid.
/// Shared read-only across threads; every call uses its own buffers.
class DbarSolver {
 public:
  DbarSolver(ScatteringTransform t, DbarSolverSettings settings = {});
  ~DbarSolver();
  DbarSolver(const DbarSolver&) = delete;
  DbarSolver& operator=(const DbarSolver&) = delete;

  struct Solution {
    Complex mu0;
    int iterations = 0;
    double residual = 0.0;
  };

  /// mu(x, 0). Throws SolverError carrying the residual when the iteration
  /// does not reach the tolerance.
  Solution solve_at(Point x) const;

  const ScatteringTransform& transform() const { return t_; }

 private:
  ScatteringTransform t_;
  DbarSolverSettings settings_;
  std::vector<Complex> kernel_hat_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

/// Convenience wrapper: mu(x, 0) for one transform.
Complex solve_dbar_at(Point x, const ScatteringTransform& t, DbarSolverSettings settings = {});

/// Cutoff radius for a noise level: 5 at 0, 4.5 at 1%, 4 at 5% and beyond,
/// linear in between.
double cutoff_radius(double delta);

struct DbarSettings {
  double radius = 0.0;  // 0 selects cutoff_radius(delta)
  int exponent = 7;
  DbarSolverSettings solver;
  unsigned threads = 1;
};

struct DbarResult {
  PixelImage image;
  double radius = 0.0;
  long total_iterations = 0;
  int max_iterations = 0;
  int failed_pixels = 0;
  double max_imag = 0.0;  // largest |Im mu(x, 0)| over solved pixels
};

/// Linearized D-bar reconstruction sigma = (Re mu(x, 0))^2 at every on-mask
/// pixel. Throws SolverError when more than 1% of the pixels fail.
DbarResult reconstruct_dbar(const DtNMatrix& dtn, double delta, const DbarSettings& settings = {});

}  // namespace eit
