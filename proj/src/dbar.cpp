#include "eit/dbar.hpp"

#include <fftw3.h>

#include <mutex>
#include <span>

#include "eit/boundary.hpp"
#include "eit/parallel.hpp"

namespace eit {

namespace {

// FFTW's planner is not thread safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_alloc_complex(n)), size(n) {
    if (!data) throw std::bad_alloc();
    std::fill(begin(), end(), Complex{});
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  Complex* begin() { return reinterpret_cast<Complex*>(data); }
  Complex* end() { return begin() + size; }
  Complex& operator[](std::size_t i) { return begin()[i]; }

  fftw_complex* data;
  std::size_t size;
};

struct GmresOutcome {
  Vector x;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Restarted GMRES with Givens rotations for a real linear operator.
template <class Op>
GmresOutcome gmres(Op&& apply, const Vector& b, Vector x, int restart, int max_iterations,
                   double tolerance) {
  GmresOutcome out;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x = Vector::Zero(b.size());
    out.converged = true;
    return out;
  }
  std::vector<Vector> basis(static_cast<std::size_t>(restart) + 1);
  Matrix hess = Matrix::Zero(restart + 1, restart);
  Vector cs(restart), sn(restart), rhs(restart + 1);

  Vector r = b - apply(x);
  double rel = r.norm() / bnorm;
  while (rel > tolerance && out.iterations < max_iterations) {
    const double beta = r.norm();
    basis[0] = r / beta;
    rhs.setZero();
    rhs[0] = beta;
    hess.setZero();
    int j = 0;
    for (; j < restart && out.iterations < max_iterations; ++j) {
      ++out.iterations;
      Vector w = apply(basis[static_cast<std::size_t>(j)]);
      for (int i = 0; i <= j; ++i) {
        const auto& q = basis[static_cast<std::size_t>(i)];
        hess(i, j) = w.dot(q);
        w -= hess(i, j) * q;
      }
      hess(j + 1, j) = w.norm();
      if (hess(j + 1, j) > 0.0) basis[static_cast<std::size_t>(j) + 1] = w / hess(j + 1, j);
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * hess(i, j) + sn[i] * hess(i + 1, j);
        hess(i + 1, j) = -sn[i] * hess(i, j) + cs[i] * hess(i + 1, j);
        hess(i, j) = t;
      }
      const double d = std::hypot(hess(j, j), hess(j + 1, j));
      cs[j] = hess(j, j) / d;
      sn[j] = hess(j + 1, j) / d;
      hess(j, j) = d;
      hess(j + 1, j) = 0.0;
      rhs[j + 1] = -sn[j] * rhs[j];
      rhs[j] = cs[j] * rhs[j];
      if (std::abs(rhs[j + 1]) / bnorm <= tolerance) {
        ++j;
        break;
      }
    }
    const Vector y = hess.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(rhs.head(j));
    for (int i = 0; i < j; ++i) x += y[i] * basis[static_cast<std::size_t>(i)];
    r = b - apply(x);
    rel = r.norm() / bnorm;
  }
  out.x = std::move(x);
  out.residual = rel;
  out.converged = rel <= tolerance;
  return out;
}

}  // namespace

KGrid::KGrid(double radius, int exponent) : radius_(radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("KGrid: radius must be positive");
  if (exponent < 3 || exponent > 10) throw std::invalid_argument("KGrid: exponent must lie in [3, 10]");
  size_ = 1 << exponent;
  step_ = 4.0 * radius / size_;
  for (int i = 0; i < size_; ++i) {
    for (int j = 0; j < size_; ++j) {
      if (active(i, j)) active_.push_back(flat(i, j));
    }
  }
}

DtNMatrix dtn_homogeneous(const CurrentBasis& basis) {
  DtNMatrix out{Matrix::Zero(basis.size(), basis.size())};
  for (int l = 0; l < basis.size(); ++l) out.entries(l, l) = basis.frequency(l);
  return out;
}

namespace {

// Quadrature coefficients <g_l, f> of e^{ikx} and e^{i conj(k) conj(x)} on the circle.
struct ExpCoefficients {
  Eigen::VectorXcd plain;
  Eigen::VectorXcd conjugate;
};

ExpCoefficients exp_coefficients(const Matrix& patterns, std::span<const double> theta, Complex k) {
  const auto samples = static_cast<Eigen::Index>(theta.size());
  Eigen::VectorXcd e(samples), ebar(samples);
  const Complex i1(0.0, 1.0);
  for (Eigen::Index j = 0; j < samples; ++j) {
    const Complex x = std::polar(1.0, theta[static_cast<std::size_t>(j)]);
    e[j] = std::exp(i1 * k * x);
    ebar[j] = std::exp(i1 * std::conj(k) * std::conj(x));
  }
  const double w = 2.0 * kPi / static_cast<double>(samples);
  return {w * (patterns.cast<Complex>() * e), w * (patterns.cast<Complex>() * ebar)};
}

Matrix pattern_samples(const CurrentBasis& basis, std::span<const double> theta) {
  Matrix g(basis.size(), static_cast<Eigen::Index>(theta.size()));
  for (int l = 0; l < basis.size(); ++l) {
    const auto row = basis.sample(l, theta);
    for (std::size_t j = 0; j < row.size(); ++j) g(l, static_cast<Eigen::Index>(j)) = row[j];
  }
  return g;
}

Matrix dtn_difference(const DtNMatrix& dtn, const CurrentBasis& basis) {
  if (dtn.entries.rows() != basis.size() || dtn.entries.cols() != basis.size()) {
    throw std::invalid_argument("scattering transform: DtN size does not match the current basis");
  }
  return dtn.entries - dtn_homogeneous(basis).entries;
}

}  // namespace

Complex scattering_point(const DtNMatrix& dtn, Complex k, const CurrentBasis& basis, int samples) {
  const Matrix diff = dtn_difference(dtn, basis);
  const auto theta = equispaced_angles(static_cast<std::size_t>(samples));
  const auto c = exp_coefficients(pattern_samples(basis, theta), theta, k);
  return c.conjugate.transpose() * (diff.cast<Complex>() * c.plain);
}

ScatteringTransform scattering_transform_exp(const DtNMatrix& dtn, const KGrid& grid,
                                             const CurrentBasis& basis, int samples) {
  const Matrix diff = dtn_difference(dtn, basis);
  const auto theta = equispaced_angles(static_cast<std::size_t>(samples));
  const Matrix g = pattern_samples(basis, theta);
  const Eigen::MatrixXcd cdiff = diff.cast<Complex>();
  ScatteringTransform t{grid, std::vector<Complex>(static_cast<std::size_t>(grid.size()) * grid.size())};
  const std::size_t zero = grid.flat(grid.origin(), grid.origin());
  for (std::size_t idx : grid.active_points()) {
    if (idx == zero) continue;
    const int i = static_cast<int>(idx / static_cast<std::size_t>(grid.size()));
    const int j = static_cast<int>(idx % static_cast<std::size_t>(grid.size()));
    const auto c = exp_coefficients(g, theta, grid.point(i, j));
    t.values[idx] = c.conjugate.transpose() * (cdiff * c.plain);
  }
  return t;
}

struct DbarSolver::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

DbarSolver::DbarSolver(ScatteringTransform t, DbarSolverSettings settings)
    : t_(std::move(t)), settings_(settings), plans_(std::make_unique<Plans>()) {
  const int n = t_.grid.size();
  const auto total = static_cast<std::size_t>(n) * n;
  if (t_.values.size() != total) throw std::invalid_argument("DbarSolver: transform does not match its grid");
  if (settings_.restart < 1 || settings_.max_iterations < 1 || !(settings_.tolerance > 0.0)) {
    throw std::invalid_argument("DbarSolver: invalid solver settings");
  }
  FftwBuffer in(total), out(total);
  {
    std::lock_guard lock(planner_mutex());
    plans_->forward = fftw_plan_dft_2d(n, n, in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->backward = fftw_plan_dft_2d(n, n, in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (!plans_->forward || !plans_->backward) throw std::runtime_error("DbarSolver: FFT planning failed");

  // Kernel 1/(pi k) at grid offsets wrapped into [-N/2, N/2), zero at k = 0,
  // with the quadrature weight h^2 and the inverse-FFT scaling folded in.
  const double h = t_.grid.step();
  const double scale = h * h / static_cast<double>(total);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const int da = a < n / 2 ? a : a - n;
      const int db = b < n / 2 ? b : b - n;
      const Complex k(da * h, db * h);
      in[static_cast<std::size_t>(a) * n + b] = (da == 0 && db == 0) ? Complex{} : scale / (kPi * k);
    }
  }
  fftw_execute_dft(plans_->forward, in.data, out.data);
  kernel_hat_.assign(out.begin(), out.end());
}

DbarSolver::~DbarSolver() = default;

DbarSolver::Solution DbarSolver::solve_at(Point x) const {
  const auto& grid = t_.grid;
  const auto& active = grid.active_points();
  const auto m = static_cast<Eigen::Index>(active.size());
  const int n = grid.size();
  const auto total = static_cast<std::size_t>(n) * n;

  // T(k) = t(k) e_{-k}(x) / (4 pi conj(k)) on the active points.
  const Complex xc(x.x, x.y);
  std::vector<Complex> weight(active.size());
  bool zero = true;
  for (std::size_t p = 0; p < active.size(); ++p) {
    const Complex tv = t_.values[active[p]];
    if (tv == Complex{}) continue;
    const auto i = static_cast<int>(active[p] / static_cast<std::size_t>(n));
    const auto j = static_cast<int>(active[p] % static_cast<std::size_t>(n));
    const Complex k = grid.point(i, j);
    weight[p] = tv * std::polar(1.0, -2.0 * (k * xc).real()) / (4.0 * kPi * std::conj(k));
    zero = false;
  }
  if (zero) return {Complex(1.0, 0.0), 0, 0.0};

  // Only the active entries of `field` are ever written, so the rest stays zero.
  FftwBuffer field(total), spectrum(total), result_field(total);
  // v -> v - C[T conj(v)] on stacked (Re, Im) unknowns.
  auto apply = [&](const Vector& v) {
    for (Eigen::Index p = 0; p < m; ++p) {
      const Complex w = weight[static_cast<std::size_t>(p)];
      const double re = v[p], im = -v[m + p];
      field[active[static_cast<std::size_t>(p)]] = {w.real() * re - w.imag() * im, w.real() * im + w.imag() * re};
    }
    fftw_execute_dft(plans_->forward, field.data, spectrum.data);
    for (std::size_t q = 0; q < total; ++q) {
      const Complex a = spectrum[q], b = kernel_hat_[q];
      spectrum[q] = {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
    }
    fftw_execute_dft(plans_->backward, spectrum.data, result_field.data);
    Vector out(2 * m);
    for (Eigen::Index p = 0; p < m; ++p) {
      const Complex c = result_field[active[static_cast<std::size_t>(p)]];
      out[p] = v[p] - c.real();
      out[m + p] = v[m + p] - c.imag();
    }
    return out;
  };

  Vector rhs = Vector::Zero(2 * m);
  rhs.head(m).setOnes();
  const auto result = gmres(apply, rhs, rhs, settings_.restart, settings_.max_iterations, settings_.tolerance);
  if (!result.converged) {
    throw SolverError("D-bar solve did not converge", result.residual);
  }
  const std::size_t origin = grid.flat(grid.origin(), grid.origin());
  const auto pos = static_cast<Eigen::Index>(std::lower_bound(active.begin(), active.end(), origin) - active.begin());
  return {Complex(result.x[pos], result.x[m + pos]), result.iterations, result.residual};
}

Complex solve_dbar_at(Point x, const ScatteringTransform& t, DbarSolverSettings settings) {
  return DbarSolver(t, settings).solve_at(x).mu0;
}

double cutoff_radius(double delta) {
  if (!(delta >= 0.0)) throw std::invalid_argument("cutoff_radius: noise level must be nonnegative");
  if (delta <= 0.01) return 5.0 - 50.0 * delta;
  if (delta <= 0.05) return 4.5 - 12.5 * (delta - 0.01);
  return 4.0;
}

DbarResult reconstruct_dbar(const DtNMatrix& dtn, double delta, const DbarSettings& settings) {
  DbarResult result;
  result.radius = settings.radius > 0.0 ? settings.radius : cutoff_radius(delta);
  const KGrid grid(result.radius, settings.exponent);
  const DbarSolver solver(scattering_transform_exp(dtn, grid), settings.solver);

  std::vector<int> pixels;
  for (int r = 0; r < PixelImage::kSize; ++r) {
    for (int c = 0; c < PixelImage::kSize; ++c) {
      if (PixelImage::on_mask(r, c)) pixels.push_back(r * PixelImage::kSize + c);
    }
  }
  std::vector<DbarSolver::Solution> solutions(pixels.size());
  std::vector<char> failed(pixels.size(), 0);
  parallel_for(pixels.size(), settings.threads, [&](std::size_t p) {
    const int r = pixels[p] / PixelImage::kSize, c = pixels[p] % PixelImage::kSize;
    try {
      solutions[p] = solver.solve_at(PixelImage::pixel_center(r, c));
    } catch (const SolverError&) {
      failed[p] = 1;
    }
  });

  for (std::size_t p = 0; p < pixels.size(); ++p) {
    if (failed[p]) {
      ++result.failed_pixels;
      continue;
    }
    const auto& s = solutions[p];
    result.total_iterations += s.iterations;
    result.max_iterations = std::max(result.max_iterations, s.iterations);
    result.max_imag = std::max(result.max_imag, std::abs(s.mu0.imag()));
    result.image.values[static_cast<std::size_t>(pixels[p])] = clamp_conductivity(s.mu0.real() * s.mu0.real());
  }
  if (result.failed_pixels * 100 > static_cast<int>(pixels.size())) {
    throw SolverError("D-bar: too many pixels failed to converge", result.failed_pixels);
  }
  return result;
}

}  // namespace eit
