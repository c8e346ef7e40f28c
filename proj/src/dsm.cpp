#include "eit/dsm.hpp"

#include "eit/boundary.hpp"
#include "eit/parallel.hpp"

namespace eit {

namespace {

auto mode_weight(double gamma) {
  return [gamma](std::size_t n) { return n == 0 ? 0.0 : std::pow(static_cast<double>(n), 2.0 * gamma); };
}

std::vector<double> row_difference(const BoundaryVoltages& a, const BoundaryVoltages& b, int pattern) {
  if (a.samples.rows() != b.samples.rows() || a.samples.cols() != b.samples.cols()) {
    throw std::invalid_argument("cauchy_difference: data shapes differ");
  }
  if (pattern < 0 || pattern >= a.patterns()) throw std::out_of_range("cauchy_difference: pattern index");
  std::vector<double> d(static_cast<std::size_t>(a.count()));
  for (int j = 0; j < a.count(); ++j) d[static_cast<std::size_t>(j)] = a.samples(pattern, j) - b.samples(pattern, j);
  return d;
}

// L2(boundary) norm of a sampled trace after removing its mean.
double trace_norm(std::span<const double> d) {
  if (d.empty()) return 0.0;
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double sum = 0.0;
  for (double v : d) sum += (v - mean) * (v - mean);
  return std::sqrt(2.0 * kPi / static_cast<double>(d.size()) * sum);
}

}  // namespace

std::vector<double> fractional_boundary_laplacian(std::span<const double> trace, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("fractional_boundary_laplacian: gamma must be nonnegative");
  return TrigSeries(trace).filtered(mode_weight(gamma)).evaluate(equispaced_angles(trace.size()));
}

CauchyDifference cauchy_difference(const NeumannSolver& laplace, const BoundaryVoltages& data_sigma,
                                   const BoundaryVoltages& data_1, int pattern, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("cauchy_difference: gamma must be nonnegative");
  const auto diff = row_difference(data_sigma, data_1, pattern);
  const auto flux = TrigSeries(diff).filtered(mode_weight(gamma)).evaluate(laplace.mesh().boundary_angles());
  return {laplace.solve_mean_free(flux), pattern};
}

CauchyDifference cauchy_difference(const DiskMesh& mesh, const BoundaryVoltages& data_sigma,
                                   const BoundaryVoltages& data_1, int pattern, double gamma) {
  const NeumannSolver laplace(ConductivityField::constant(mesh, 1.0));
  return cauchy_difference(laplace, data_sigma, data_1, pattern, gamma);
}

double probe_seminorm(Point x, double gamma) {
  const double s = x.x * x.x + x.y * x.y;
  if (!(s < 1.0)) throw std::domain_error("probe_seminorm: point must lie inside the unit disk");
  if (gamma == 1.0) {
    const double d = 1.0 - s;
    return std::sqrt((1.0 + s * (11.0 + s * (11.0 + s))) / (kPi * d * d * d * d * d));
  }
  double sum = 0.0, power = 1.0;
  for (int n = 1; n < 10'000'000; ++n) {
    const double term = std::pow(static_cast<double>(n), 4.0 * gamma) * power;
    sum += term;
    if (term < 1e-17 * sum && static_cast<double>(n) * (1.0 - s) > 4.0 * gamma) break;
    power *= s;
  }
  return std::sqrt(sum / kPi);
}

IndexField index_field(const DiskMesh& mesh, std::span<const CauchyDifference> phis,
                       std::span<const std::vector<double>> data_diffs, double gamma, unsigned threads) {
  if (phis.empty() || phis.size() != data_diffs.size()) {
    throw std::invalid_argument("index_field: need one data difference per Cauchy difference");
  }
  std::vector<double> norms;
  for (const auto& d : data_diffs) norms.push_back(trace_norm(d));

  IndexField field;
  std::fill(field.values.values.begin(), field.values.values.end(), 0.0);
  field.zero_data = std::all_of(norms.begin(), norms.end(), [](double v) { return v == 0.0; });
  if (field.zero_data) return field;

  const MeshLocator locator(mesh);
  const auto count = static_cast<double>(phis.size());
  parallel_for(static_cast<std::size_t>(PixelImage::kSize), threads, [&](std::size_t row) {
    const int r = static_cast<int>(row);
    for (int c = 0; c < PixelImage::kSize; ++c) {
      if (!PixelImage::on_mask(r, c)) continue;
      const Point p = PixelImage::pixel_center(r, c);
      const auto t = static_cast<std::size_t>(locator.locate(p).triangle);
      double sum = 0.0;
      for (std::size_t l = 0; l < phis.size(); ++l) {
        if (norms[l] == 0.0) continue;
        sum += norm(mesh.element_gradient(t, phis[l].phi)) / norms[l];
      }
      field.values.at(r, c) = sum / (count * probe_seminorm(p, gamma));
    }
  });
  return field;
}

std::vector<double> export_phi_stack(const DiskMesh& mesh, std::span<const CauchyDifference> phis) {
  if (phis.empty()) throw std::invalid_argument("export_phi_stack: no Cauchy differences");
  std::vector<double> stack;
  stack.reserve(phis.size() * PixelImage::kSize * PixelImage::kSize);
  for (const auto& phi : phis) {
    const PixelImage slice = mesh_to_pixels(mesh, phi.phi, 0.0);
    stack.insert(stack.end(), slice.values.begin(), slice.values.end());
  }
  return stack;
}

DsmResult reconstruct_dsm(const BoundaryVoltages& data_sigma, const BoundaryVoltages& data_1,
                          const DiskMesh& mesh, double gamma, unsigned threads) {
  const NeumannSolver laplace(ConductivityField::constant(mesh, 1.0));
  DsmResult result;
  std::vector<std::vector<double>> diffs;
  for (int l = 0; l < data_sigma.patterns(); ++l) {
    result.phis.push_back(cauchy_difference(laplace, data_sigma, data_1, l, gamma));
    diffs.push_back(row_difference(data_sigma, data_1, l));
  }
  result.index = index_field(mesh, result.phis, diffs, gamma, threads);
  return result;
}

}  // namespace eit
