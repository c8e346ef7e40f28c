#include "eit/boundary.hpp"

#include <cmath>
#include <stdexcept>

#include "eit/common.hpp"

namespace eit {

std::vector<double> equispaced_angles(std::size_t count) {
  std::vector<double> theta(count);
  for (std::size_t j = 0; j < count; ++j) theta[j] = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(count);
  return theta;
}

TrigSeries::TrigSeries(std::span<const double> samples) {
  const std::size_t b = samples.size();
  if (b < 2) throw std::invalid_argument("TrigSeries: need at least two samples");
  const std::size_t modes = b / 2;
  cos_.assign(modes, 0.0);
  sin_.assign(modes, 0.0);
  const auto theta = equispaced_angles(b);
  for (std::size_t j = 0; j < b; ++j) constant_ += samples[j];
  constant_ /= static_cast<double>(b);
  for (std::size_t n = 1; n <= modes; ++n) {
    const bool nyquist = (2 * n == b);
    const double scale = (nyquist ? 1.0 : 2.0) / static_cast<double>(b);
    double c = 0.0, s = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      const double arg = static_cast<double>(n) * theta[j];
      const double v = samples[j] - constant_;
      c += v * std::cos(arg);
      s += v * std::sin(arg);
    }
    cos_[n - 1] = scale * c;
    sin_[n - 1] = nyquist ? 0.0 : scale * s;
  }
}

double TrigSeries::operator()(double theta) const {
  double v = constant_;
  for (std::size_t n = 1; n <= cos_.size(); ++n) {
    const double arg = static_cast<double>(n) * theta;
    v += cos_[n - 1] * std::cos(arg) + sin_[n - 1] * std::sin(arg);
  }
  return v;
}

std::vector<double> TrigSeries::evaluate(std::span<const double> thetas) const {
  std::vector<double> out;
  out.reserve(thetas.size());
  for (double t : thetas) out.push_back((*this)(t));
  return out;
}

}  // namespace eit
