#pragma once

#include <span>
#include <vector>

namespace eit {

/// Angles 2*pi*j/count, j = 0..count-1.
std::vector<double> equispaced_angles(std::size_t count);

/// Real trigonometric interpolant of samples taken at equispaced angles
/// starting at theta = 0. For an even sample count the Nyquist cosine term
/// carries half weight, so the interpolant reproduces the samples exactly.
class TrigSeries {
 public:
  TrigSeries() = default;
  explicit TrigSeries(std::span<const double> samples);

  double operator()(double theta) const;
  std::vector<double> evaluate(std::span<const double> thetas) const;

  double mean() const { return constant_; }
  std::size_t max_mode() const { return cos_.size(); }
  /// Coefficient of cos(n theta) / sin(n theta), n >= 1.
  double cos_coeff(std::size_t n) const { return cos_[n - 1]; }
  double sin_coeff(std::size_t n) const { return sin_[n - 1]; }

  /// Multiply mode n by weight(n); mode 0 by weight(0).
  template <class W>
  TrigSeries filtered(W&& weight) const {
    TrigSeries out = *this;
    out.constant_ *= weight(std::size_t{0});
    for (std::size_t n = 1; n <= cos_.size(); ++n) {
      const double w = weight(n);
      out.cos_[n - 1] *= w;
      out.sin_[n - 1] *= w;
    }
    return out;
  }

 private:
  double constant_ = 0.0;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

}  // namespace eit
