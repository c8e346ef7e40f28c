#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace eit {

/// Lower admissible conductivity; the admissible set is [kLambda, 1/kLambda].
inline constexpr double kLambda = 0.05;

inline constexpr double kPi = std::numbers::pi;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a numerical solve fails or is too ill-conditioned to trust.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double diagnostic)
      : std::runtime_error(what), diagnostic_(diagnostic) {}

  /// Residual or condition estimate that triggered the failure.
  double diagnostic() const noexcept { return diagnostic_; }

 private:
  double diagnostic_;
};

inline double clamp_conductivity(double v) {
  return std::clamp(v, kLambda, 1.0 / kLambda);
}

// splitmix64 finalizer; used to derive independent RNG streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for stream `index` under `global_seed`, optionally salted by `stream`.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index,
                                 std::uint64_t stream = 0) {
  return splitmix64(splitmix64(splitmix64(global_seed) ^ index) ^ (stream * 0xD1B54A32D192ED03ull));
}

}  // namespace eit
