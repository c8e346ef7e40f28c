#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "eit/common.hpp"
#include "eit/forward.hpp"
#include "eit/mesh.hpp"

namespace eit {

struct Ellipse {
  Point center;
  double a = 0.0;      // semi-major axis
  double b = 0.0;      // semi-minor axis, 0 < b <= a
  double alpha = 0.0;  // rotation angle in radians

  /// Coordinates of p in the ellipse frame (rotated by -alpha about the center).
  Point to_local(Point p) const;
  bool contains(Point p) const;
};

struct ConstantPayload {
  double value = 1.0;
};

/// s(f(x', y')) with f = (sin(kx x') + sin(ky y')) / 2 and s mapping [-1, 1]
/// affinely onto [lo, hi].
struct TexturedPayload {
  double kx = 0.0;
  double ky = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct Inclusion {
  Ellipse ellipse;
  std::variant<ConstantPayload, TexturedPayload> payload;

  /// Conductivity at p, assuming p lies inside the ellipse.
  double value_at(Point p) const;
};

struct Phantom {
  std::vector<Inclusion> inclusions;
  double background = 1.0;
};

/// Row-major 64x64 grid on [-1, 1]^2. Row i holds y = -1 + (i + 1/2)/32,
/// column j holds x = -1 + (j + 1/2)/32. Pixels whose center lies outside the
/// closed unit disk are off-mask and carry 1.0.
struct PixelImage {
  static constexpr int kSize = 64;

  std::vector<double> values = std::vector<double>(kSize * kSize, 1.0);

  static Point pixel_center(int row, int col);
  static bool on_mask(int row, int col);
  static const std::vector<char>& mask();
  static int mask_count();

  double& at(int row, int col) { return values[static_cast<std::size_t>(row * kSize + col)]; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row * kSize + col)]; }
};

/// Containment radius for every inclusion: |center| + a <= 0.9.
inline constexpr double kContainmentRadius = 0.9;
/// Extra clearance between circumscribed circles in the overlap test.
inline constexpr double kOverlapMargin = 0.05;

/// Conservative overlap test: two ellipses count as disjoint only if their
/// centers are at least a1 + a2 + kOverlapMargin apart.
bool ellipses_overlap(const Ellipse& e1, const Ellipse& e2);

/// Random phantom with 1..max_inclusions non-overlapping elliptical
/// inclusions; constant or textured payloads. Deterministic in seed.
/// Throws std::invalid_argument for max_inclusions outside [1, 6] and
/// std::runtime_error after 10,000 rejected ellipse draws.
Phantom sample_phantom(std::uint64_t seed, int max_inclusions, bool textured);

double eval_sigma(const Phantom& phantom, Point p);

PixelImage rasterize(const Phantom& phantom);

/// Nodal field on `mesh` sampled at the on-mask pixel centers; off-mask pixels
/// get `off_mask`.
PixelImage mesh_to_pixels(const DiskMesh& mesh, const Vector& field, double off_mask = 1.0);

/// Nodal conductivity, clamped to the admissible set.
ConductivityField phantom_to_mesh(const Phantom& phantom, const DiskMesh& mesh);

}  // namespace eit
