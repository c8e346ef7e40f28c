#include "eit/phantom.hpp"

#include <random>
#include <stdexcept>

namespace eit {

namespace {

constexpr int kMaxRejections = 10000;

struct Range {
  double lo, hi;
};
constexpr Range kLowRange{0.2, 0.8};
constexpr Range kHighRange{1.2, 2.0};

}  // namespace

Point Ellipse::to_local(Point p) const {
  const double dx = p.x - center.x, dy = p.y - center.y;
  const double c = std::cos(alpha), s = std::sin(alpha);
  return {c * dx + s * dy, -s * dx + c * dy};
}

bool Ellipse::contains(Point p) const {
  const Point q = to_local(p);
  return (q.x / a) * (q.x / a) + (q.y / b) * (q.y / b) <= 1.0;
}

double Inclusion::value_at(Point p) const {
  if (const auto* c = std::get_if<ConstantPayload>(&payload)) return c->value;
  const auto& t = std::get<TexturedPayload>(payload);
  const Point q = ellipse.to_local(p);
  const double f = 0.5 * (std::sin(t.kx * q.x) + std::sin(t.ky * q.y));
  return t.lo + 0.5 * (f + 1.0) * (t.hi - t.lo);
}

bool ellipses_overlap(const Ellipse& e1, const Ellipse& e2) {
  return distance(e1.center, e2.center) < e1.a + e2.a + kOverlapMargin;
}

Phantom sample_phantom(std::uint64_t seed, int max_inclusions, bool textured) {
  if (max_inclusions < 1 || max_inclusions > 6) {
    throw std::invalid_argument("sample_phantom: max_inclusions must lie in [1, 6]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int n = std::uniform_int_distribution<int>(1, max_inclusions)(rng);
  Phantom phantom;
  int rejections = 0;
  while (static_cast<int>(phantom.inclusions.size()) < n) {
    Ellipse e;
    const double r = 0.8 * std::sqrt(unit(rng));
    const double phi = 2.0 * kPi * unit(rng);
    e.center = {r * std::cos(phi), r * std::sin(phi)};
    e.a = uniform(0.1, 0.35);
    e.b = uniform(0.08, e.a);
    e.alpha = uniform(0.0, kPi);

    bool ok = norm(e.center) + e.a <= kContainmentRadius;
    for (const auto& other : phantom.inclusions) ok = ok && !ellipses_overlap(e, other.ellipse);
    if (!ok) {
      if (++rejections >= kMaxRejections) {
        throw std::runtime_error("sample_phantom: could not place non-overlapping inclusions");
      }
      continue;
    }

    const Range range = unit(rng) < 0.5 ? kLowRange : kHighRange;
    Inclusion inc{e, ConstantPayload{}};
    if (textured) {
      const double kx = uniform(4.0, 10.0);
      const double ky = uniform(4.0, 10.0);
      inc.payload = TexturedPayload{kx, ky, range.lo, range.hi};
    } else {
      inc.payload = ConstantPayload{uniform(range.lo, range.hi)};
    }
    phantom.inclusions.push_back(inc);
  }
  return phantom;
}

double eval_sigma(const Phantom& phantom, Point p) {
  for (const auto& inc : phantom.inclusions) {
    if (inc.ellipse.contains(p)) return inc.value_at(p);
  }
  return phantom.background;
}

Point PixelImage::pixel_center(int row, int col) {
  const double step = 2.0 / kSize;
  return {-1.0 + (col + 0.5) * step, -1.0 + (row + 0.5) * step};
}

bool PixelImage::on_mask(int row, int col) {
  const Point p = pixel_center(row, col);
  return p.x * p.x + p.y * p.y <= 1.0;
}

const std::vector<char>& PixelImage::mask() {
  static const std::vector<char> m = [] {
    std::vector<char> out(kSize * kSize);
    for (int r = 0; r < kSize; ++r) {
      for (int c = 0; c < kSize; ++c) out[static_cast<std::size_t>(r * kSize + c)] = on_mask(r, c);
    }
    return out;
  }();
  return m;
}

int PixelImage::mask_count() {
  static const int count = [] {
    int n = 0;
    for (char m : mask()) n += m;
    return n;
  }();
  return count;
}

PixelImage rasterize(const Phantom& phantom) {
  PixelImage img;
  for (int r = 0; r < PixelImage::kSize; ++r) {
    for (int c = 0; c < PixelImage::kSize; ++c) {
      if (PixelImage::on_mask(r, c)) img.at(r, c) = eval_sigma(phantom, PixelImage::pixel_center(r, c));
    }
  }
  return img;
}

PixelImage mesh_to_pixels(const DiskMesh& mesh, const Vector& field, double off_mask) {
  const MeshLocator locator(mesh);
  PixelImage img;
  for (int r = 0; r < PixelImage::kSize; ++r) {
    for (int c = 0; c < PixelImage::kSize; ++c) {
      img.at(r, c) = PixelImage::on_mask(r, c) ? locator.interpolate(field, PixelImage::pixel_center(r, c))
                                               : off_mask;
    }
  }
  return img;
}

ConductivityField phantom_to_mesh(const Phantom& phantom, const DiskMesh& mesh) {
  Vector values(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    values[static_cast<Eigen::Index>(i)] = clamp_conductivity(eval_sigma(phantom, mesh.nodes()[i]));
  }
  return {mesh, std::move(values)};
}

}  // namespace eit
