#include "eit/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <unordered_map>

namespace eit {

namespace {

double signed_area(Point a, Point b, Point c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

// > 0 when d lies strictly inside the circumcircle of the CCW triangle abc.
double incircle(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

struct Ring {
  int first = 0;
  int count = 0;
  double offset = 0.0;  // angle of the first node
};

// Connect two concentric rings by walking both in angle order.
void zip_rings(const Ring& inner, const Ring& outer, std::vector<Triangle>& tris) {
  int p = 0, q = 0;
  const double di = 2.0 * kPi / inner.count;
  const double dq = 2.0 * kPi / outer.count;
  while (p < inner.count || q < outer.count) {
    const double next_inner = inner.offset + di * (p + 1);
    const double next_outer = outer.offset + dq * (q + 1);
    const int ip = inner.first + p % inner.count;
    const int oq = outer.first + q % outer.count;
    if (q == outer.count || (p < inner.count && next_inner < next_outer)) {
      tris.push_back({ip, inner.first + (p + 1) % inner.count, oq});
      ++p;
    } else {
      tris.push_back({ip, outer.first + (q + 1) % outer.count, oq});
      ++q;
    }
  }
}

void make_ccw(const std::vector<Point>& nodes, std::vector<Triangle>& tris) {
  for (auto& t : tris) {
    if (signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) < 0.0) std::swap(t[1], t[2]);
  }
}

// Lawson edge flips until every interior edge is locally Delaunay.
void delaunay_flips(const std::vector<Point>& nodes, std::vector<Triangle>& tris) {
  for (int pass = 0; pass < 1000; ++pass) {
    std::unordered_map<std::uint64_t, std::array<int, 2>> edges;
    edges.reserve(tris.size() * 2);
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
      for (int i = 0; i < 3; ++i) {
        auto [it, fresh] = edges.try_emplace(edge_key(tris[t][i], tris[t][(i + 1) % 3]),
                                             std::array<int, 2>{t, -1});
        if (!fresh) it->second[1] = t;
      }
    }
    std::vector<char> dirty(tris.size(), 0);
    bool flipped = false;
    for (int t1 = 0; t1 < static_cast<int>(tris.size()); ++t1) {
      for (int i = 0; i < 3 && !dirty[t1]; ++i) {
        const int a = tris[t1][i], b = tris[t1][(i + 1) % 3], c = tris[t1][(i + 2) % 3];
        const auto& owners = edges.at(edge_key(a, b));
        if (owners[1] < 0) continue;
        const int t2 = owners[0] == t1 ? owners[1] : owners[0];
        if (t2 < t1 || dirty[t2]) continue;
        int d = -1;
        for (int v : tris[t2]) {
          if (v != a && v != b) d = v;
        }
        const double scale = std::pow(distance(nodes[a], nodes[b]), 4);
        if (incircle(nodes[a], nodes[b], nodes[c], nodes[d]) <= 1e-10 * scale) continue;
        tris[t1] = {a, d, c};
        tris[t2] = {d, b, c};
        dirty[t1] = dirty[t2] = 1;
        flipped = true;
      }
    }
    if (!flipped) return;
  }
}

}  // namespace

DiskMesh build_disk_mesh(double h) {
  if (!(h >= 0.005 && h <= 0.2)) {
    throw std::invalid_argument("build_disk_mesh: h must lie in [0.005, 0.2], got " +
                                std::to_string(h));
  }
  DiskMesh mesh;
  mesh.h_ = h;
  const int rings = static_cast<int>(std::ceil(1.0 / h - 1e-9));

  mesh.nodes_.push_back({0.0, 0.0});
  std::vector<Ring> layout;
  for (int j = 1; j <= rings; ++j) {
    const double r = static_cast<double>(j) / rings;
    Ring ring;
    ring.first = static_cast<int>(mesh.nodes_.size());
    ring.count = std::max(6, static_cast<int>(std::ceil(2.0 * kPi * r / h - 1e-9)));
    const double spacing = 2.0 * kPi / ring.count;
    ring.offset = (j < rings && j % 2 == 1) ? 0.5 * spacing : 0.0;
    for (int i = 0; i < ring.count; ++i) {
      const double theta = ring.offset + spacing * i;
      if (j == rings) {
        // Boundary ring sits exactly on the unit circle.
        mesh.nodes_.push_back({std::cos(theta), std::sin(theta)});
      } else {
        mesh.nodes_.push_back({r * std::cos(theta), r * std::sin(theta)});
      }
    }
    layout.push_back(ring);
  }

  const Ring& first = layout.front();
  for (int i = 0; i < first.count; ++i) {
    mesh.triangles_.push_back({0, first.first + i, first.first + (i + 1) % first.count});
  }
  for (std::size_t j = 0; j + 1 < layout.size(); ++j) zip_rings(layout[j], layout[j + 1], mesh.triangles_);
  make_ccw(mesh.nodes_, mesh.triangles_);
  delaunay_flips(mesh.nodes_, mesh.triangles_);

  const Ring& outer = layout.back();
  for (int i = 0; i < outer.count; ++i) {
    mesh.boundary_.push_back(outer.first + i);
    mesh.boundary_angles_.push_back(2.0 * kPi * i / outer.count);
  }
  mesh.finalize();
  return mesh;
}

void DiskMesh::finalize() {
  const std::size_t nt = triangles_.size();
  areas_.resize(nt);
  grads_.resize(nt);
  lumped_mass_ = Vector::Zero(static_cast<Eigen::Index>(nodes_.size()));
  for (std::size_t t = 0; t < nt; ++t) {
    const Point p0 = nodes_[triangles_[t][0]];
    const Point p1 = nodes_[triangles_[t][1]];
    const Point p2 = nodes_[triangles_[t][2]];
    const double a = signed_area(p0, p1, p2);
    if (!(a > 0.0)) throw std::logic_error("DiskMesh: non-positive triangle area");
    areas_[t] = a;
    const double s = 1.0 / (2.0 * a);
    grads_[t][0] = {(p1.y - p2.y) * s, (p2.x - p1.x) * s};
    grads_[t][1] = {(p2.y - p0.y) * s, (p0.x - p2.x) * s};
    grads_[t][2] = {(p0.y - p1.y) * s, (p1.x - p0.x) * s};
    for (int v : triangles_[t]) lumped_mass_[v] += a / 3.0;
  }

  const std::size_t nb = boundary_.size();
  boundary_weights_.assign(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    const double len = distance(nodes_[boundary_[i]], nodes_[boundary_[(i + 1) % nb]]);
    boundary_weights_[i] += 0.5 * len;
    boundary_weights_[(i + 1) % nb] += 0.5 * len;
  }
  boundary_pos_.assign(nodes_.size(), -1);
  for (std::size_t i = 0; i < nb; ++i) boundary_pos_[boundary_[i]] = static_cast<int>(i);
}

Point DiskMesh::element_gradient(std::size_t t, const Vector& field) const {
  Point g;
  for (int v = 0; v < 3; ++v) {
    const double f = field[triangles_[t][v]];
    g.x += f * grads_[t][v].x;
    g.y += f * grads_[t][v].y;
  }
  return g;
}

double boundary_quadrature(const DiskMesh& mesh, std::span<const double> f,
                           std::span<const double> g) {
  const auto& w = mesh.boundary_weights();
  if (f.size() != w.size() || g.size() != w.size()) {
    throw std::invalid_argument("boundary_quadrature: expected one value per boundary node");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] * (f[i] * g[i]);
  return sum;
}

std::vector<double> boundary_trace(const DiskMesh& mesh, const Vector& field) {
  std::vector<double> trace;
  trace.reserve(mesh.num_boundary());
  for (int n : mesh.boundary_nodes()) trace.push_back(field[n]);
  return trace;
}

StiffnessAssembler::StiffnessAssembler(const DiskMesh& mesh) : mesh_(&mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(mesh.num_triangles() * 9);
  for (const auto& tri : mesh.triangles()) {
    for (int a : tri) {
      for (int b : tri) entries.emplace_back(a, b, 0.0);
    }
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(entries.begin(), entries.end());
  pattern_.makeCompressed();

  slots_.resize(mesh.num_triangles());
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        // Column-major: column tri[b], row tri[a].
        const int* begin = inner + outer[tri[b]];
        const int* end = inner + outer[tri[b] + 1];
        const int* it = std::lower_bound(begin, end, tri[a]);
        slots_[t][static_cast<std::size_t>(3 * a + b)] = static_cast<int>(it - inner);
      }
    }
  }
}

SparseMatrix StiffnessAssembler::assemble(std::span<const double> coeff) const {
  if (coeff.size() != mesh_->num_triangles()) {
    throw std::invalid_argument("StiffnessAssembler: one coefficient per triangle required");
  }
  SparseMatrix k = pattern_;
  double* values = k.valuePtr();
  for (std::size_t t = 0; t < coeff.size(); ++t) {
    const double scale = coeff[t] * mesh_->area(t);
    for (int a = 0; a < 3; ++a) {
      const Point ga = mesh_->grad_basis(t, a);
      for (int b = 0; b < 3; ++b) {
        const Point gb = mesh_->grad_basis(t, b);
        values[slots_[t][static_cast<std::size_t>(3 * a + b)]] += scale * (ga.x * gb.x + ga.y * gb.y);
      }
    }
  }
  return k;
}

SparseMatrix StiffnessAssembler::mass() const {
  SparseMatrix m = pattern_;
  double* values = m.valuePtr();
  for (std::size_t t = 0; t < mesh_->num_triangles(); ++t) {
    const double a = mesh_->area(t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        values[slots_[t][static_cast<std::size_t>(3 * i + j)]] += (i == j ? a / 6.0 : a / 12.0);
      }
    }
  }
  return m;
}

MeshLocator::MeshLocator(const DiskMesh& mesh, int buckets)
    : mesh_(&mesh), buckets_(buckets), cells_(static_cast<std::size_t>(buckets * buckets)) {
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    double x0 = 2.0, x1 = -2.0, y0 = 2.0, y1 = -2.0;
    for (int v : mesh.triangles()[t]) {
      const Point p = mesh.nodes()[v];
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    for (int by = bucket_index(y0); by <= bucket_index(y1); ++by) {
      for (int bx = bucket_index(x0); bx <= bucket_index(x1); ++bx) {
        cells_[static_cast<std::size_t>(by * buckets_ + bx)].push_back(static_cast<int>(t));
      }
    }
  }
}

int MeshLocator::bucket_index(double v) const {
  const int i = static_cast<int>(std::floor((v + 1.0) * 0.5 * buckets_));
  return std::clamp(i, 0, buckets_ - 1);
}

std::array<double, 3> MeshLocator::barycentric(int t, Point p) const {
  const auto& tri = mesh_->triangles()[static_cast<std::size_t>(t)];
  const auto& nodes = mesh_->nodes();
  const double a = mesh_->area(static_cast<std::size_t>(t));
  return {signed_area(p, nodes[tri[1]], nodes[tri[2]]) / a,
          signed_area(nodes[tri[0]], p, nodes[tri[2]]) / a,
          signed_area(nodes[tri[0]], nodes[tri[1]], p) / a};
}

MeshLocator::Hit MeshLocator::locate(Point p) const {
  const int bx = bucket_index(p.x), by = bucket_index(p.y);
  Hit best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int radius = 0; radius < buckets_; ++radius) {
    for (int y = std::max(0, by - radius); y <= std::min(buckets_ - 1, by + radius); ++y) {
      for (int x = std::max(0, bx - radius); x <= std::min(buckets_ - 1, bx + radius); ++x) {
        if (std::max(std::abs(x - bx), std::abs(y - by)) != radius) continue;
        for (int t : cells_[static_cast<std::size_t>(y * buckets_ + x)]) {
          const auto bary = barycentric(t, p);
          const double score = std::min({bary[0], bary[1], bary[2]});
          if (score >= -1e-12) return {t, bary};
          if (score > best_score) {
            best_score = score;
            best = {t, bary};
          }
        }
      }
    }
    if (best.triangle >= 0) return best;
  }
  throw std::logic_error("MeshLocator: empty mesh");
}

double MeshLocator::interpolate(const Vector& field, Point p) const {
  const Hit hit = locate(p);
  const auto& tri = mesh_->triangles()[static_cast<std::size_t>(hit.triangle)];
  return hit.bary[0] * field[tri[0]] + hit.bary[1] * field[tri[1]] + hit.bary[2] * field[tri[2]];
}

void write_mesh_text(std::ostream& os, const DiskMesh& mesh) {
  os.precision(17);
  os << "nodes " << mesh.num_nodes() << " triangles " << mesh.num_triangles() << " boundary "
     << mesh.num_boundary() << '\n';
  for (const Point& p : mesh.nodes()) os << p.x << ' ' << p.y << '\n';
  for (const auto& t : mesh.triangles()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (int b : mesh.boundary_nodes()) os << b << '\n';
}

}  // namespace eit
