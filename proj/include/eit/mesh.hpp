#pragma once

#include <array>
#include <concepts>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "eit/common.hpp"

namespace eit {

using Triangle = std::array<int, 3>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Triangulation of the closed unit disk.
///
/// Nodes are seeded on concentric rings (boundary ring equispaced in angle
/// starting at theta = 0), connected ring by ring and then made Delaunay by
/// edge flips. The mesh is immutable after construction and caches the P1
/// element geometry used by every assembly routine.
class DiskMesh {
 public:
  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  /// Boundary node indices ordered by strictly increasing angle in [0, 2pi).
  const std::vector<int>& boundary_nodes() const { return boundary_; }
  /// Polar angle of each entry of boundary_nodes().
  const std::vector<double>& boundary_angles() const { return boundary_angles_; }
  /// Trapezoid weights on the boundary polygon, one per boundary node.
  const std::vector<double>& boundary_weights() const { return boundary_weights_; }
  double h() const { return h_; }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  std::size_t num_boundary() const { return boundary_.size(); }

  double area(std::size_t t) const { return areas_[t]; }
  /// Gradient of the P1 hat function of local vertex `v` on triangle `t`.
  Point grad_basis(std::size_t t, int v) const { return grads_[t][static_cast<std::size_t>(v)]; }
  /// Lumped mass: one third of the area of the triangles around each node.
  const Vector& lumped_mass() const { return lumped_mass_; }
  /// -1 for interior nodes, otherwise position in boundary_nodes().
  int boundary_position(int node) const { return boundary_pos_[static_cast<std::size_t>(node)]; }

  /// Element gradient of a nodal P1 field.
  Point element_gradient(std::size_t t, const Vector& field) const;

  friend DiskMesh build_disk_mesh(double h);

 private:
  void finalize();

  std::vector<Point> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<int> boundary_;
  std::vector<double> boundary_angles_;
  std::vector<double> boundary_weights_;
  std::vector<int> boundary_pos_;
  std::vector<double> areas_;
  std::vector<std::array<Point, 3>> grads_;
  Vector lumped_mass_;
  double h_ = 0.0;
};

/// Build a disk mesh with target size h, 0.005 <= h <= 0.2.
/// Throws std::invalid_argument otherwise.
DiskMesh build_disk_mesh(double h);

/// Trapezoid rule of f*g over the boundary polygon; f and g hold values at
/// the boundary nodes in boundary_nodes() order.
double boundary_quadrature(const DiskMesh& mesh, std::span<const double> f,
                           std::span<const double> g);

/// Same, with f and g evaluated at the boundary node angles.
template <std::invocable<double> F, std::invocable<double> G>
double boundary_quadrature(const DiskMesh& mesh, F&& f, G&& g) {
  const auto& theta = mesh.boundary_angles();
  const auto& w = mesh.boundary_weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) sum += w[i] * (f(theta[i]) * g(theta[i]));
  return sum;
}

/// Boundary values (in boundary_nodes() order) of a nodal field.
std::vector<double> boundary_trace(const DiskMesh& mesh, const Vector& field);

/// Stiffness matrix sum_e c_e |T_e| grad(phi_i).grad(phi_j) with per-element
/// coefficients c_e, on a fixed sparsity pattern so repeated assemblies are cheap.
class StiffnessAssembler {
 public:
  explicit StiffnessAssembler(const DiskMesh& mesh);

  SparseMatrix assemble(std::span<const double> element_coefficients) const;
  /// Consistent P1 mass matrix on the same pattern.
  SparseMatrix mass() const;

 private:
  const DiskMesh* mesh_;
  SparseMatrix pattern_;
  std::vector<std::array<int, 9>> slots_;
};

/// Point location on a mesh via a uniform bucket grid.
class MeshLocator {
 public:
  explicit MeshLocator(const DiskMesh& mesh, int buckets = 64);

  struct Hit {
    int triangle = -1;
    std::array<double, 3> bary{};
  };

  /// Containing triangle and barycentric coordinates. Points slightly outside
  /// the boundary polygon resolve to the nearest triangle (coordinates then
  /// extrapolate linearly).
  Hit locate(Point p) const;

  double interpolate(const Vector& field, Point p) const;

 private:
  std::array<double, 3> barycentric(int t, Point p) const;
  int bucket_index(double v) const;

  const DiskMesh* mesh_;
  int buckets_;
  std::vector<std::vector<int>> cells_;
};

/// Debug dump: `nodes N triangles T boundary B`, then coordinates, triangles,
/// and boundary indices.
void write_mesh_text(std::ostream& os, const DiskMesh& mesh);

}  // namespace eit
