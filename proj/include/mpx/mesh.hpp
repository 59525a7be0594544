#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpx/types.hpp"

namespace mpx {

/// Uniform periodic partition of [0, L). Node N is identified with node 0.
struct Mesh1D {
  double domain_length = 0.0;
  int n_nodes = 0;
  double h = 0.0;
  std::vector<double> node_coords;
  bool periodic = true;

  /// Measure of cell i, spanning nodes i and (i + 1) mod N.
  double cell_measure(int /*cell*/) const { return h; }
  int n_cells() const { return n_nodes; }
};

enum class Geometry { Torus, Sphere };

/// Flat-triangle surface mesh.
///
/// Triangles index into `vertices`. For the torus the vertex list is the
/// unwrapped (nx+1)x(ny+1) grid so every triangle has valid planar
/// coordinates; `periodic_map` sends each of those vertices to its degree of
/// freedom in [0, nx*ny). For the sphere `periodic_map` is the identity.
struct TriMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> periodic_map;
  Geometry geometry = Geometry::Torus;
  int n_dofs = 0;

  double triangle_area(int t) const;
  /// Unit normal from the counter-clockwise vertex order.
  Point3 triangle_normal(int t) const;
  double total_area() const;
  /// Number of distinct edges after periodic identification.
  int count_edges() const;
  int euler_characteristic() const;
  /// Mean edge length over all triangles.
  double mean_edge_length() const;
};

Mesh1D build_periodic_interval(double domain_length, int n_cells);
TriMesh build_torus_mesh(double lx, double ly, int nx, int ny);
TriMesh build_icosphere(int subdivisions);

/// Plain text: "V F", V lines "x y z", F lines of 0-based vertex triples.
void write_mesh(std::ostream& out, const TriMesh& mesh);
void write_mesh(std::ostream& out, const Mesh1D& mesh);
void write_mesh(const std::string& path, const TriMesh& mesh);
void write_mesh(const std::string& path, const Mesh1D& mesh);

}  // namespace mpx
