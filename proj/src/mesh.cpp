#include "mpx/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

namespace mpx {

Mesh1D build_periodic_interval(double domain_length, int n_cells) {
  if (!(domain_length > 0.0)) {
    throw std::invalid_argument("build_periodic_interval: domain length must be positive");
  }
  if (n_cells < 3) {
    throw std::invalid_argument("build_periodic_interval: need at least 3 cells");
  }
  Mesh1D mesh;
  mesh.domain_length = domain_length;
  mesh.n_nodes = n_cells;
  mesh.h = domain_length / n_cells;
  mesh.node_coords.resize(n_cells);
  for (int i = 0; i < n_cells; ++i) mesh.node_coords[i] = i * mesh.h;
  return mesh;
}

TriMesh build_torus_mesh(double lx, double ly, int nx, int ny) {
  if (!(lx > 0.0) || !(ly > 0.0)) {
    throw std::invalid_argument("build_torus_mesh: side lengths must be positive");
  }
  if (nx < 3 || ny < 3) {
    throw std::invalid_argument("build_torus_mesh: need nx, ny >= 3");
  }
  TriMesh mesh;
  mesh.geometry = Geometry::Torus;
  mesh.n_dofs = nx * ny;
  const double hx = lx / nx;
  const double hy = ly / ny;
  auto raw = [nx](int i, int j) { return j * (nx + 1) + i; };

  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  mesh.periodic_map.reserve(mesh.vertices.capacity());
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Exact endpoints so the summed area is lx*ly to rounding.
      const double x = i == nx ? lx : i * hx;
      const double y = j == ny ? ly : j * hy;
      mesh.vertices.emplace_back(x, y, 0.0);
      mesh.periodic_map.push_back((j % ny) * nx + (i % nx));
    }
  }
  mesh.triangles.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = raw(i, j), v10 = raw(i + 1, j);
      const int v11 = raw(i + 1, j + 1), v01 = raw(i, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

TriMesh build_icosphere(int subdivisions) {
  if (subdivisions < 0) {
    throw std::invalid_argument("build_icosphere: subdivisions must be >= 0");
  }
  TriMesh mesh;
  mesh.geometry = Geometry::Sphere;

  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::array<Point3, 12> base = {
      Point3(-1, phi, 0), Point3(1, phi, 0),  Point3(-1, -phi, 0), Point3(1, -phi, 0),
      Point3(0, -1, phi), Point3(0, 1, phi),  Point3(0, -1, -phi), Point3(0, 1, -phi),
      Point3(phi, 0, -1), Point3(phi, 0, 1),  Point3(-phi, 0, -1), Point3(-phi, 0, 1)};
  for (const auto& p : base) mesh.vertices.push_back(p.normalized());
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int id = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> refined;
    refined.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
      const int ab = mid(t[0], t[1]);
      const int bc = mid(t[1], t[2]);
      const int ca = mid(t[2], t[0]);
      refined.push_back({t[0], ab, ca});
      refined.push_back({t[1], bc, ab});
      refined.push_back({t[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(refined);
  }
  mesh.n_dofs = static_cast<int>(mesh.vertices.size());
  mesh.periodic_map.resize(mesh.vertices.size());
  for (int i = 0; i < mesh.n_dofs; ++i) mesh.periodic_map[i] = i;
  return mesh;
}

double TriMesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  const Point3 e1 = vertices[tri[1]] - vertices[tri[0]];
  const Point3 e2 = vertices[tri[2]] - vertices[tri[0]];
  return 0.5 * e1.cross(e2).norm();
}

Point3 TriMesh::triangle_normal(int t) const {
  const auto& tri = triangles[t];
  const Point3 e1 = vertices[tri[1]] - vertices[tri[0]];
  const Point3 e2 = vertices[tri[2]] - vertices[tri[0]];
  return e1.cross(e2).normalized();
}

double TriMesh::total_area() const {
  double sum = 0.0;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t) sum += triangle_area(t);
  return sum;
}

int TriMesh::count_edges() const {
  std::set<std::pair<int, int>> edges;
  for (const auto& tri : triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = periodic_map[tri[k]];
      const int b = periodic_map[tri[(k + 1) % 3]];
      edges.insert(std::minmax(a, b));
    }
  }
  return static_cast<int>(edges.size());
}

int TriMesh::euler_characteristic() const {
  return n_dofs - count_edges() + static_cast<int>(triangles.size());
}

double TriMesh::mean_edge_length() const {
  double sum = 0.0;
  for (const auto& tri : triangles) {
    for (int k = 0; k < 3; ++k) sum += (vertices[tri[(k + 1) % 3]] - vertices[tri[k]]).norm();
  }
  return sum / (3.0 * static_cast<double>(triangles.size()));
}

void write_mesh(std::ostream& out, const TriMesh& mesh) {
  out << std::setprecision(17);
  out << mesh.vertices.size() << ' ' << mesh.triangles.size() << '\n';
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_mesh(std::ostream& out, const Mesh1D& mesh) {
  // Cells as degenerate triples so the same reader handles both layouts.
  out << std::setprecision(17);
  out << mesh.n_nodes << ' ' << mesh.n_cells() << '\n';
  for (double x : mesh.node_coords) out << x << " 0 0\n";
  for (int i = 0; i < mesh.n_cells(); ++i) {
    const int j = (i + 1) % mesh.n_nodes;
    out << i << ' ' << j << ' ' << j << '\n';
  }
}

namespace {
template <typename M>
void write_mesh_file(const std::string& path, const M& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open mesh output file: " + path);
  write_mesh(out, mesh);
}
}  // namespace

void write_mesh(const std::string& path, const TriMesh& mesh) { write_mesh_file(path, mesh); }
void write_mesh(const std::string& path, const Mesh1D& mesh) { write_mesh_file(path, mesh); }

}  // namespace mpx
