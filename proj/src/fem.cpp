#include "mpx/fem.hpp"

#include <stdexcept>

namespace mpx {

namespace {

TriangleElement make_element(const TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  TriangleElement e;
  const Point3& x0 = mesh.vertices[tri[0]];
  const Point3& x1 = mesh.vertices[tri[1]];
  const Point3& x2 = mesh.vertices[tri[2]];
  const Point3 cross = (x1 - x0).cross(x2 - x0);
  const double twice_area = cross.norm();
  if (!(twice_area > 0.0)) throw std::invalid_argument("P1Space: degenerate triangle");
  e.area = 0.5 * twice_area;
  e.normal = cross / twice_area;
  const std::array<const Point3*, 3> x = {&x0, &x1, &x2};
  for (int i = 0; i < 3; ++i) {
    // grad lambda_i = n x (x_{i+2} - x_{i+1}) / (2 |T|)
    const Point3 edge = *x[(i + 2) % 3] - *x[(i + 1) % 3];
    e.grads[i] = e.normal.cross(edge) / twice_area;
    e.dofs[i] = mesh.periodic_map[tri[i]];
  }
  return e;
}

SparseMatrix from_triplets(int n, const std::vector<Triplet>& trips) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

void require_1d(const P1Space& space, const char* what) {
  if (!space.is_1d()) throw std::invalid_argument(std::string(what) + ": requires a 1D space");
}

void require_2d(const P1Space& space, const char* what) {
  if (space.is_1d()) throw std::invalid_argument(std::string(what) + ": requires a surface space");
}

}  // namespace

P1Space::P1Space(Mesh1D mesh) : mesh_(std::move(mesh)) {
  const auto& m = std::get<Mesh1D>(mesh_);
  n_dofs_ = m.n_nodes;
  dof_coords_.reserve(n_dofs_);
  for (double x : m.node_coords) dof_coords_.emplace_back(x, 0.0, 0.0);
}

P1Space::P1Space(TriMesh mesh) : mesh_(std::move(mesh)) {
  const auto& m = std::get<TriMesh>(mesh_);
  n_dofs_ = m.n_dofs;
  dof_coords_.assign(n_dofs_, Point3::Zero());
  std::vector<bool> seen(n_dofs_, false);
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    const int d = m.periodic_map[v];
    if (!seen[d]) {
      dof_coords_[d] = m.vertices[v];
      seen[d] = true;
    }
  }
  elements_.reserve(m.triangles.size());
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    elements_.push_back(make_element(m, t));
  }
}

const Mesh1D& P1Space::mesh_1d() const { return std::get<Mesh1D>(mesh_); }
const TriMesh& P1Space::tri_mesh() const { return std::get<TriMesh>(mesh_); }

double P1Space::measure() const {
  if (is_1d()) return mesh_1d().domain_length;
  double sum = 0.0;
  for (const auto& e : elements_) sum += e.area;
  return sum;
}

SparseMatrix assemble_mass(const P1Space& space) {
  std::vector<Triplet> trips;
  const int n = space.n_dofs();
  if (space.is_1d()) {
    const double h = space.mesh_1d().h;
    for (int c = 0; c < n; ++c) {
      const int i = c, j = (c + 1) % n;
      trips.emplace_back(i, i, h / 3.0);
      trips.emplace_back(j, j, h / 3.0);
      trips.emplace_back(i, j, h / 6.0);
      trips.emplace_back(j, i, h / 6.0);
    }
  } else {
    for (const auto& e : space.elements()) {
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) {
          trips.emplace_back(e.dofs[p], e.dofs[q], e.area * (p == q ? 2.0 : 1.0) / 12.0);
        }
      }
    }
  }
  return from_triplets(n, trips);
}

SparseMatrix assemble_stiffness(const P1Space& space) {
  std::vector<Triplet> trips;
  const int n = space.n_dofs();
  if (space.is_1d()) {
    const double h = space.mesh_1d().h;
    for (int c = 0; c < n; ++c) {
      const int i = c, j = (c + 1) % n;
      trips.emplace_back(i, i, 1.0 / h);
      trips.emplace_back(j, j, 1.0 / h);
      trips.emplace_back(i, j, -1.0 / h);
      trips.emplace_back(j, i, -1.0 / h);
    }
  } else {
    for (const auto& e : space.elements()) {
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) {
          trips.emplace_back(e.dofs[p], e.dofs[q], e.area * e.grads[p].dot(e.grads[q]));
        }
      }
    }
  }
  return from_triplets(n, trips);
}

SparseMatrix assemble_advection_1d(const P1Space& space) {
  require_1d(space, "assemble_advection_1d");
  const int n = space.n_dofs();
  std::vector<Triplet> trips;
  // On a cell [x_i, x_j]: d_x v_i = -1/h, d_x v_j = 1/h, int v = h/2.
  for (int c = 0; c < n; ++c) {
    const int i = c, j = (c + 1) % n;
    trips.emplace_back(i, i, -0.5);
    trips.emplace_back(i, j, 0.5);
    trips.emplace_back(j, i, -0.5);
    trips.emplace_back(j, j, 0.5);
  }
  return from_triplets(n, trips);
}

TrilinearForm assemble_trilinear_kdv(const P1Space& space) {
  require_1d(space, "assemble_trilinear_kdv");
  const int n = space.n_dofs();
  const double h = space.mesh_1d().h;
  // int_cell l^p m^q = h p! q! / (p + q + 1)!  for the two hats l, m of a cell.
  const double c3 = h / 4.0;   // l^3
  const double c21 = h / 12.0;  // l^2 m
  std::vector<TrilinearForm::Entry> entries;
  entries.reserve(8 * static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    const std::array<int, 2> node = {c, (c + 1) % n};
    for (int p = 0; p < 2; ++p) {
      for (int q = 0; q < 2; ++q) {
        for (int r = 0; r < 2; ++r) {
          const int same = (p == 0) + (q == 0) + (r == 0);
          const double v = (same == 0 || same == 3) ? c3 : c21;
          entries.push_back({node[p], node[q], node[r], v});
        }
      }
    }
  }
  return TrilinearForm(n, std::move(entries));
}

SparseMatrix assemble_ns_poisson_tensor(const P1Space& space, const Vector& a) {
  require_2d(space, "assemble_ns_poisson_tensor");
  if (a.size() != space.n_dofs()) {
    throw std::invalid_argument("assemble_ns_poisson_tensor: state size mismatch");
  }
  std::vector<Triplet> trips;
  trips.reserve(space.elements().size() * 9);
  for (const auto& e : space.elements()) {
    const Point3 grad_w = a(e.dofs[0]) * e.grads[0] + a(e.dofs[1]) * e.grads[1] +
                          a(e.dofs[2]) * e.grads[2];
    // {v_j, w} is constant on the element; <const, v_i> = const |T| / 3.
    for (int q = 0; q < 3; ++q) {
      const double bracket = e.normal.dot(e.grads[q].cross(grad_w)) * e.area / 3.0;
      for (int p = 0; p < 3; ++p) trips.emplace_back(e.dofs[p], e.dofs[q], bracket);
    }
  }
  return from_triplets(space.n_dofs(), trips);
}

Vector apply_ns_poisson_tensor(const P1Space& space, const Vector& a, const Vector& b) {
  require_2d(space, "apply_ns_poisson_tensor");
  if (a.size() != space.n_dofs() || b.size() != space.n_dofs()) {
    throw std::invalid_argument("apply_ns_poisson_tensor: size mismatch");
  }
  Vector out = Vector::Zero(space.n_dofs());
  for (const auto& e : space.elements()) {
    const Point3 grad_w = a(e.dofs[0]) * e.grads[0] + a(e.dofs[1]) * e.grads[1] +
                          a(e.dofs[2]) * e.grads[2];
    const Point3 grad_b = b(e.dofs[0]) * e.grads[0] + b(e.dofs[1]) * e.grads[1] +
                          b(e.dofs[2]) * e.grads[2];
    const double value = e.normal.dot(grad_b.cross(grad_w)) * e.area / 3.0;
    for (int p = 0; p < 3; ++p) out(e.dofs[p]) += value;
  }
  return out;
}

Vector lumped_mass(const P1Space& space) {
  const SparseMatrix m = assemble_mass(space);
  return m * Vector::Ones(space.n_dofs());
}

}  // namespace mpx
