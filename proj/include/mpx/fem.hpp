#pragma once

#include <array>
#include <memory>
#include <type_traits>
#include <variant>
#include <vector>

#include "mpx/linalg.hpp"
#include "mpx/mesh.hpp"
#include "mpx/types.hpp"

namespace mpx {

/// Per-triangle data for flat P1 elements embedded in R^3.
struct TriangleElement {
  std::array<int, 3> dofs;
  double area;
  Point3 normal;                  // unit, from counter-clockwise orientation
  std::array<Point3, 3> grads;    // tangential gradients of the barycentric hats
};

/// Continuous piecewise-linear space on a periodic interval or closed
/// triangulated surface. Degrees of freedom are vertices after periodic
/// identification.
class P1Space {
 public:
  explicit P1Space(Mesh1D mesh);
  explicit P1Space(TriMesh mesh);

  int n_dofs() const { return n_dofs_; }
  int dimension() const { return is_1d() ? 1 : 2; }
  bool is_1d() const { return std::holds_alternative<Mesh1D>(mesh_); }

  const Mesh1D& mesh_1d() const;
  const TriMesh& tri_mesh() const;
  const std::vector<TriangleElement>& elements() const { return elements_; }

  /// Position of each degree of freedom (x, 0, 0 in 1D).
  const std::vector<Point3>& dof_coords() const { return dof_coords_; }
  /// |Omega| of the discrete domain.
  double measure() const;

  /// Nodal interpolant of f(x) (1D) or f(p) (surface).
  template <typename F>
  Vector interpolate(F&& f) const {
    Vector a(n_dofs_);
    for (int i = 0; i < n_dofs_; ++i) {
      if constexpr (std::is_invocable_v<F&, double>) {
        a(i) = f(dof_coords_[i].x());
      } else {
        a(i) = f(dof_coords_[i]);
      }
    }
    return a;
  }

 private:
  std::variant<Mesh1D, TriMesh> mesh_;
  int n_dofs_ = 0;
  std::vector<Point3> dof_coords_;
  std::vector<TriangleElement> elements_;
};

using P1SpacePtr = std::shared_ptr<const P1Space>;

SparseMatrix assemble_mass(const P1Space& space);
SparseMatrix assemble_stiffness(const P1Space& space);
/// A_ij = <d_x v_j, v_i>. Only defined on the periodic interval.
SparseMatrix assemble_advection_1d(const P1Space& space);
/// R(i, j, k) = <v_j v_k, v_i>, exact element integrals. 1D only.
TrilinearForm assemble_trilinear_kdv(const P1Space& space);

/// Surface Poisson bracket {f, g} = n . (grad f x grad g), which equals
/// grad f . JJ grad g with JJ the rotation of the symplectic matrix in the
/// plane of each triangle.
///
/// J(a)_ij = <{v_j, w_h}, v_i> with w_h = sum_k a_k v_k, so that the
/// semi-discrete vorticity equation reads M da/dt = J(a) b - nu K a with
/// b = -psi the stream-function coefficients.
SparseMatrix assemble_ns_poisson_tensor(const P1Space& space, const Vector& a);

/// (J(a) b)_i = <{b_h, w_h}, v_i>, evaluated without forming J(a).
Vector apply_ns_poisson_tensor(const P1Space& space, const Vector& a, const Vector& b);

/// Row sums of the mass matrix: int v_i.
Vector lumped_mass(const P1Space& space);

}  // namespace mpx
