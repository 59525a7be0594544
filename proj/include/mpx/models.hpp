#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <utility>

#include "mpx/fem.hpp"
#include "mpx/linalg.hpp"
#include "mpx/system.hpp"

namespace mpx {

// ---------------------------------------------------------------------------
// Korteweg-de Vries:  u_t + alpha u u_x + eta u_xxx = nu u_xx  (periodic)
// ---------------------------------------------------------------------------

struct KdvParams {
  double alpha = 6.0;
  double eta = 1.0;
  double nu = 0.0;
  double domain_length = 20.0 * std::numbers::pi;

  void validate() const;
};

/// M, K, A and R on the periodic interval, plus a reusable mass solver.
struct KdvOperators {
  P1SpacePtr space;
  SparseMatrix mass;
  SparseMatrix stiffness;
  SparseMatrix advection;
  TrilinearForm triple;
  std::shared_ptr<const SpdSolver> mass_solver;

  explicit KdvOperators(P1SpacePtr p1, double solver_tol = 1e-12);
};

/// H(a) = (alpha/6) R[a,a,a] - (eta/2) a^T K a.
double kdv_hamiltonian(const KdvParams& params, const KdvOperators& ops, const Vector& a);
/// grad H(a) = (alpha/2) R a (x) a - eta K a.
Vector kdv_grad_hamiltonian(const KdvParams& params, const KdvOperators& ops, const Vector& a);

/// J = -A, G = nu K (PSD), S(a) = -1/2 a^T M a, Casimir: mass 1^T M a.
MetriplecticSystem kdv_system(const KdvParams& params, std::shared_ptr<const KdvOperators> ops);

/// Travelling one-soliton sech^2((sqrt2/2)(x - 5 pi - 2 t)), the exact
/// solution on the real line for alpha = 6, eta = 1.
template <typename Scalar>
Scalar soliton_exact(Scalar x, Scalar t) {
  using std::cosh;
  using std::sqrt;
  const Scalar s = Scalar(1) / cosh(sqrt(Scalar(2)) / Scalar(2) *
                                    (x - Scalar(5) * std::numbers::pi_v<Scalar> - Scalar(2) * t));
  return s * s;
}

// ---------------------------------------------------------------------------
// 2D Navier-Stokes in vorticity form on closed surfaces
// ---------------------------------------------------------------------------

struct NsParams {
  double nu = 0.0;
  Geometry geometry = Geometry::Torus;

  void validate() const;
};

/// Mass, stiffness and the zero-mean stream-function solver K b = M a.
struct NsOperators {
  P1SpacePtr space;
  SparseMatrix mass;
  SparseMatrix stiffness;
  std::shared_ptr<const SpdSolver> mass_solver;
  std::shared_ptr<const ZeroMeanPoissonSolver> stream_solver;

  explicit NsOperators(P1SpacePtr p1, double solver_tol = 1e-12);

  /// b with K b = M a (mean-free part), b = -psi.
  Vector stream(const Vector& a) const { return stream_solver->solve(mass * a); }
  Vector apply_j(const Vector& a, const Vector& b) const {
    return apply_ns_poisson_tensor(*space, a, b);
  }
};

/// (H, E, P) = (1/2 a^T M b, 1/2 a^T M a, 1/2 a^T K a) with K b = M a.
struct NsInvariants {
  double hamiltonian;
  double enstrophy;
  double palinstrophy;
};
NsInvariants ns_invariants(const Vector& a, const Vector& b, const NsOperators& ops);

/// J(a) from the surface bracket, G = -nu K (NSD), H = 1/2 a^T M K^-1 M a,
/// S = E = 1/2 a^T M a. Casimirs: enstrophy and total vorticity.
MetriplecticSystem ns_system(const NsParams& params, std::shared_ptr<const NsOperators> ops);
MetriplecticSystem ns_torus_system(const NsParams& params, std::shared_ptr<const NsOperators> ops);
MetriplecticSystem ns_sphere_system(const NsParams& params, std::shared_ptr<const NsOperators> ops);

/// Stream function and vorticity pair.
template <typename Scalar>
struct StreamVorticity {
  Scalar psi;
  Scalar omega;
};

inline constexpr double kWalshLambda = 25.0;

/// Steady-shape Walsh flow on [0, 2pi]^2 with omega = -25 psi.
template <typename Scalar>
StreamVorticity<Scalar> walsh_exact(Scalar x, Scalar y, Scalar t, Scalar nu) {
  using std::cos;
  using std::exp;
  using std::sin;
  const Scalar lambda(kWalshLambda);
  const Scalar psi = exp(-nu * lambda * t) *
                     (Scalar(0.25) * cos(Scalar(3) * x) * sin(Scalar(4) * y) -
                      Scalar(0.2) * cos(Scalar(5) * y) - Scalar(0.2) * sin(Scalar(5) * x));
  return {psi, -lambda * psi};
}

/// Degree-one harmonic on the unit sphere: psi = 1/2 sin(theta) cos(phi) e^{-2 nu t},
/// omega = -2 psi. theta is the polar angle.
template <typename Scalar>
StreamVorticity<Scalar> sphere_harmonic_exact(Scalar theta, Scalar phi, Scalar t, Scalar nu) {
  using std::cos;
  using std::exp;
  using std::sin;
  const Scalar psi = Scalar(0.5) * sin(theta) * cos(phi) * exp(Scalar(-2) * nu * t);
  return {psi, Scalar(-2) * psi};
}

/// (theta, phi) of a point, after projection onto the unit sphere.
std::pair<double, double> sphere_angles(const Point3& p);

/// Gaussian: geodesic Gaussian bumps L2-projected onto P1. Nodal: a single
/// P1 hat of height +-intensity at the vertex nearest to each centre.
enum class VortexProfile { Gaussian, Nodal };

struct PointVortexConfig {
  int n_vortices = 512;
  double intensity = 400.0;
  std::uint64_t seed = 1;
  VortexProfile profile = VortexProfile::Gaussian;
  /// Gaussian standard deviation (geodesic); <= 0 selects 2 x mean edge length.
  double regularisation_width = 0.0;

  void validate() const;
};

/// Vortices of peak value +-intensity with alternating signs at uniform
/// random centres, corrected to zero total vorticity.
Vector point_vortex_ic(const PointVortexConfig& config, const NsOperators& ops);

// ---------------------------------------------------------------------------
// Linear advection-diffusion on the periodic interval
// ---------------------------------------------------------------------------

/// J = -v A, G = -nu K (NSD), H = S = 1/2 a^T M a.
MetriplecticSystem advection_diffusion_system(double velocity, double nu, P1SpacePtr space,
                                              double solver_tol = 1e-12);

}  // namespace mpx
